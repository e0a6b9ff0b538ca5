//! Scenario files: TOML, every section optional, unknown keys rejected.
//!
//! A preset supplies a base document; the user's file is merged over it key
//! by key, and command-line flags win over both.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::{Table, Value};

use ringstab::{GainBounds, HvParams, ParamConfig, Sigmoid, SimplexConfig, ThetaParams};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub hv: HvSection,
    pub bounds: BoundsSection,
    pub param: ParamSection,
    pub simplex: SimplexSection,
    pub fleet: FleetSection,
    pub sweep: SweepSection,
    pub platoon: PlatoonSection,
    pub simulation: SimulationSection,
    pub eig: EigSection,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct HvSection {
    pub alpha: [f64; 3],
}

impl Default for HvSection {
    fn default() -> Self {
        Self {
            alpha: [0.3 * std::f64::consts::PI, 1.5, 0.9],
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            lower: [0.01; 3],
            upper: [2.0; 3],
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SigmoidName {
    Logistic,
    Tanh,
    Arctan,
    Erf,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ParamSection {
    pub epsilon: f64,
    pub zeta: f64,
    pub sigmoid: SigmoidName,
}

impl Default for ParamSection {
    fn default() -> Self {
        let d = ParamConfig::default();
        Self {
            epsilon: d.epsilon,
            zeta: d.zeta,
            sigmoid: SigmoidName::Logistic,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimplexSection {
    pub max_iterations: Option<usize>,
    pub x_tolerance: f64,
    pub f_tolerance: f64,
    pub initial_step: f64,
    pub zero_step: f64,
    pub theta0: [f64; 3],
    /// Run from every point of the `{-5, 0, 5}³` lattice and keep the best.
    pub multistart: bool,
}

impl Default for SimplexSection {
    fn default() -> Self {
        let d = SimplexConfig::default();
        Self {
            max_iterations: d.max_iterations,
            x_tolerance: d.x_tolerance,
            f_tolerance: d.f_tolerance,
            initial_step: d.initial_step,
            zero_step: d.zero_step,
            theta0: [0.0; 3],
            multistart: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FleetSection {
    /// HV count for the minimum-AV question.
    pub n_hv: u64,
    /// AV count for the maximum-HV question.
    pub n_av: u64,
}

impl Default for FleetSection {
    fn default() -> Self {
        Self { n_hv: 400, n_av: 1 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SweptBound {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SweptComponent {
    All,
    B1,
    B2,
    B3,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Linear,
    Log,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub bound: SweptBound,
    pub component: SweptComponent,
    pub grid: GridKind,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// Keep every k-th grid point (the last point is always kept).
    pub every: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            bound: SweptBound::Upper,
            component: SweptComponent::All,
            grid: GridKind::Linear,
            start: 1.0,
            stop: 300.0,
            points: 300,
            every: 1,
        }
    }
}

impl SweepSection {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points == 0 || self.every == 0 {
            return Err(invalid("sweep.points and sweep.every must be positive"));
        }
        if self.grid == GridKind::Log && !(self.start > 0.0 && self.stop > 0.0) {
            return Err(invalid("log sweep needs positive start and stop"));
        }
        let n = self.points;
        let at = |k: usize| -> f64 {
            if n == 1 {
                return self.start;
            }
            let w = k as f64 / (n - 1) as f64;
            match self.grid {
                GridKind::Linear => self.start + w * (self.stop - self.start),
                GridKind::Log => {
                    10f64.powf(self.start.log10() + w * (self.stop.log10() - self.start.log10()))
                }
            }
        };
        let mut out: Vec<f64> = (0..n).step_by(self.every).map(at).collect();
        if !(n - 1).is_multiple_of(self.every) {
            out.push(at(n - 1));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// `av_indices` as written.
    Given,
    /// `{1, …, m}`.
    Contiguous,
    /// Evenly spaced around the ring.
    Spread,
    Greedy,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PlatoonSection {
    pub n: usize,
    /// AV count; defaults to `av_indices.len()` for a given placement.
    pub m: Option<usize>,
    pub placement: Placement,
    pub av_indices: Vec<usize>,
    /// AV gains; when absent, the optimum over the configured bounds is used.
    pub beta: Option<[f64; 3]>,
    /// Extra AV sets whose χ is reported by `place`.
    pub compare: Vec<Vec<usize>>,
}

impl Default for PlatoonSection {
    fn default() -> Self {
        Self {
            n: 185,
            m: None,
            placement: Placement::Given,
            av_indices: vec![185],
            beta: None,
            compare: Vec::new(),
        }
    }
}

impl PlatoonSection {
    pub fn av_count(&self) -> usize {
        self.m.unwrap_or(self.av_indices.len())
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub horizon: f64,
    pub dt: f64,
    /// Record every k-th step.
    pub stride: usize,
    /// 1-based vehicle given the initial position offset; defaults to `n`.
    pub vehicle: Option<usize>,
    pub magnitude: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            horizon: 100.0,
            dt: ringstab::platoon::DEFAULT_DT,
            stride: 10,
            vehicle: None,
            magnitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EigSection {
    pub residual_tol: f64,
    pub unstable_tol: f64,
}

impl Default for EigSection {
    fn default() -> Self {
        Self {
            residual_tol: ringstab::platoon::DEFAULT_RESIDUAL_TOL,
            unstable_tol: ringstab::platoon::UNSTABLE_TOL,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl ScenarioConfig {
    pub fn hv_params(&self) -> Result<HvParams> {
        let [a1, a2, a3] = self.hv.alpha;
        Ok(HvParams::new(a1, a2, a3)?)
    }

    pub fn gain_bounds(&self) -> Result<GainBounds> {
        Ok(GainBounds::new(self.bounds.lower, self.bounds.upper)?)
    }

    pub fn param_config(&self) -> ParamConfig {
        ParamConfig {
            epsilon: self.param.epsilon,
            zeta: self.param.zeta,
            sigmoid: match self.param.sigmoid {
                SigmoidName::Logistic => Sigmoid::Logistic,
                SigmoidName::Tanh => Sigmoid::Tanh,
                SigmoidName::Arctan => Sigmoid::Arctan,
                SigmoidName::Erf => Sigmoid::Erf,
            },
        }
    }

    pub fn simplex_config(&self) -> SimplexConfig {
        SimplexConfig {
            max_iterations: self.simplex.max_iterations,
            x_tolerance: self.simplex.x_tolerance,
            f_tolerance: self.simplex.f_tolerance,
            initial_step: self.simplex.initial_step,
            zero_step: self.simplex.zero_step,
            ..SimplexConfig::default()
        }
    }

    pub fn theta0(&self) -> ThetaParams {
        ThetaParams(self.simplex.theta0)
    }
}

/// Built-in scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Wide gain box 0.01..2, 400 HVs, 185-vehicle ring with one AV.
    PaperIv,
    /// Narrow gain box 0.8..2, 27 HVs / 5 AVs, greedy placement on a 32-ring.
    AppendixG,
    /// Upper bound swept over 1..300 with the lower bound at 0.01.
    SweepUpper,
    /// Lower bound swept over 1e-12..1 (log) with the upper bound at 2.
    SweepLower,
}

impl Preset {
    pub fn toml(self) -> &'static str {
        match self {
            Preset::PaperIv => include_str!("../presets/paper-iv.toml"),
            Preset::AppendixG => include_str!("../presets/appendix-g.toml"),
            Preset::SweepUpper => include_str!("../presets/sweep-upper.toml"),
            Preset::SweepLower => include_str!("../presets/sweep-lower.toml"),
        }
    }
}

/// Recursively overlay `top` onto `base`.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_table(text: &str, path: &Path) -> Result<Table> {
    text.parse::<Table>().map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Preset (if any) overlaid by the file (if any), validated.
pub fn load(preset: Option<Preset>, file: Option<&Path>) -> Result<ScenarioConfig> {
    let mut table = Table::new();
    if let Some(p) = preset {
        let name = format!("<preset {p:?}>");
        merge(&mut table, parse_table(p.toml(), Path::new(&name))?);
    }
    let origin = file
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("<defaults>"));
    if let Some(path) = file {
        // an unreadable scenario file is a usage problem, not a compute failure
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        merge(&mut table, parse_table(&text, path)?);
    }
    let cfg: ScenarioConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config {
            path: origin.clone(),
            message: e.to_string(),
        })?;
    cfg.validate().map_err(|e| match e {
        CliError::Usage(message) => CliError::Config {
            path: origin,
            message,
        },
        other => other,
    })?;
    Ok(cfg)
}

impl ScenarioConfig {
    /// Checks that need no computation; bound feasibility is left to the
    /// commands so it maps to its own exit status.
    pub fn validate(&self) -> Result<()> {
        self.hv_params().map_err(|e| invalid(e.to_string()))?;
        GainBounds::new(self.bounds.lower, self.bounds.upper)
            .map_err(|e| invalid(e.to_string()))?;
        self.param_config()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        self.simplex_config()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        self.sweep.values()?;
        let p = &self.platoon;
        if p.n < 2 {
            return Err(invalid("platoon.n must be at least 2"));
        }
        if p.av_count() > p.n {
            return Err(invalid("platoon.m exceeds platoon.n"));
        }
        if p.placement == Placement::Given {
            if p.av_indices.iter().any(|&i| i == 0 || i > p.n) {
                return Err(invalid("platoon.av_indices must lie in 1..=n"));
            }
            if let Some(m) = p.m {
                if m != p.av_indices.len() {
                    return Err(invalid("platoon.m disagrees with platoon.av_indices"));
                }
            }
        }
        for set in &p.compare {
            if set.iter().any(|&i| i == 0 || i > p.n) {
                return Err(invalid("platoon.compare sets must lie in 1..=n"));
            }
        }
        let s = &self.simulation;
        if !(s.dt > 0.0 && s.horizon >= s.dt) || s.stride == 0 {
            return Err(invalid(
                "simulation needs dt > 0, horizon >= dt, stride >= 1",
            ));
        }
        if let Some(v) = s.vehicle {
            if v == 0 || v > p.n {
                return Err(invalid("simulation.vehicle must lie in 1..=n"));
            }
        }
        Ok(())
    }
}
