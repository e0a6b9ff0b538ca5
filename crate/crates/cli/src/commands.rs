//! One function per subcommand. Each writes its files into `out` and returns
//! the text printed on stdout.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use ringstab::{
    asymptotic_offset, canonical_rotation, eigenmodes, fleet_bounds, greedy_placement, j_star,
    lattice_starts, min_avs, procedure_lbf, procedure_lbf_multistart, simulate_strided,
    string_stable, v_star, v_star_star, AvGains, BoundReport, GainBounds, PlatoonConfig,
    WindowNorms,
};

use crate::config::{Placement, ScenarioConfig, SweptBound, SweptComponent};
use crate::error::{CliError, Result};
use crate::format::{g12, join_g12, write_file};

fn optimize(cfg: &ScenarioConfig, bounds: &GainBounds) -> ringstab::Result<BoundReport> {
    let hv = cfg
        .hv_params()
        .map_err(|_| ringstab::Error::InvalidParams("alpha".into()))?;
    if cfg.simplex.multistart {
        procedure_lbf_multistart(
            &hv,
            bounds,
            &cfg.simplex_config(),
            &cfg.param_config(),
            &lattice_starts(),
        )
    } else {
        procedure_lbf(
            &hv,
            bounds,
            &cfg.simplex_config(),
            &cfg.param_config(),
            &cfg.theta0(),
        )
    }
}

pub fn cmd_bound(cfg: &ScenarioConfig, out: &Path) -> Result<(BoundReport, String)> {
    let bounds = cfg.gain_bounds()?;
    let rep = optimize(cfg, &bounds)?;
    let fb = fleet_bounds(rep.j_star_star, cfg.fleet.n_hv, cfg.fleet.n_av)?;
    let b = rep.beta_star.as_array();
    let mut csv = String::from("beta1,beta2,beta3,j_star_star,gamma_lower,min_avs,max_hvs\n");
    writeln!(
        csv,
        "{},{},{},{},{}",
        join_g12(b),
        g12(rep.j_star_star),
        g12(rep.gamma_lower),
        fb.min_avs,
        fb.max_hvs
    )
    .unwrap();
    let path = write_file(out, "bound.csv", &csv)?;

    let mut s = String::new();
    writeln!(
        s,
        "optimal AV gains  beta* = ({})",
        join_g12(b).replace(',', ", ")
    )
    .unwrap();
    writeln!(s, "margin            J**   = {}", g12(rep.j_star_star)).unwrap();
    writeln!(s, "penetration rate  gamma >= {}", g12(rep.gamma_lower)).unwrap();
    writeln!(s, "{} HVs need at least {} AVs", cfg.fleet.n_hv, fb.min_avs).unwrap();
    writeln!(
        s,
        "{} AVs support at most {} HVs",
        cfg.fleet.n_av, fb.max_hvs
    )
    .unwrap();
    writeln!(
        s,
        "simplex: {} iterations, {}",
        rep.iterations,
        if rep.converged {
            "converged"
        } else {
            "iteration limit reached"
        }
    )
    .unwrap();
    write_file(out, "bound.txt", &s)?;
    writeln!(s, "wrote {}", path.display()).unwrap();
    Ok((rep, s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: std::result::Result<f64, String>,
}

impl SweepRow {
    pub fn floor(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|j| j.floor())
    }
}

fn swept_bounds(cfg: &ScenarioConfig, v: f64) -> ringstab::Result<GainBounds> {
    let (mut lower, mut upper) = (cfg.bounds.lower, cfg.bounds.upper);
    let target = match cfg.sweep.bound {
        SweptBound::Lower => &mut lower,
        SweptBound::Upper => &mut upper,
    };
    match cfg.sweep.component {
        SweptComponent::All => *target = [v; 3],
        SweptComponent::B1 => target[0] = v,
        SweptComponent::B2 => target[1] = v,
        SweptComponent::B3 => target[2] = v,
    }
    GainBounds::new(lower, upper)
}

pub fn run_sweep(cfg: &ScenarioConfig) -> Result<Vec<SweepRow>> {
    let values = cfg.sweep.values()?;
    Ok(values
        .par_iter()
        .map(|&v| SweepRow {
            value: v,
            outcome: swept_bounds(cfg, v)
                .and_then(|b| optimize(cfg, &b))
                .map(|r| r.j_star_star)
                .map_err(|e| e.to_string()),
        })
        .collect())
}

pub fn cmd_sweep(cfg: &ScenarioConfig, out: &Path) -> Result<(Vec<SweepRow>, String)> {
    cfg.hv_params()?;
    let rows = run_sweep(cfg)?;
    let mut csv = String::from("sweep_value,j_star_star,floor_j_star_star,status\n");
    for r in &rows {
        match &r.outcome {
            Ok(j) => writeln!(csv, "{},{},{},ok", g12(r.value), g12(*j), g12(j.floor())),
            Err(e) => writeln!(csv, "{},nan,nan,\"{}\"", g12(r.value), e.replace('"', "'")),
        }
        .unwrap();
    }
    let path = write_file(out, "sweep.csv", &csv)?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    let s = format!(
        "{} grid points, {} failed\nwrote {}\n",
        rows.len(),
        failed,
        path.display()
    );
    Ok((rows, s))
}

/// AV gains for ring commands: explicit, or the optimum over the bounds.
pub fn platoon_gains(cfg: &ScenarioConfig) -> Result<AvGains> {
    match cfg.platoon.beta {
        Some([b1, b2, b3]) => Ok(AvGains::checked(b1, b2, b3)?),
        None => Ok(optimize(cfg, &cfg.gain_bounds()?)?.beta_star),
    }
}

fn av_set(cfg: &ScenarioConfig, av: &AvGains) -> Result<BTreeSet<usize>> {
    let p = &cfg.platoon;
    let m = p.av_count();
    Ok(match p.placement {
        Placement::Given => p.av_indices.iter().copied().collect(),
        Placement::Contiguous => (1..=m).collect(),
        Placement::Spread => (0..m).map(|k| k * p.n / m.max(1) + 1).collect(),
        Placement::Greedy => {
            if m == 0 {
                BTreeSet::new()
            } else {
                greedy_placement(p.n, m, &cfg.hv_params()?, av)?
            }
        }
    })
}

pub fn platoon_config(cfg: &ScenarioConfig) -> Result<PlatoonConfig> {
    let av = platoon_gains(cfg)?;
    let set = av_set(cfg, &av)?;
    Ok(PlatoonConfig::new(
        cfg.platoon.n,
        set,
        cfg.hv_params()?,
        av,
    )?)
}

fn fmt_set(s: &BTreeSet<usize>) -> String {
    let v: Vec<String> = s.iter().map(usize::to_string).collect();
    format!("{{{}}}", v.join(", "))
}

pub fn cmd_eig(cfg: &ScenarioConfig, out: &Path) -> Result<(ringstab::EigenmodeSet, String)> {
    let pc = platoon_config(cfg)?;
    let modes = eigenmodes(&pc, cfg.eig.residual_tol)?;
    let tol = cfg.eig.unstable_tol;
    let mut csv = String::from("index,re,im,residual,rhp\n");
    for (k, (z, r)) in modes.roots.iter().zip(&modes.residuals).enumerate() {
        writeln!(
            csv,
            "{},{},{},{},{}",
            k + 1,
            g12(z.re),
            g12(z.im),
            g12(*r),
            u8::from(z.re > tol)
        )
        .unwrap();
    }
    let path = write_file(out, "eig.csv", &csv)?;
    let stable = string_stable(&modes, tol);
    let mut s = String::new();
    writeln!(
        s,
        "ring of {} vehicles, AVs at {}",
        pc.n,
        fmt_set(&pc.av_indices)
    )
    .unwrap();
    writeln!(
        s,
        "AV gains ({})",
        join_g12(pc.av.as_array()).replace(',', ", ")
    )
    .unwrap();
    writeln!(s, "verdict: {}", if stable { "stable" } else { "unstable" }).unwrap();
    writeln!(s, "right-half-plane roots: {}", modes.unstable_count(tol)).unwrap();
    writeln!(s, "max real part: {}", g12(modes.max_real_part)).unwrap();
    writeln!(s, "max residual: {}", g12(modes.max_residual)).unwrap();
    write_file(out, "eig.txt", &s)?;
    writeln!(s, "wrote {}", path.display()).unwrap();
    Ok((modes, s))
}

pub fn cmd_simulate(
    cfg: &ScenarioConfig,
    out: &Path,
) -> Result<(ringstab::TrajectoryRecord, String)> {
    let pc = platoon_config(cfg)?;
    let sim = &cfg.simulation;
    let mut init = vec![(0.0, 0.0); pc.n];
    init[sim.vehicle.unwrap_or(pc.n) - 1].0 = sim.magnitude;
    let rec = simulate_strided(&pc, &init, sim.horizon, sim.dt, sim.stride)?;
    let offset = asymptotic_offset(&pc, &init)?;

    let mut csv = String::from("t");
    for j in 1..=pc.n {
        write!(csv, ",y_{j}").unwrap();
    }
    csv.push('\n');
    for k in 0..rec.t.len() {
        csv.push_str(&g12(rec.t[k]));
        for y in &rec.y {
            csv.push(',');
            csv.push_str(&g12(y[k]));
        }
        csv.push('\n');
    }
    let path = write_file(out, "traj.csv", &csv)?;
    let last = rec.t.len() - 1;
    let s = format!(
        "{} vehicles, {} recorded steps\nsettling offset {}\nfinal max deviation {}\nwrote {}\n",
        pc.n,
        rec.t.len(),
        g12(offset),
        g12(rec.sup_deviation(last, offset)),
        path.display()
    );
    Ok((rec, s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaceReport {
    pub chosen: BTreeSet<usize>,
    pub chi: f64,
    pub contiguous_chi: f64,
    pub compared: Vec<(BTreeSet<usize>, f64)>,
}

pub fn cmd_place(cfg: &ScenarioConfig, out: &Path) -> Result<(PlaceReport, String)> {
    let p = &cfg.platoon;
    let m = p.av_count();
    if m == 0 || m >= p.n || p.n < 3 {
        return Err(CliError::Usage(format!(
            "place needs 1 <= m < n and n >= 3, got m = {m}, n = {}",
            p.n
        )));
    }
    let hv = cfg.hv_params()?;
    let av = platoon_gains(cfg)?;
    let chosen = canonical_rotation(p.n, &av_set(cfg, &av)?);
    let table = WindowNorms::new(p.n, m, &hv, &av)?;
    let contiguous: BTreeSet<usize> = (1..=m).collect();
    let compared: Vec<(BTreeSet<usize>, f64)> = p
        .compare
        .iter()
        .map(|v| {
            let s: BTreeSet<usize> = v.iter().copied().collect();
            let chi = if s.len() <= m {
                table.chi(&s)
            } else {
                WindowNorms::new(p.n, s.len(), &hv, &av)
                    .map(|t| t.chi(&s))
                    .unwrap_or(f64::NAN)
            };
            (s, chi)
        })
        .collect();
    let rep = PlaceReport {
        chi: table.chi(&chosen),
        contiguous_chi: table.chi(&contiguous),
        chosen,
        compared,
    };
    let mut s = String::new();
    writeln!(
        s,
        "ring of {} vehicles with {} AVs, placement {:?}",
        p.n, m, p.placement
    )
    .unwrap();
    writeln!(
        s,
        "AV gains ({})",
        join_g12(av.as_array()).replace(',', ", ")
    )
    .unwrap();
    writeln!(s, "chosen {} chi = {}", fmt_set(&rep.chosen), g12(rep.chi)).unwrap();
    writeln!(
        s,
        "contiguous {} chi = {}",
        fmt_set(&contiguous),
        g12(rep.contiguous_chi)
    )
    .unwrap();
    for (set, chi) in &rep.compared {
        writeln!(s, "compare {} chi = {}", fmt_set(set), g12(*chi)).unwrap();
    }
    let path = write_file(out, "place.txt", &s)?;
    writeln!(s, "wrote {}", path.display()).unwrap();
    Ok((rep, s))
}

pub fn cmd_vstar(cfg: &ScenarioConfig, out: &Path) -> Result<(ringstab::VStarReport, String)> {
    let hv = cfg.hv_params()?;
    let bounds = cfg.gain_bounds()?;
    let n_hv = cfg.fleet.n_hv;
    let rep = v_star_star(
        &hv,
        &bounds,
        n_hv,
        &cfg.simplex_config(),
        &cfg.param_config(),
        &cfg.theta0(),
    )?;
    // the margin route for the same gains
    let j = j_star(&rep.beta, &hv, ringstab::penetration::DEFAULT_TOL)?.j_star;
    let via_margin = min_avs(j, n_hv)?;
    debug_assert_eq!(v_star(&rep.beta, &hv, n_hv)?, rep.n_av);
    let mut s = String::new();
    writeln!(s, "HVs: {n_hv}").unwrap();
    writeln!(s, "minimum AVs (peak-gain route): {}", rep.n_av).unwrap();
    writeln!(
        s,
        "achieving gains ({})",
        join_g12(rep.beta.as_array()).replace(',', ", ")
    )
    .unwrap();
    writeln!(s, "theta ({})", join_g12(rep.theta.0).replace(',', ", ")).unwrap();
    writeln!(
        s,
        "margin at these gains J* = {}, ceil(N_HV / J*) = {}",
        g12(j),
        via_margin
    )
    .unwrap();
    let path = write_file(out, "vstar.txt", &s)?;
    writeln!(s, "wrote {}", path.display()).unwrap();
    Ok((rep, s))
}
