//! Peak gain of products `F(s)^h G(s)^a` of the two car-following factors,
//! and the integer fleet-size search built on it.
//!
//! Peaks are computed on the log scale, `h D_α(ω) + a D_β(ω)`, by a frequency
//! grid followed by golden-section refinement. The log-peak is never below
//! zero because every factor has unit gain as `ω -> 0⁺`.

use crate::error::{Error, Result};
use crate::model::{AvGains, Factor, GainBounds, HvParams};
use crate::optimizer::{nelder_mead, SimplexConfig};
use crate::param::{beta_from_theta, check_feasible, ParamConfig, ThetaParams};

pub const DEFAULT_PEAK_TOL: f64 = 1e-10;
const UNIFORM_POINTS: usize = 2048;
const GEOMETRIC_POINTS: usize = 512;
/// Doubling cap for the AV-count search.
const MAX_AV_COUNT: u64 = 1 << 40;

/// `F(s; α)^h · G(s; β)^a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorProduct {
    pub hv_factor: Factor,
    pub h: u64,
    pub av_factor: Factor,
    pub a: u64,
}

impl FactorProduct {
    pub fn new(hv: &HvParams, h: u64, av: &AvGains, a: u64) -> Result<Self> {
        Self::from_factors(*hv.factor(), h, *av.factor(), a)
    }

    pub fn from_factors(hv_factor: Factor, h: u64, av_factor: Factor, a: u64) -> Result<Self> {
        if h + a == 0 {
            return Err(Error::InvalidParams("empty factor product".into()));
        }
        if (h > 0 && !hv_factor.is_hurwitz()) || (a > 0 && !av_factor.is_hurwitz()) {
            return Err(Error::InvalidParams("factors must be Hurwitz".into()));
        }
        Ok(Self {
            hv_factor,
            h,
            av_factor,
            a,
        })
    }

    /// `ln |K(iω)|` in terms of `x = ω²`.
    fn log_magnitude_sq(&self, x: f64) -> f64 {
        let mut v = 0.0;
        if self.h > 0 {
            v += self.h as f64 * self.hv_factor.log_magnitude_sq(x);
        }
        if self.a > 0 {
            v += self.a as f64 * self.av_factor.log_magnitude_sq(x);
        }
        v
    }

    pub fn log_magnitude(&self, omega: f64) -> f64 {
        self.log_magnitude_sq(omega * omega)
    }

    /// Frequencies above which every factor attenuates.
    fn amplifying_limit(&self) -> f64 {
        let mut hi: f64 = 0.0;
        if self.h > 0 {
            hi = hi.max(self.hv_factor.amplifying_band().hi);
        }
        if self.a > 0 {
            hi = hi.max(self.av_factor.amplifying_band().hi);
        }
        hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakGain {
    /// `ln ‖K‖∞ >= 0`.
    pub log_peak: f64,
    /// Frequency of the peak; `None` when the supremum is the unit gain at `ω -> 0⁺`.
    pub argmax: Option<f64>,
}

impl PeakGain {
    pub fn norm(&self) -> f64 {
        self.log_peak.exp()
    }

    /// `‖K‖∞ <= 1`.
    pub fn is_contractive(&self) -> bool {
        self.log_peak <= 0.0
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= tol * 0.5 * (lo + hi).abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Log-scale peak gain of a factor product.
pub fn peak_gain(prod: &FactorProduct, tol: f64) -> PeakGain {
    let flat = PeakGain {
        log_peak: 0.0,
        argmax: None,
    };
    let top = prod.amplifying_limit();
    if !(top > 0.0) {
        return flat;
    }
    let mut grid: Vec<f64> = (1..=UNIFORM_POINTS)
        .map(|k| top * k as f64 / (UNIFORM_POINTS + 1) as f64)
        .chain(
            (0..GEOMETRIC_POINTS)
                .map(|k| top * 10f64.powf(-6.0 + 4.0 * k as f64 / (GEOMETRIC_POINTS - 1) as f64)),
        )
        .collect();
    grid.push(top);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for (i, &w) in grid.iter().enumerate() {
        let v = prod.log_magnitude(w);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    if !(best > 0.0) {
        return flat;
    }
    let lo = if best_i == 0 { 0.0 } else { grid[best_i - 1] };
    let hi = grid[(best_i + 1).min(grid.len() - 1)];
    let (w, v) = golden_max(|w| prod.log_magnitude(w), lo, hi, tol.max(1e-15));
    let (w, v) = if v >= best {
        (w, v)
    } else {
        (grid[best_i], best)
    };
    PeakGain {
        log_peak: v,
        argmax: Some(w),
    }
}

/// `‖F^h G^a‖∞ = sup_ω |F(iω)|^h |G(iω)|^a`.
pub fn hinf_norm(prod: &FactorProduct, tol: f64) -> f64 {
    peak_gain(prod, tol).norm()
}

fn check_pair(av: &AvGains, hv: &HvParams) -> Result<()> {
    if !hv.is_worst_case() {
        return Err(Error::NotWorstCase { delta: hv.delta() });
    }
    if av.delta() < 0.0 {
        return Err(Error::UnstableGains { delta: av.delta() });
    }
    Ok(())
}

fn log_peak(hv: &HvParams, h: u64, av: &AvGains, a: u64) -> Result<f64> {
    Ok(peak_gain(&FactorProduct::new(hv, h, av, a)?, DEFAULT_PEAK_TOL).log_peak)
}

/// Fewest AVs `a >= 1` with `‖F^{n_hv} G^a‖∞ <= 1`, by doubling then bisection.
pub fn v_star(av: &AvGains, hv: &HvParams, n_hv: u64) -> Result<u64> {
    check_pair(av, hv)?;
    let feasible = |a: u64| -> Result<bool> { Ok(log_peak(hv, n_hv, av, a)? <= 0.0) };
    if feasible(1)? {
        return Ok(1);
    }
    let mut lo = 1;
    let mut hi = 2;
    while !feasible(hi)? {
        lo = hi;
        hi *= 2;
        if hi > MAX_AV_COUNT {
            return Err(Error::NoFeasibleCount {
                limit: MAX_AV_COUNT,
            });
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VStarReport {
    /// Optimal AV count `V**`.
    pub n_av: u64,
    pub beta: AvGains,
    pub theta: ThetaParams,
    pub iterations: usize,
}

/// Surrogate used for the θ search: `V*(β) + t / (1 + t)` with `t` the
/// log-peak one AV short of `V*`, which orders equal counts by how close the
/// next smaller count is to becoming feasible.
fn v_star_surrogate(av: &AvGains, hv: &HvParams, n_hv: u64) -> Result<(u64, f64)> {
    let v = v_star(av, hv, n_hv)?;
    let t = if n_hv + v - 1 > 0 {
        log_peak(hv, n_hv, av, v - 1)?
    } else {
        0.0
    };
    Ok((v, v as f64 + t / (1.0 + t)))
}

/// `V** = min_θ V*(β(θ))`, searched with Nelder–Mead from `theta0`.
pub fn v_star_star(
    hv: &HvParams,
    bounds: &GainBounds,
    n_hv: u64,
    cfg: &SimplexConfig,
    pcfg: &ParamConfig,
    theta0: &ThetaParams,
) -> Result<VStarReport> {
    if !hv.is_worst_case() {
        return Err(Error::NotWorstCase { delta: hv.delta() });
    }
    pcfg.validate()?;
    check_feasible(bounds, pcfg.epsilon)?;
    let eval = |theta: &[f64]| -> Result<(u64, f64)> {
        let beta = beta_from_theta(&ThetaParams([theta[0], theta[1], theta[2]]), bounds, pcfg)?;
        v_star_surrogate(&beta, hv, n_hv)
    };
    eval(&theta0.0)?;
    let res = nelder_mead(
        |theta| eval(theta).map(|(_, s)| s).unwrap_or(f64::INFINITY),
        &theta0.0,
        cfg,
    )?;
    let theta = ThetaParams([res.x[0], res.x[1], res.x[2]]);
    let beta = beta_from_theta(&theta, bounds, pcfg)?;
    Ok(VStarReport {
        n_av: v_star(&beta, hv, n_hv)?,
        beta,
        theta,
        iterations: res.iterations,
    })
}
