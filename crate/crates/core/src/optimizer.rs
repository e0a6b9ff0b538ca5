//! Nelder–Mead simplex search and the penetration-bound driver built on it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{AvGains, GainBounds, HvParams};
use crate::param::{beta_from_theta, check_feasible, ParamConfig, ThetaParams};
use crate::penetration::{gamma_lower_bound, MarginAnalyzer, DEFAULT_TOL};

/// Simplex coefficients and stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// `None` means `2000 · d`.
    pub max_iterations: Option<usize>,
    pub x_tolerance: f64,
    pub f_tolerance: f64,
    /// Relative perturbation of nonzero coordinates in the initial simplex.
    pub initial_step: f64,
    /// Absolute perturbation used for zero coordinates.
    pub zero_step: f64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_iterations: None,
            x_tolerance: 1e-10,
            f_tolerance: 1e-10,
            initial_step: 0.05,
            zero_step: 0.00025,
        }
    }
}

impl SimplexConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.reflection > 0.0
            && self.expansion > 1.0
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.x_tolerance > 0.0
            && self.f_tolerance > 0.0
            && self.initial_step.is_finite()
            && self.zero_step.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "invalid simplex settings {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub trace: Vec<f64>,
}

/// Minimizes `objective` starting from `x0`.
///
/// NaN values after the first evaluation are treated as `+∞`, so infeasible
/// regions may be signalled that way.
pub fn nelder_mead<F>(mut objective: F, x0: &[f64], cfg: &SimplexConfig) -> Result<SimplexResult>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate()?;
    let d = x0.len();
    if d == 0 {
        return Err(Error::InvalidParams("empty starting point".into()));
    }
    let f0 = objective(x0);
    if f0.is_nan() {
        return Err(Error::NonFiniteStart);
    }
    let mut eval = |x: &[f64]| {
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let max_iterations = cfg.max_iterations.unwrap_or(2000 * d);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let mut values: Vec<f64> = Vec::with_capacity(d + 1);
    simplex.push(x0.to_vec());
    values.push(f0);
    for i in 0..d {
        let mut v = x0.to_vec();
        v[i] = if v[i] != 0.0 {
            (1.0 + cfg.initial_step) * v[i]
        } else {
            cfg.zero_step
        };
        values.push(eval(&v));
        simplex.push(v);
    }
    let mut evaluations = d + 1;

    let mut order: Vec<usize> = (0..=d).collect();
    let sort = |simplex: &mut Vec<Vec<f64>>, values: &mut Vec<f64>, order: &mut Vec<usize>| {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let s: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let v: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        *simplex = s;
        *values = v;
        for (k, o) in order.iter_mut().enumerate() {
            *o = k;
        }
    };
    sort(&mut simplex, &mut values, &mut order);

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let point = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(w).map(|(ci, wi)| ci + t * (ci - wi)).collect()
    };

    while iterations < max_iterations {
        let f_spread = values[1..]
            .iter()
            .map(|v| (v - values[0]).abs())
            .fold(0.0, f64::max);
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let x_scale = simplex[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if f_spread <= cfg.f_tolerance.max(10.0 * f64::EPSILON * values[0].abs())
            && x_spread <= cfg.x_tolerance.max(10.0 * f64::EPSILON * x_scale)
        {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; d];
        for v in &simplex[..d] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / d as f64;
            }
        }
        let worst = simplex[d].clone();
        let f_worst = values[d];

        let xr = point(&centroid, &worst, cfg.reflection);
        let fr = eval(&xr);
        evaluations += 1;

        let mut do_shrink = false;
        if fr < values[0] {
            let xe = point(&centroid, &worst, cfg.reflection * cfg.expansion);
            let fe = eval(&xe);
            evaluations += 1;
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
        } else if fr < f_worst {
            // outside contraction
            let xc = point(&centroid, &worst, cfg.reflection * cfg.contraction);
            let fc = eval(&xc);
            evaluations += 1;
            if fc <= fr {
                simplex[d] = xc;
                values[d] = fc;
            } else {
                do_shrink = true;
            }
        } else {
            // inside contraction
            let xcc = point(&centroid, &worst, -cfg.contraction);
            let fcc = eval(&xcc);
            evaluations += 1;
            if fcc < f_worst {
                simplex[d] = xcc;
                values[d] = fcc;
            } else {
                do_shrink = true;
            }
        }
        if do_shrink {
            let best = simplex[0].clone();
            for k in 1..=d {
                let v: Vec<f64> = best
                    .iter()
                    .zip(&simplex[k])
                    .map(|(b, x)| b + cfg.shrink * (x - b))
                    .collect();
                values[k] = eval(&v);
                simplex[k] = v;
            }
            evaluations += d;
        }
        sort(&mut simplex, &mut values, &mut order);
        trace.push(values[0]);
    }

    Ok(SimplexResult {
        x: simplex.swap_remove(0),
        f: values[0],
        iterations,
        evaluations,
        converged,
        trace,
    })
}

/// Outcome of the optimal penetration-bound search.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub theta_star: ThetaParams,
    pub beta_star: AvGains,
    /// `J**`, the maximized margin.
    pub j_star_star: f64,
    /// `1 / (J** + 1)`.
    pub gamma_lower: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn validate_problem(hv: &HvParams, bounds: &GainBounds, pcfg: &ParamConfig) -> Result<()> {
    if !hv.is_worst_case() {
        return Err(Error::NotWorstCase { delta: hv.delta() });
    }
    pcfg.validate()?;
    check_feasible(bounds, pcfg.epsilon)?;
    Ok(())
}

/// Maximizes `J*(β(θ))` over θ ∈ ℝ³ from `theta0` and reports `J**` and the
/// penetration-rate bound `1 / (J** + 1)`.
pub fn procedure_lbf(
    hv: &HvParams,
    bounds: &GainBounds,
    cfg: &SimplexConfig,
    pcfg: &ParamConfig,
    theta0: &ThetaParams,
) -> Result<BoundReport> {
    validate_problem(hv, bounds, pcfg)?;
    let analyzer = MarginAnalyzer::new(hv, DEFAULT_TOL)?;
    let margin = |theta: &[f64]| -> Result<f64> {
        let beta = beta_from_theta(&ThetaParams([theta[0], theta[1], theta[2]]), bounds, pcfg)?;
        Ok(analyzer.analyze(&beta)?.j_star)
    };
    // Surface the first infeasibility instead of a silent −∞.
    margin(&theta0.0)?;

    let res = nelder_mead(
        |theta| match margin(theta) {
            Ok(j) => -j,
            Err(_) => f64::INFINITY,
        },
        &theta0.0,
        cfg,
    )?;
    let theta_star = ThetaParams([res.x[0], res.x[1], res.x[2]]);
    let beta_star = beta_from_theta(&theta_star, bounds, pcfg)?;
    let j_star_star = analyzer.analyze(&beta_star)?.j_star;
    Ok(BoundReport {
        theta_star,
        beta_star,
        j_star_star,
        gamma_lower: gamma_lower_bound(j_star_star)?,
        iterations: res.iterations,
        converged: res.converged,
    })
}

/// Starting points `{-5, 0, 5}³` used for multi-start runs.
pub fn lattice_starts() -> Vec<ThetaParams> {
    let vals = [-5.0, 0.0, 5.0];
    let mut out = Vec::with_capacity(27);
    for a in vals {
        for b in vals {
            for c in vals {
                out.push(ThetaParams([a, b, c]));
            }
        }
    }
    out
}

/// Runs [`procedure_lbf`] from every start (in parallel) and keeps the best
/// report; ties go to the earliest start.
pub fn procedure_lbf_multistart(
    hv: &HvParams,
    bounds: &GainBounds,
    cfg: &SimplexConfig,
    pcfg: &ParamConfig,
    starts: &[ThetaParams],
) -> Result<BoundReport> {
    if starts.is_empty() {
        return Err(Error::InvalidParams("no starting points".into()));
    }
    let reports: Vec<Result<BoundReport>> = starts
        .par_iter()
        .map(|t| procedure_lbf(hv, bounds, cfg, pcfg, t))
        .collect();
    let mut best: Option<BoundReport> = None;
    for r in reports {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.j_star_star > b.j_star_star) {
            best = Some(r);
        }
    }
    Ok(best.expect("nonempty starts"))
}
