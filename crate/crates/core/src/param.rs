//! Parameterizations of the admissible AV gain set.
//!
//! Three nested maps turn unconstrained coordinates into gains that satisfy
//! the rational driving constraints, `Δβ >= 0`, and the box bounds at once:
//!
//! * `(p, q, r)` with `p, q > 0`, `r >= 0` covers RDC ∩ {Δβ >= 0}:
//!   `b3 = p`, `b2 = p + q`, `b1 = pq + q²/2 - r`, so that `Δβ = 2r`.
//! * `(ψ1, ψ2, ψ3) ∈ [0, 1]³` interpolates each of `p`, `q`, `r` between
//!   bounds that depend on the earlier coordinates, adding the box.
//! * `(θ1, θ2, θ3) ∈ ℝ³` is pushed through a sigmoid to get `ψ`.

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::model::{AvGains, GainBounds};

const ROUNDING_ULPS: f64 = 8.0;

fn rounding_slack(scale: f64) -> f64 {
    ROUNDING_ULPS * f64::EPSILON * scale.abs().max(f64::MIN_POSITIVE)
}

/// `sqrt(arg)`, treating arguments that are negative only by rounding as zero.
fn clipped_sqrt(arg: f64, scale: f64) -> Option<f64> {
    if arg >= 0.0 {
        Some(arg.sqrt())
    } else if arg >= -rounding_slack(scale) {
        Some(0.0)
    } else {
        None
    }
}

/// Resolve `lo <= hi` up to rounding relative to `scale`; `None` if genuinely
/// violated. A rounding-level inversion collapses onto `lo`, which keeps the
/// hard lower limits (`r >= 0`, `p >= ε`) intact.
fn ordered(lo: f64, hi: f64, scale: f64) -> Option<(f64, f64)> {
    if lo <= hi {
        Some((lo, hi))
    } else if lo - hi <= rounding_slack(scale.abs().max(lo.abs()).max(hi.abs())) {
        Some((lo, lo))
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PqrParams {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl PqrParams {
    pub fn new(p: f64, q: f64, r: f64) -> Result<Self> {
        if !(p > 0.0 && q > 0.0 && r >= 0.0) || !(p.is_finite() && q.is_finite() && r.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "(p, q, r) = ({p}, {q}, {r}) needs p > 0, q > 0, r >= 0"
            )));
        }
        Ok(Self { p, q, r })
    }
}

/// `b3 = p`, `b2 = p + q`, `b1 = pq + q²/2 - r`.
pub fn beta_from_pqr(pqr: &PqrParams) -> Result<AvGains> {
    let PqrParams { p, q, r } = *pqr;
    let b1 = p * q + 0.5 * q * q - r;
    if !(b1 > 0.0) {
        return Err(Error::NonpositiveStiffness { beta1: b1 });
    }
    Ok(AvGains::new(b1, p + q, p))
}

/// Interpolation weights in the closed unit cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiParams(pub [f64; 3]);

impl PsiParams {
    pub fn new(psi1: f64, psi2: f64, psi3: f64) -> Result<Self> {
        let v = [psi1, psi2, psi3];
        if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidParams(format!(
                "psi components must lie in [0, 1], got {v:?}"
            )));
        }
        Ok(Self(v))
    }
}

/// Unconstrained optimizer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThetaParams(pub [f64; 3]);

/// Strictly increasing bijections ℝ → (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sigmoid {
    #[default]
    Logistic,
    Tanh,
    Arctan,
    Erf,
}

impl Sigmoid {
    pub fn eval(self, tau: f64, zeta: f64) -> f64 {
        let z = zeta * tau;
        match self {
            Sigmoid::Logistic => 1.0 / (1.0 + (-z).exp()),
            Sigmoid::Tanh => 0.5 * (1.0 + z.tanh()),
            Sigmoid::Arctan => 0.5 + z.atan() / std::f64::consts::PI,
            Sigmoid::Erf => 0.5 * (1.0 + erf(z)),
        }
    }
}

/// Logistic function `1 / (1 + exp(-ζ τ))`.
pub fn sigmoid(tau: f64, zeta: f64) -> f64 {
    Sigmoid::Logistic.eval(tau, zeta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamConfig {
    /// Margin standing in for the strict inequalities `p > 0`, `q > 0`.
    pub epsilon: f64,
    /// Sigmoid growth rate.
    pub zeta: f64,
    pub sigmoid: Sigmoid,
}

impl Default for ParamConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            zeta: 1.0,
            sigmoid: Sigmoid::Logistic,
        }
    }
}

impl ParamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "zeta must be positive, got {}",
                self.zeta
            )));
        }
        Ok(())
    }
}

fn infeasible(condition: impl Into<String>) -> Error {
    Error::InfeasibleBounds {
        condition: condition.into(),
    }
}

/// Necessary conditions on the box for the parameterization to be nonempty:
/// `b3u >= ε` and `b2u >= max{2ε, b3l + ε, sqrt(b3l² + 2 b1l)}`.
pub fn check_feasible(bounds: &GainBounds, epsilon: f64) -> Result<()> {
    let (l, u) = (bounds.lower, bounds.upper);
    if u.b3() < epsilon {
        return Err(infeasible(format!(
            "upper b3 = {} must be >= epsilon = {epsilon}",
            u.b3()
        )));
    }
    if u.b2() < 2.0 * epsilon {
        return Err(infeasible(format!(
            "upper b2 = {} must be >= 2 epsilon = {}",
            u.b2(),
            2.0 * epsilon
        )));
    }
    if u.b2() < l.b3() + epsilon {
        return Err(infeasible(format!(
            "upper b2 = {} must be >= lower b3 + epsilon = {}",
            u.b2(),
            l.b3() + epsilon
        )));
    }
    let need = (l.b3() * l.b3() + 2.0 * l.b1()).sqrt();
    if u.b2() < need && need - u.b2() > rounding_slack(need) {
        return Err(infeasible(format!(
            "upper b2 = {} must be >= sqrt(lower_b3^2 + 2 lower_b1) = {need}",
            u.b2()
        )));
    }
    Ok(())
}

/// Range of `p` admitted by the box.
pub fn p_range(bounds: &GainBounds, epsilon: f64) -> Result<(f64, f64)> {
    let (l, u) = (bounds.lower, bounds.upper);
    let lo = epsilon.max(l.b3());
    let b2u_sq = u.b2() * u.b2();
    let root = clipped_sqrt(b2u_sq - 2.0 * l.b1(), b2u_sq).ok_or_else(|| {
        infeasible(format!(
            "upper b2^2 - 2 lower b1 = {} is negative",
            b2u_sq - 2.0 * l.b1()
        ))
    })?;
    let hi = u.b3().min(u.b2() - epsilon).min(root);
    ordered(lo, hi, u.b2()).ok_or_else(|| infeasible(format!("p range is empty: [{lo}, {hi}]")))
}

/// Range of `q` for a given `p`.
pub fn q_range(bounds: &GainBounds, epsilon: f64, p: f64) -> Result<(f64, f64)> {
    let (l, u) = (bounds.lower, bounds.upper);
    let arg = p * p + 2.0 * l.b1();
    let lo = epsilon.max(l.b2() - p).max(arg.sqrt() - p);
    let hi = u.b2() - p;
    ordered(lo, hi, u.b2())
        .ok_or_else(|| infeasible(format!("q range is empty at p = {p}: [{lo}, {hi}]")))
}

/// Range of `r` for given `p`, `q`.
pub fn r_range(bounds: &GainBounds, p: f64, q: f64) -> Result<(f64, f64)> {
    let (l, u) = (bounds.lower, bounds.upper);
    let base = p * q + 0.5 * q * q;
    let lo = (base - u.b1()).max(0.0);
    let hi = base - l.b1();
    // q carries the cancellation error of sqrt(p² + 2 b1) − p, scaled here by p
    ordered(lo, hi, (p + q) * (p + q)).ok_or_else(|| {
        infeasible(format!(
            "r range is empty at (p, q) = ({p}, {q}): [{lo}, {hi}]"
        ))
    })
}

fn lerp(w: f64, lo: f64, hi: f64) -> f64 {
    (1.0 - w) * lo + w * hi
}

/// Box-constrained `(p, q, r)` from interpolation weights.
pub fn pqr_from_psi(psi: &PsiParams, bounds: &GainBounds, cfg: &ParamConfig) -> Result<PqrParams> {
    cfg.validate()?;
    check_feasible(bounds, cfg.epsilon)?;
    let [w1, w2, w3] = psi.0;
    let (p_lo, p_hi) = p_range(bounds, cfg.epsilon)?;
    let p = lerp(w1, p_lo, p_hi);
    let (q_lo, q_hi) = q_range(bounds, cfg.epsilon, p)?;
    let q = lerp(w2, q_lo, q_hi);
    let (r_lo, r_hi) = r_range(bounds, p, q)?;
    let r = lerp(w3, r_lo, r_hi);
    Ok(PqrParams { p, q, r })
}

/// Pull components that left the box only through rounding back onto it.
fn snap_to_box(g: AvGains, bounds: &GainBounds) -> AvGains {
    let (l, u) = (bounds.lower.as_array(), bounds.upper.as_array());
    let mut v = g.as_array();
    // b1 = pq + q²/2 − r inherits rounding on the scale of b2² = (p + q)²
    let scale = v[1] * v[1];
    for i in 0..3 {
        if v[i] < l[i] && l[i] - v[i] <= rounding_slack(l[i].max(scale)) {
            v[i] = l[i];
        } else if v[i] > u[i] && v[i] - u[i] <= rounding_slack(u[i].max(scale)) {
            v[i] = u[i];
        }
    }
    AvGains::new(v[0], v[1], v[2])
}

/// On the `r = 0` face `Δβ` is zero exactly but may evaluate a few ulps
/// negative; step the gains by ulps, inside the box, until it does not.
fn settle_delta(g: AvGains, bounds: &GainBounds) -> AvGains {
    let (l, u) = (bounds.lower.as_array(), bounds.upper.as_array());
    let [mut b1, mut b2, mut b3] = g.as_array();
    for _ in 0..64 {
        if crate::model::delta(b1, b2, b3) >= 0.0 {
            break;
        }
        // take the admissible one-ulp move that raises Δ the most
        let moves = [
            (b2.next_up() <= u[1]).then(|| 2.0 * b2 * (b2.next_up() - b2)),
            (b3.next_down() >= l[2] && b3.next_down() > 0.0)
                .then(|| 2.0 * b3 * (b3 - b3.next_down())),
            (b1.next_down() >= l[0]).then(|| 2.0 * (b1 - b1.next_down())),
        ];
        let best = moves
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.map(|g| (i, g)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((0, _)) => b2 = b2.next_up(),
            Some((1, _)) => b3 = b3.next_down(),
            Some(_) => b1 = b1.next_down(),
            None => break,
        }
    }
    AvGains::new(b1, b2, b3)
}

/// Gains for interpolation weights `ψ`.
pub fn beta_from_psi(psi: &PsiParams, bounds: &GainBounds, cfg: &ParamConfig) -> Result<AvGains> {
    let pqr = pqr_from_psi(psi, bounds, cfg)?;
    Ok(settle_delta(
        snap_to_box(beta_from_pqr(&pqr)?, bounds),
        bounds,
    ))
}

/// Weights obtained by applying the configured sigmoid to each `θ_i`.
pub fn psi_from_theta(theta: &ThetaParams, cfg: &ParamConfig) -> PsiParams {
    PsiParams(theta.0.map(|t| cfg.sigmoid.eval(t, cfg.zeta)))
}

/// Full map θ → β; the result satisfies the RDC, `Δβ >= 0`, and the box.
pub fn beta_from_theta(
    theta: &ThetaParams,
    bounds: &GainBounds,
    cfg: &ParamConfig,
) -> Result<AvGains> {
    beta_from_psi(&psi_from_theta(theta, cfg), bounds, cfg)
}
