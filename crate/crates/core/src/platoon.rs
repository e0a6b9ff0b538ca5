//! Whole-ring analysis: eigenmodes, string-stability verdicts, time-domain
//! simulation and the window-norm placement measure χ.
//!
//! Vehicle `j` follows vehicle `j + 1`; indices are 1-based and wrap modulo `n`.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hinf::{hinf_norm, FactorProduct, DEFAULT_PEAK_TOL};
use crate::model::{AvGains, Factor, HvParams};

/// Residual bound for accepted eigenmodes.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
/// Real parts above this count as unstable.
pub const UNSTABLE_TOL: f64 = 1e-6;
/// Default integration step (s).
pub const DEFAULT_DT: f64 = 0.01;

const MAX_SWEEPS: usize = 500;
/// A root this close (relative) to a zero or pole of a factor is scored by
/// its Newton step.
const SINGULAR_PROXIMITY: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PlatoonConfig {
    pub n: usize,
    /// 1-based positions of the AVs.
    pub av_indices: BTreeSet<usize>,
    pub hv: HvParams,
    pub av: AvGains,
}

impl PlatoonConfig {
    /// `m = 0` (pure human ring) and `m = n` are accepted so the spectra of the
    /// homogeneous rings can be computed too.
    pub fn new(
        n: usize,
        av_indices: impl IntoIterator<Item = usize>,
        hv: HvParams,
        av: AvGains,
    ) -> Result<Self> {
        let av_indices: BTreeSet<usize> = av_indices.into_iter().collect();
        if n < 2 {
            return Err(Error::InvalidParams(format!(
                "ring needs at least 2 vehicles, got {n}"
            )));
        }
        if let Some(&bad) = av_indices.iter().find(|&&i| i == 0 || i > n) {
            return Err(Error::InvalidParams(format!(
                "AV index {bad} outside 1..={n}"
            )));
        }
        if !av.factor().is_finite() || !av.factor().is_hurwitz() {
            return Err(Error::InvalidParams(format!(
                "AV gains {:?} are not Hurwitz",
                av.as_array()
            )));
        }
        Ok(Self {
            n,
            av_indices,
            hv,
            av,
        })
    }

    pub fn m(&self) -> usize {
        self.av_indices.len()
    }

    pub fn n_hv(&self) -> usize {
        self.n - self.m()
    }

    /// Penetration rate `m / n`.
    pub fn gamma(&self) -> f64 {
        self.m() as f64 / self.n as f64
    }

    pub fn is_av(&self, index: usize) -> bool {
        self.av_indices.contains(&index)
    }

    fn factor_of(&self, index: usize) -> &Factor {
        if self.is_av(index) {
            self.av.factor()
        } else {
            self.hv.factor()
        }
    }
}

// ---------------------------------------------------------------------------
// eigenmodes

#[derive(Debug, Clone, PartialEq)]
pub struct EigenmodeSet {
    /// All `2n` roots, sorted by real then imaginary part.
    pub roots: Vec<Complex64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub max_real_part: f64,
}

impl EigenmodeSet {
    pub fn unstable_count(&self, tol: f64) -> usize {
        self.roots.iter().filter(|z| z.re > tol).count()
    }
}

/// Definition of string stability: no eigenmode to the right of `tol`.
pub fn string_stable(modes: &EigenmodeSet, tol: f64) -> bool {
    modes.max_real_part <= tol
}

/// Characteristic function `(den_α)^h (den_β)^a − (num_α)^h (num_β)^a`
/// evaluated in factored logarithmic form.
struct Characteristic {
    hv: Factor,
    h: f64,
    av: Factor,
    a: f64,
}

struct Eval {
    /// `ln(F^h G^a)`.
    ln_ratio: Complex64,
    /// `P / P'` (zero when `z` is a root to working precision).
    newton: Complex64,
    near_singular: bool,
}

impl Characteristic {
    fn new(cfg: &PlatoonConfig) -> Self {
        Self {
            hv: *cfg.hv.factor(),
            h: cfg.n_hv() as f64,
            av: *cfg.av.factor(),
            a: cfg.m() as f64,
        }
    }

    fn terms(&self) -> impl Iterator<Item = (&Factor, f64)> {
        [(&self.hv, self.h), (&self.av, self.a)]
            .into_iter()
            .filter(|(_, e)| *e > 0.0)
    }

    fn eval(&self, z: Complex64) -> Eval {
        let mut ln_ratio = Complex64::new(0.0, 0.0);
        // d/dz ln(den^e) summed, and d/dz ln(F^h G^a)
        let mut dlog_den = Complex64::new(0.0, 0.0);
        let mut dlog_ratio = Complex64::new(0.0, 0.0);
        let mut near_singular = false;
        for (f, e) in self.terms() {
            let mut num = f.numerator(z);
            let den = f.denominator(z);
            let r = z.norm();
            if den.norm() <= SINGULAR_PROXIMITY * (r * r + f.k2 * r + f.k1)
                || num.norm() <= SINGULAR_PROXIMITY * (f.k3 * r + f.k1)
            {
                near_singular = true;
            }
            if num == Complex64::new(0.0, 0.0) {
                // rounding-level stand-in; keeps R·(num'/num) finite
                num = Complex64::new(f64::EPSILON * f.k1, 0.0);
            }
            let dnum = Complex64::new(f.k3, 0.0);
            let dden = 2.0 * z + f.k2;
            ln_ratio += e * (num.ln() - den.ln());
            dlog_den += e * dden / den;
            dlog_ratio += e * (dnum / num - dden / den);
        }
        // P = den^h... (1 − R), R = exp(ln_ratio)
        // P'/P = dlog_den − R/(1−R) · dlog_ratio
        let r_over = if ln_ratio.re < 0.0 {
            let r = ln_ratio.exp();
            r / (1.0 - r)
        } else {
            1.0 / ((-ln_ratio).exp() - 1.0)
        };
        let dlog = dlog_den - r_over * dlog_ratio;
        let newton = if dlog.is_finite() && dlog.norm() > 0.0 {
            1.0 / dlog
        } else {
            Complex64::new(0.0, 0.0)
        };
        Eval {
            ln_ratio,
            newton,
            near_singular,
        }
    }

    /// `|F^h G^a − 1|`, or the relative Newton step when `z` sits on a zero or
    /// pole of a factor to working precision (where the normalized form cannot
    /// be evaluated).
    fn residual(&self, z: Complex64) -> f64 {
        let ev = self.eval(z);
        if ev.near_singular {
            return ev.newton.norm() / z.norm().max(1.0);
        }
        let mut l = ev.ln_ratio;
        l.im -= TAU * (l.im / TAU).round();
        if l.norm() < 1e-3 {
            (l * (1.0 + l * (0.5 + l / 6.0))).norm()
        } else {
            (l.exp() - 1.0).norm()
        }
    }
}

/// Seeds: exact roots of the ring with averaged parameters, where
/// `F̄(s)^n = 1` splits into `n` quadratics `den = w·num`, `w^n = 1`.
fn seeds(cfg: &PlatoonConfig) -> Vec<Complex64> {
    let n = cfg.n as f64;
    let (h, a) = (cfg.n_hv() as f64 / n, cfg.m() as f64 / n);
    let (fa, fb) = (cfg.hv.factor(), cfg.av.factor());
    let p1 = h * fa.k1 + a * fb.k1;
    let p2 = h * fa.k2 + a * fb.k2;
    let p3 = h * fa.k3 + a * fb.k3;
    let mut out = Vec::with_capacity(2 * cfg.n);
    for k in 0..cfg.n {
        let w = Complex64::from_polar(1.0, TAU * k as f64 / n);
        let b = p2 - p3 * w;
        let c = p1 * (1.0 - w);
        let disc = (b * b - 4.0 * c).sqrt();
        out.push((-b + disc) / 2.0);
        out.push((-b - disc) / 2.0);
    }
    for (j, z) in out.iter_mut().enumerate() {
        *z += Complex64::from_polar(1e-3, j as f64);
    }
    out
}

/// All `2n` roots of the ring characteristic equation by Aberth–Ehrlich
/// simultaneous iteration on the unexpanded product form.
pub fn eigenmodes(cfg: &PlatoonConfig, tol: f64) -> Result<EigenmodeSet> {
    if !cfg.hv.factor().is_hurwitz() || !cfg.av.factor().is_hurwitz() {
        return Err(Error::InvalidParams("factors must be Hurwitz".into()));
    }
    let ch = Characteristic::new(cfg);
    let mut z = seeds(cfg);
    let deg = z.len();
    let mut frozen = vec![false; deg];
    for _ in 0..MAX_SWEEPS {
        let mut moving = false;
        for i in 0..deg {
            if frozen[i] {
                continue;
            }
            let newton = ch.eval(z[i]).newton;
            let repulsion: Complex64 = (0..deg)
                .filter(|&j| j != i)
                .map(|j| 1.0 / (z[i] - z[j]))
                .sum();
            let step = newton / (1.0 - newton * repulsion);
            if !step.is_finite() {
                frozen[i] = true;
                continue;
            }
            z[i] -= step;
            if step.norm() <= 4.0 * f64::EPSILON * z[i].norm().max(1.0) {
                frozen[i] = true;
            } else {
                moving = true;
            }
        }
        if !moving {
            break;
        }
    }
    z.sort_by(|p, q| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)));
    let residuals: Vec<f64> = z.iter().map(|&s| ch.residual(s)).collect();
    let bad: Vec<usize> = residuals
        .iter()
        .enumerate()
        .filter(|(_, r)| !(**r <= tol))
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Error::Convergence { indices: bad });
    }
    Ok(EigenmodeSet {
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        max_real_part: z.iter().map(|s| s.re).fold(f64::NEG_INFINITY, f64::max),
        roots: z,
        residuals,
    })
}

// ---------------------------------------------------------------------------
// simulation

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: Vec<f64>,
    /// `y[j][k]`: position deviation of vehicle `j + 1` at `t[k]`.
    pub y: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

impl TrajectoryRecord {
    /// `max_j |y_j(t_k) − offset|`.
    pub fn sup_deviation(&self, k: usize, offset: f64) -> f64 {
        self.y
            .iter()
            .map(|y| (y[k] - offset).abs())
            .fold(0.0, f64::max)
    }
}

/// Coefficient arrays `(c1, c2, c3)` per vehicle (0-based).
fn coefficients(cfg: &PlatoonConfig) -> Vec<Factor> {
    (1..=cfg.n).map(|j| *cfg.factor_of(j)).collect()
}

/// Common position offset the ring settles to: the motion conserves
/// `Σ u_j/c1_j + Σ y_j (c2_j/c1_j − c3_{j−1}/c1_{j−1})`.
pub fn asymptotic_offset(cfg: &PlatoonConfig, initial: &[(f64, f64)]) -> Result<f64> {
    check_initial(cfg, initial)?;
    let c = coefficients(cfg);
    let n = cfg.n;
    let mut q = 0.0;
    let mut w = 0.0;
    for j in 0..n {
        let prev = &c[(j + n - 1) % n];
        let (y, u) = initial[j];
        q += u / c[j].k1 + y * (c[j].k2 / c[j].k1 - prev.k3 / prev.k1);
        w += (c[j].k2 - c[j].k3) / c[j].k1;
    }
    Ok(q / w)
}

fn check_initial(cfg: &PlatoonConfig, initial: &[(f64, f64)]) -> Result<()> {
    if initial.len() != cfg.n {
        return Err(Error::InvalidParams(format!(
            "initial state has {} vehicles, ring has {}",
            initial.len(),
            cfg.n
        )));
    }
    Ok(())
}

fn derivative(c: &[Factor], y: &[f64], u: &[f64], dy: &mut [f64], du: &mut [f64]) {
    let n = c.len();
    for j in 0..n {
        let next = (j + 1) % n;
        dy[j] = u[j];
        du[j] = c[j].k1 * (y[next] - y[j]) - c[j].k2 * u[j] + c[j].k3 * u[next];
    }
}

/// Fixed-step RK4 of the linearized ring, recording every step.
pub fn simulate(
    cfg: &PlatoonConfig,
    initial: &[(f64, f64)],
    horizon: f64,
    dt: f64,
) -> Result<TrajectoryRecord> {
    simulate_strided(cfg, initial, horizon, dt, 1)
}

/// As [`simulate`], recording every `stride`-th step (plus the initial state).
pub fn simulate_strided(
    cfg: &PlatoonConfig,
    initial: &[(f64, f64)],
    horizon: f64,
    dt: f64,
    stride: usize,
) -> Result<TrajectoryRecord> {
    check_initial(cfg, initial)?;
    if !(dt > 0.0) || !dt.is_finite() || !(horizon >= dt) || !horizon.is_finite() {
        return Err(Error::InvalidParams(format!(
            "need dt > 0 and horizon >= dt, got dt = {dt}, horizon = {horizon}"
        )));
    }
    if stride == 0 {
        return Err(Error::InvalidParams(
            "record stride must be positive".into(),
        ));
    }
    let c = coefficients(cfg);
    let n = cfg.n;
    let steps = (horizon / dt).round() as usize;
    let mut y: Vec<f64> = initial.iter().map(|s| s.0).collect();
    let mut u: Vec<f64> = initial.iter().map(|s| s.1).collect();
    if y.iter().chain(&u).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { step: 0 });
    }

    let cap = steps / stride + 1;
    let mut rec = TrajectoryRecord {
        t: Vec::with_capacity(cap),
        y: vec![Vec::with_capacity(cap); n],
        u: vec![Vec::with_capacity(cap); n],
    };
    let push = |rec: &mut TrajectoryRecord, t: f64, y: &[f64], u: &[f64]| {
        rec.t.push(t);
        for j in 0..n {
            rec.y[j].push(y[j]);
            rec.u[j].push(u[j]);
        }
    };
    push(&mut rec, 0.0, &y, &u);

    let mut k = [(); 4].map(|_| (vec![0.0; n], vec![0.0; n]));
    let (mut ys, mut us) = (vec![0.0; n], vec![0.0; n]);
    for step in 1..=steps {
        for stage in 0..4 {
            let scale = match stage {
                0 => 0.0,
                3 => dt,
                _ => 0.5 * dt,
            };
            if stage == 0 {
                ys.copy_from_slice(&y);
                us.copy_from_slice(&u);
            } else {
                let (py, pu) = &k[stage - 1];
                for j in 0..n {
                    ys[j] = y[j] + scale * py[j];
                    us[j] = u[j] + scale * pu[j];
                }
            }
            let (dy, du) = &mut k[stage];
            derivative(&c, &ys, &us, dy, du);
        }
        for j in 0..n {
            y[j] += dt / 6.0 * (k[0].0[j] + 2.0 * k[1].0[j] + 2.0 * k[2].0[j] + k[3].0[j]);
            u[j] += dt / 6.0 * (k[0].1[j] + 2.0 * k[1].1[j] + 2.0 * k[2].1[j] + k[3].1[j]);
        }
        if y.iter().chain(&u).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step });
        }
        if step % stride == 0 {
            push(&mut rec, step as f64 * dt, &y, &u);
        }
    }
    Ok(rec)
}

// ---------------------------------------------------------------------------
// placement measure

/// `‖F^h G^a‖∞` for every window shape a ring of size `n` with at most
/// `max_a` AVs can produce.
#[derive(Debug, Clone)]
pub struct WindowNorms {
    n: usize,
    norms: HashMap<(usize, usize), f64>,
}

impl WindowNorms {
    pub fn new(n: usize, max_a: usize, hv: &HvParams, av: &AvGains) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = (2..n)
            .flat_map(|len| (0..=max_a.min(len)).map(move |a| (len - a, a)))
            .collect();
        let norms = pairs
            .par_iter()
            .map(|&(h, a)| {
                let p = FactorProduct::new(hv, h as u64, av, a as u64)?;
                Ok(((h, a), hinf_norm(&p, DEFAULT_PEAK_TOL)))
            })
            .collect::<Result<HashMap<_, _>>>()?;
        Ok(Self { n, norms })
    }

    pub fn get(&self, h: usize, a: usize) -> f64 {
        self.norms[&(h, a)]
    }

    /// χ of an AV set (1-based indices).
    pub fn chi(&self, av_indices: &BTreeSet<usize>) -> f64 {
        let n = self.n;
        let mut is_av = vec![0usize; 2 * n];
        for &i in av_indices {
            is_av[i - 1] = 1;
            is_av[i - 1 + n] = 1;
        }
        let mut prefix = vec![0usize; 2 * n + 1];
        for k in 0..2 * n {
            prefix[k + 1] = prefix[k] + is_av[k];
        }
        let mut total = 0.0;
        for len in 2..n {
            for start in 0..n {
                let a = prefix[start + len] - prefix[start];
                total += self.get(len - a, a);
            }
        }
        total
    }
}

fn check_chi(cfg: &PlatoonConfig) -> Result<()> {
    if cfg.n < 3 {
        return Err(Error::InvalidParams(format!(
            "χ needs n >= 3, got {}",
            cfg.n
        )));
    }
    Ok(())
}

/// `χ = Σ_{j=2}^{n−1} Σ_{i=1}^{n} ‖T_i T_{i+1} ⋯ T_{i+j−1}‖∞`.
pub fn chi(cfg: &PlatoonConfig) -> Result<f64> {
    check_chi(cfg)?;
    let table = WindowNorms::new(cfg.n, cfg.m(), &cfg.hv, &cfg.av)?;
    Ok(table.chi(&cfg.av_indices))
}

/// The rotation of `set` containing 1 whose sorted index list is smallest.
pub fn canonical_rotation(n: usize, set: &BTreeSet<usize>) -> BTreeSet<usize> {
    set.iter()
        .map(|&pivot| {
            set.iter()
                .map(|&i| (i + n - pivot) % n + 1)
                .collect::<BTreeSet<usize>>()
        })
        .min_by(|a, b| a.iter().cmp(b.iter()))
        .unwrap_or_default()
}

/// Relative gap below which two χ values are treated as equal.
const CHI_TIE: f64 = 1e-12;

/// Sequential-insertion greedy minimization of χ; ties go to the lowest
/// index. Returned in canonical rotation.
pub fn greedy_placement(
    n: usize,
    m: usize,
    hv: &HvParams,
    av: &AvGains,
) -> Result<BTreeSet<usize>> {
    if m == 0 || m >= n || n < 3 {
        return Err(Error::InvalidParams(format!(
            "greedy placement needs 1 <= m < n and n >= 3, got m = {m}, n = {n}"
        )));
    }
    let table = WindowNorms::new(n, m, hv, av)?;
    let mut set = BTreeSet::new();
    for _ in 0..m {
        let scored: Vec<(usize, f64)> = (1..=n)
            .into_par_iter()
            .filter(|i| !set.contains(i))
            .map(|i| {
                let mut trial = set.clone();
                trial.insert(i);
                (i, table.chi(&trial))
            })
            .collect();
        let mut best = scored[0];
        for &(i, v) in &scored[1..] {
            if v < best.1 - CHI_TIE * best.1.abs() {
                best = (i, v);
            }
        }
        set.insert(best.0);
    }
    Ok(canonical_rotation(n, &set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn worst_case_hv() -> HvParams {
        HvParams::new(0.3 * PI, 1.5, 0.9).unwrap()
    }

    fn ring(n: usize, avs: &[usize], av: AvGains) -> PlatoonConfig {
        PlatoonConfig::new(n, avs.iter().copied(), worst_case_hv(), av).unwrap()
    }

    fn any_av() -> AvGains {
        AvGains::new(0.8, 2.0, 0.8)
    }

    #[test]
    fn config_validation() {
        assert!(PlatoonConfig::new(1, [], worst_case_hv(), any_av()).is_err());
        assert!(PlatoonConfig::new(4, [0], worst_case_hv(), any_av()).is_err());
        assert!(PlatoonConfig::new(4, [5], worst_case_hv(), any_av()).is_err());
        let c = PlatoonConfig::new(4, [2, 2, 3], worst_case_hv(), any_av()).unwrap();
        assert_eq!(c.m(), 2);
        assert_eq!(c.n_hv(), 2);
        assert_eq!(c.gamma(), 0.5);
    }

    #[test]
    fn two_vehicle_closed_form() {
        let modes = eigenmodes(&ring(2, &[], any_av()), DEFAULT_RESIDUAL_TOL).unwrap();
        let (a1, a2, a3) = (0.3 * PI, 1.5, 0.9);
        // F = 1: s (s + a2 − a3) = 0; F = −1: s² + (a2 + a3) s + 2 a1 = 0
        let im = (8.0 * a1 - (a2 + a3) * (a2 + a3)).sqrt() / 2.0;
        let mut expect = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(-(a2 - a3), 0.0),
            Complex64::new(-(a2 + a3) / 2.0, im),
            Complex64::new(-(a2 + a3) / 2.0, -im),
        ];
        assert!((im - 0.66705).abs() < 1e-5);
        for z in &modes.roots {
            let (k, d) = expect
                .iter()
                .enumerate()
                .map(|(k, e)| (k, (e - z).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d < 1e-10, "{z} unmatched");
            expect.remove(k);
        }
        assert!(expect.is_empty());
    }

    #[test]
    fn origin_is_always_a_root() {
        for (n, avs) in [
            (3, vec![1]),
            (7, vec![2, 5]),
            (10, vec![]),
            (6, vec![1, 2, 3]),
        ] {
            let modes = eigenmodes(&ring(n, &avs, AvGains::new(0.3, 1.1, 0.4)), 1e-8).unwrap();
            assert_eq!(modes.roots.len(), 2 * n);
            let near = modes.roots.iter().filter(|z| z.norm() < 1e-8).count();
            assert_eq!(near, 1);
        }
    }

    #[test]
    fn roots_come_in_conjugate_pairs() {
        let modes = eigenmodes(&ring(9, &[3], AvGains::new(0.5, 1.7, 0.2)), 1e-8).unwrap();
        for z in &modes.roots {
            let d = modes
                .roots
                .iter()
                .map(|w| (w - z.conj()).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-8);
        }
    }

    #[test]
    fn verdicts() {
        let all_left = EigenmodeSet {
            roots: vec![Complex64::new(-1.0, 0.0); 4],
            residuals: vec![0.0; 4],
            max_residual: 0.0,
            max_real_part: -1.0,
        };
        assert!(string_stable(&all_left, UNSTABLE_TOL));
        assert_eq!(all_left.unstable_count(UNSTABLE_TOL), 0);

        let unstable = eigenmodes(&ring(40, &[], any_av()), 1e-8).unwrap();
        assert!(!string_stable(&unstable, UNSTABLE_TOL));
        assert!(unstable.unstable_count(UNSTABLE_TOL) > 0);
        assert_eq!(unstable.unstable_count(UNSTABLE_TOL) % 2, 0);
    }

    #[test]
    fn zero_state_stays_zero() {
        let cfg = ring(6, &[2], any_av());
        let rec = simulate(&cfg, &[(0.0, 0.0); 6], 5.0, 0.01).unwrap();
        assert_eq!(rec.t.len(), 501);
        assert!(rec.y.iter().chain(&rec.u).flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn conserved_offset_is_reached() {
        let cfg =
            PlatoonConfig::new(5, [], HvParams::new(0.5, 2.0, 1.0).unwrap(), any_av()).unwrap();
        let mut init = vec![(0.0, 0.0); 5];
        init[4] = (1.0, 0.0);
        init[1] = (0.0, 0.3);
        let target = asymptotic_offset(&cfg, &init).unwrap();
        let rec = simulate_strided(&cfg, &init, 400.0, 0.02, 100).unwrap();
        let last = rec.t.len() - 1;
        assert!(rec.sup_deviation(last, target) < 1e-8);
    }

    #[test]
    fn simulation_argument_checks() {
        let cfg = ring(4, &[1], any_av());
        assert!(simulate(&cfg, &[(0.0, 0.0); 3], 1.0, 0.1).is_err());
        assert!(simulate(&cfg, &[(0.0, 0.0); 4], 1.0, 0.0).is_err());
        assert!(simulate(&cfg, &[(0.0, 0.0); 4], 0.05, 0.1).is_err());
        let mut bad = vec![(0.0, 0.0); 4];
        bad[0].0 = f64::NAN;
        assert!(matches!(
            simulate(&cfg, &bad, 1.0, 0.1),
            Err(Error::NonFiniteState { step: 0 })
        ));
    }

    #[test]
    fn rk4_matches_single_mode() {
        // n = 2 ring, F = −1 branch excited antisymmetrically: y1 = −y2
        let cfg = ring(2, &[], any_av());
        let rec = simulate(&cfg, &[(1.0, 0.0), (-1.0, 0.0)], 3.0, 0.001).unwrap();
        let (a1, a2, a3) = (0.3 * PI, 1.5, 0.9);
        // y'' + (a2 + a3) y' + 2 a1 y = 0, y(0) = 1, y'(0) = 0
        let sigma = -(a2 + a3) / 2.0;
        let wd = (2.0 * a1 - sigma * sigma).sqrt();
        let exact = |t: f64| (sigma * t).exp() * ((wd * t).cos() - sigma / wd * (wd * t).sin());
        for k in (0..rec.t.len()).step_by(250) {
            assert!((rec.y[0][k] - exact(rec.t[k])).abs() < 1e-10);
            assert!((rec.y[1][k] + exact(rec.t[k])).abs() < 1e-10);
        }
    }

    #[test]
    fn chi_of_human_ring() {
        let hv = worst_case_hv();
        let cfg = ring(4, &[], any_av());
        let f = hinf_norm(&FactorProduct::new(&hv, 1, &any_av(), 0).unwrap(), 1e-12);
        let expect = 4.0 * (f.powi(2) + f.powi(3));
        let got = chi(&cfg).unwrap();
        assert!((got - expect).abs() / expect < 1e-9);
    }

    #[test]
    fn chi_rotation_invariant() {
        let hv = worst_case_hv();
        let av = any_av();
        let table = WindowNorms::new(11, 3, &hv, &av).unwrap();
        let base: BTreeSet<usize> = [1, 4, 5].into();
        let v0 = table.chi(&base);
        for shift in 1..11 {
            let rot: BTreeSet<usize> = base.iter().map(|i| (i - 1 + shift) % 11 + 1).collect();
            assert!((table.chi(&rot) - v0).abs() <= 1e-12 * v0);
        }
    }

    #[test]
    fn chi_needs_three() {
        assert!(chi(&ring(2, &[1], any_av())).is_err());
    }

    #[test]
    fn canonical_rotation_examples() {
        let s: BTreeSet<usize> = [3, 7].into();
        assert_eq!(canonical_rotation(8, &s), [1, 5].into());
        let s: BTreeSet<usize> = [1, 9, 17, 21, 25].into();
        assert_eq!(canonical_rotation(32, &s), [1, 5, 9, 17, 25].into());
    }

    #[test]
    fn greedy_single_av_is_one() {
        for n in [3, 8, 13] {
            assert_eq!(
                greedy_placement(n, 1, &worst_case_hv(), &any_av()).unwrap(),
                [1].into()
            );
        }
    }

    #[test]
    fn greedy_small_ring_is_exhaustive_optimum() {
        let (hv, av) = (worst_case_hv(), any_av());
        let got = greedy_placement(4, 2, &hv, &av).unwrap();
        let table = WindowNorms::new(4, 2, &hv, &av).unwrap();
        let best = (1..=4)
            .flat_map(|i| (i + 1..=4).map(move |j| BTreeSet::from([i, j])))
            .map(|s| table.chi(&s))
            .fold(f64::INFINITY, f64::min);
        assert!(table.chi(&got) <= best * (1.0 + 1e-12));
    }

    #[test]
    fn greedy_preconditions() {
        assert!(greedy_placement(5, 0, &worst_case_hv(), &any_av()).is_err());
        assert!(greedy_placement(5, 5, &worst_case_hv(), &any_av()).is_err());
    }
}
