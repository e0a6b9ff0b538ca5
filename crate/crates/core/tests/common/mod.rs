//! Independent reference computations shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeSet;

use dashu_float::FBig;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::Rng;

use ringstab::{AvGains, FactorProduct, GainBounds, HvParams, ParamConfig, ThetaParams};

/// Working precision (bits) of the refinement step.
const PRECISION: usize = 320;

type Real = FBig;

fn real(x: f64) -> Real {
    Real::try_from(x).unwrap().with_precision(PRECISION).value()
}

fn to_f64(x: &Real) -> f64 {
    x.to_f64().value()
}

/// Multi-precision complex number for the refinement step.
#[derive(Debug, Clone)]
struct Mc {
    re: Real,
    im: Real,
}

impl Mc {
    fn new(re: f64, im: f64) -> Self {
        Self {
            re: real(re),
            im: real(im),
        }
    }
    fn add(&self, o: &Mc) -> Mc {
        Mc {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }
    fn sub(&self, o: &Mc) -> Mc {
        Mc {
            re: &self.re - &o.re,
            im: &self.im - &o.im,
        }
    }
    fn mul(&self, o: &Mc) -> Mc {
        Mc {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
    fn inv(&self) -> Mc {
        let d = &self.re * &self.re + &self.im * &self.im;
        Mc {
            re: &self.re / &d,
            im: -(&self.im / &d),
        }
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(to_f64(&self.re), to_f64(&self.im))
    }
}

/// Coefficients, lowest degree first, held exactly up to [`PRECISION`] bits.
pub type Poly = Vec<Real>;

fn mul(a: &[Real], b: &[Real]) -> Poly {
    let mut out = vec![real(0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = &out[i + j] + x * y;
        }
    }
    out
}

fn pow(p: &[Real], e: usize) -> Poly {
    (0..e).fold(vec![real(1.0)], |acc, _| mul(&acc, p))
}

/// Expanded `(s² + a2 s + a1)^h (s² + b2 s + b1)^m − (a3 s + a1)^h (b3 s + b1)^m`.
pub fn characteristic_poly(a: [f64; 3], h: usize, b: [f64; 3], m: usize) -> Poly {
    let t = |v: &[f64]| v.iter().map(|&x| real(x)).collect::<Vec<_>>();
    let den = mul(
        &pow(&t(&[a[0], a[1], 1.0]), h),
        &pow(&t(&[b[0], b[1], 1.0]), m),
    );
    let num = mul(&pow(&t(&[a[0], a[2]]), h), &pow(&t(&[b[0], b[2]]), m));
    let mut p = den;
    for (i, c) in num.iter().enumerate() {
        p[i] = &p[i] - c;
    }
    p
}

fn horner(p: &[Real], z: &Mc) -> (Mc, Mc) {
    let mut v = Mc::new(0.0, 0.0);
    let mut d = Mc::new(0.0, 0.0);
    for c in p.iter().rev() {
        d = d.mul(z).add(&v);
        v = v.mul(z);
        v.re = &v.re + c;
    }
    (v, d)
}

/// Roots of a polynomial: eigenvalues of its companion matrix, refined by
/// simultaneous (Aberth) iteration in multi-precision arithmetic. Double
/// precision cannot separate the tight clusters that near pole–zero
/// cancellations in a factor produce.
pub fn companion_roots(p: &[Real]) -> Vec<Complex64> {
    let deg = p.len() - 1;
    let coef: Vec<f64> = p.iter().map(to_f64).collect();
    let mut c = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        c[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        c[(i, deg - 1)] = -coef[i] / coef[deg];
    }
    let mut z: Vec<Mc> = c
        .complex_eigenvalues()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let kick = Complex64::from_polar(1e-9, k as f64);
            Mc::new(e.re + kick.re, e.im + kick.im)
        })
        .collect();
    let mut done = vec![false; deg];
    for _ in 0..500 {
        for i in 0..deg {
            if done[i] {
                continue;
            }
            let (v, d) = horner(p, &z[i]);
            let newton = v.mul(&d.inv());
            let mut rep = Mc::new(0.0, 0.0);
            for j in 0..deg {
                if j != i {
                    rep = rep.add(&z[i].sub(&z[j]).inv());
                }
            }
            let step = newton.mul(&Mc::new(1.0, 0.0).sub(&newton.mul(&rep)).inv());
            z[i] = z[i].sub(&step);
            let s = step.to_c64().norm();
            done[i] = s <= 1e-40 * z[i].to_c64().norm().max(1e-30);
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    z.iter().map(Mc::to_c64).collect()
}

/// Greedy nearest pairing; returns the largest pair distance.
pub fn pair_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut pool = b.to_vec();
    let mut worst: f64 = 0.0;
    for z in a {
        let (k, d) = pool
            .iter()
            .enumerate()
            .map(|(k, w)| (k, (w - z).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        worst = worst.max(d);
        pool.swap_remove(k);
    }
    worst
}

/// `ln |T(iω)|`; `num − den = −x (Δ + x)` exactly, which keeps the small-ω
/// end free of cancellation.
pub fn log_mag(k: [f64; 3], w: f64) -> f64 {
    let x = w * w;
    let den = k[1] * k[1] * x + (x - k[0]) * (x - k[0]);
    let delta = -2.0 * k[0] + k[1] * k[1] - k[2] * k[2];
    0.5 * (-x * (delta + x) / den).ln_1p()
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut best = f64::INFINITY;
    for _ in 0..200 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        let (f1, f2) = (f(x1), f(x2));
        best = best.min(f1).min(f2);
        if f1 < f2 {
            hi = x2;
        } else {
            lo = x1;
        }
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    best
}

/// Infimum of `−D_β/D_α` over the unstable band by a dense grid plus the
/// low-frequency limit from a Taylor expansion of both magnitudes.
pub fn j_star_grid(a: [f64; 3], b: [f64; 3], points: usize) -> f64 {
    let delta = |k: [f64; 3]| -2.0 * k[0] + k[1] * k[1] - k[2] * k[2];
    let top = (-delta(a)).sqrt();
    // |T|² = 1 − Δ x / k1² + O(x²)
    let limit = (a[0] * a[0] / -delta(a)) * (delta(b) / (b[0] * b[0]));
    let j = |w: f64| -log_mag(b, w) / log_mag(a, w);
    let half = points / 2;
    let mut grid: Vec<f64> = (1..half).map(|k| top * k as f64 / half as f64).collect();
    grid.extend((0..half).map(|k| top * 10f64.powf(-4.0 + 4.0 * k as f64 / half as f64)));
    grid.retain(|&w| w > 0.0 && w < top);
    grid.sort_by(f64::total_cmp);
    let (i, best) = grid
        .iter()
        .enumerate()
        .map(|(i, &w)| (i, j(w)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap();
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    limit.min(best).min(golden_min(j, lo, hi))
}

/// `χ` by direct enumeration of every window, one peak-gain call per window.
pub fn chi_direct(n: usize, avs: &BTreeSet<usize>, hv: &HvParams, av: &AvGains) -> f64 {
    let mut total = 0.0;
    for len in 2..n {
        for i in 1..=n {
            let a = (0..len)
                .filter(|k| avs.contains(&((i - 1 + k) % n + 1)))
                .count();
            let p = FactorProduct::new(hv, (len - a) as u64, av, a as u64).unwrap();
            total += ringstab::hinf_norm(&p, 1e-10);
        }
    }
    total
}

pub fn random_hv(rng: &mut StdRng, worst_case: bool) -> HvParams {
    loop {
        let a1 = rng.random_range(0.2..1.5);
        let a3 = rng.random_range(0.2..1.2);
        let a2 = a3 + rng.random_range(0.05..1.5);
        if let Ok(hv) = HvParams::new(a1, a2, a3) {
            if !worst_case || hv.is_worst_case() {
                return hv;
            }
        }
    }
}

/// Random admissible gains inside `bounds`.
pub fn random_beta(rng: &mut StdRng, bounds: &GainBounds) -> AvGains {
    let theta = ThetaParams([
        rng.random_range(-6.0..6.0),
        rng.random_range(-6.0..6.0),
        rng.random_range(-6.0..6.0),
    ]);
    ringstab::beta_from_theta(&theta, bounds, &ParamConfig::default()).unwrap()
}
