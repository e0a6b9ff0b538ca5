//! Margin functional `J(ω; β) = -D_β(ω) / D_α(ω)` on the HV unstable band,
//! its infimum `J*(β)`, and the penetration-rate / fleet-size bounds it implies.
//!
//! `J*` is the smaller of the `ω -> 0⁺` limit `a1² / (-Δα) · Δβ / b1²` and the
//! values of `J` at its interior local minima. Interior minima are located by
//! bracketing sign changes of `dJ/dω` on a fixed grid and bisecting.

use crate::error::{Error, Result};
use crate::model::{AvGains, HvParams};

/// Total grid size used to bracket critical points of `J`.
pub const GRID_POINTS: usize = 4096;
/// Points of the grid spent geometrically near each endpoint.
const GEOMETRIC_POINTS: usize = 512;
/// Below this fraction of the band edge, `J` is replaced by its limit at zero.
pub const LIMIT_SWITCH: f64 = 1e-6;
/// Absolute floor on the bisection bracket width in ω.
const OMEGA_RESOLUTION: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-9;

/// Where the infimum of `J` is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Argmin {
    /// The infimum is the boundary limit as `ω -> 0⁺`.
    LimitAtZero,
    Interior(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginResult {
    pub j_star: f64,
    pub argmin: Argmin,
    pub limit_at_zero: f64,
    /// Interior local minima `(ω, J(ω))`.
    pub critical_points: Vec<(f64, f64)>,
}

/// Precomputed HV-side data for repeated `J*` evaluations against one `alpha`.
#[derive(Debug, Clone)]
pub struct MarginAnalyzer {
    hv: HvParams,
    band_hi: f64,
    tol: f64,
    /// (ω, ω², D_α, dD_α/dx) on the bracketing grid.
    grid: Vec<[f64; 4]>,
}

impl MarginAnalyzer {
    /// Fails with [`Error::NotWorstCase`] when `Δα >= 0`.
    pub fn new(hv: &HvParams, tol: f64) -> Result<Self> {
        let d = hv.delta();
        if d >= 0.0 {
            return Err(Error::NotWorstCase { delta: d });
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParams(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let band_hi = (-d).sqrt();
        let f = hv.factor();
        let grid = bracketing_grid(band_hi)
            .into_iter()
            .map(|w| {
                let x = w * w;
                [w, x, f.log_magnitude_sq(x), f.log_magnitude_sq_slope(x)]
            })
            .collect();
        Ok(Self {
            hv: *hv,
            band_hi,
            tol,
            grid,
        })
    }

    pub fn hv(&self) -> &HvParams {
        &self.hv
    }

    /// Upper edge `sqrt(-Δα)` of the unstable band.
    pub fn band_upper(&self) -> f64 {
        self.band_hi
    }

    /// `lim_{ω->0⁺} J(ω; β) = a1² / (-Δα) · Δβ / b1²`.
    pub fn limit_at_zero(&self, av: &AvGains) -> f64 {
        let a1 = self.hv.a1();
        a1 * a1 / (-self.hv.delta()) * av.delta() / (av.b1() * av.b1())
    }

    fn check_gains(av: &AvGains) -> Result<()> {
        let d = av.delta();
        if d < 0.0 || !d.is_finite() {
            return Err(Error::UnstableGains { delta: d });
        }
        if !(av.b1() > 0.0 && av.b2() > 0.0) {
            return Err(Error::InvalidParams(format!(
                "AV gains {:?} are not Hurwitz",
                av.as_array()
            )));
        }
        Ok(())
    }

    fn ratio_sq(&self, av: &AvGains, x: f64) -> f64 {
        -av.factor().log_magnitude_sq(x) / self.hv.factor().log_magnitude_sq(x)
    }

    /// Sign of `dJ/dx` up to a positive factor.
    fn slope_sign(&self, av: &AvGains, x: f64) -> f64 {
        let (fa, fb) = (self.hv.factor(), av.factor());
        fb.log_magnitude_sq(x) * fa.log_magnitude_sq_slope(x)
            - fb.log_magnitude_sq_slope(x) * fa.log_magnitude_sq(x)
    }

    /// `J(ω; β)` for ω strictly inside the unstable band.
    pub fn ratio(&self, omega: f64, av: &AvGains) -> Result<f64> {
        if !(omega > 0.0 && omega < self.band_hi) {
            return Err(Error::OutOfBand {
                omega,
                upper: self.band_hi,
            });
        }
        Self::check_gains(av)?;
        if omega < LIMIT_SWITCH * self.band_hi {
            return Ok(self.limit_at_zero(av));
        }
        Ok(self.ratio_sq(av, omega * omega))
    }

    /// `J*(β)` with the location of its infimum.
    pub fn analyze(&self, av: &AvGains) -> Result<MarginResult> {
        Self::check_gains(av)?;
        let limit = self.limit_at_zero(av);

        let fb = av.factor();
        let signs: Vec<f64> = self
            .grid
            .iter()
            .map(|&[_, x, da, da_slope]| {
                fb.log_magnitude_sq(x) * da_slope - fb.log_magnitude_sq_slope(x) * da
            })
            .collect();

        let mut critical_points = Vec::new();
        for i in 0..self.grid.len() - 1 {
            if signs[i] < 0.0 && signs[i + 1] >= 0.0 {
                let w = self.bisect_minimum(av, self.grid[i][0], self.grid[i + 1][0]);
                critical_points.push((w, self.ratio_sq(av, w * w)));
            }
        }

        let mut j_star = limit;
        let mut argmin = Argmin::LimitAtZero;
        for &(w, j) in &critical_points {
            if j < j_star {
                j_star = j;
                argmin = Argmin::Interior(w);
            }
        }
        Ok(MarginResult {
            j_star,
            argmin,
            limit_at_zero: limit,
            critical_points,
        })
    }

    /// Bisection on the sign of `dJ/dω` inside a bracket where it goes − → +.
    fn bisect_minimum(&self, av: &AvGains, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= OMEGA_RESOLUTION.max(self.tol * mid) || mid <= lo || mid >= hi {
                break;
            }
            if self.slope_sign(av, mid * mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Grid on `(0, band_hi)`: uniform interior, geometric toward both endpoints.
fn bracketing_grid(band_hi: f64) -> Vec<f64> {
    let uniform = GRID_POINTS - 2 * GEOMETRIC_POINTS;
    let mut w: Vec<f64> = Vec::with_capacity(GRID_POINTS);
    for k in 1..=uniform {
        w.push(band_hi * k as f64 / (uniform + 1) as f64);
    }
    // 1e-5 .. 1e-2 of the band edge
    for k in 0..GEOMETRIC_POINTS {
        let e = -5.0 + 3.0 * k as f64 / (GEOMETRIC_POINTS - 1) as f64;
        w.push(band_hi * 10f64.powf(e));
    }
    // distances 1e-9 .. 1e-2 below the band edge
    for k in 0..GEOMETRIC_POINTS {
        let e = -9.0 + 7.0 * k as f64 / (GEOMETRIC_POINTS - 1) as f64;
        w.push(band_hi * (1.0 - 10f64.powf(e)));
    }
    w.sort_by(f64::total_cmp);
    w.dedup();
    w
}

/// `J(ω; β) = -D_β(ω) / D_α(ω)` for ω in the HV unstable band.
pub fn j_ratio(omega: f64, av: &AvGains, hv: &HvParams) -> Result<f64> {
    let d = hv.delta();
    if d >= 0.0 {
        return Err(Error::NotWorstCase { delta: d });
    }
    let band_hi = (-d).sqrt();
    if !(omega > 0.0 && omega < band_hi) {
        return Err(Error::OutOfBand {
            omega,
            upper: band_hi,
        });
    }
    MarginAnalyzer::check_gains(av)?;
    let a1 = hv.a1();
    if omega < LIMIT_SWITCH * band_hi {
        return Ok(a1 * a1 / (-d) * av.delta() / (av.b1() * av.b1()));
    }
    let x = omega * omega;
    Ok(-av.factor().log_magnitude_sq(x) / hv.factor().log_magnitude_sq(x))
}

/// `J*(β) = inf { J(ω; β) : ω ∈ (0, sqrt(-Δα)) }`.
pub fn j_star(av: &AvGains, hv: &HvParams, tol: f64) -> Result<MarginResult> {
    MarginAnalyzer::new(hv, tol)?.analyze(av)
}

fn check_margin(j_star_star: f64) -> Result<()> {
    if !(j_star_star > 0.0) || j_star_star.is_nan() {
        return Err(Error::NonpositiveMargin { value: j_star_star });
    }
    Ok(())
}

/// Optimal lower bound `1 / (J** + 1)` on the AV penetration rate.
pub fn gamma_lower_bound(j_star_star: f64) -> Result<f64> {
    check_margin(j_star_star)?;
    Ok(1.0 / (j_star_star + 1.0))
}

/// Fewest AVs able to stabilize `n_hv` human drivers: `ceil(n_hv / J**)`.
pub fn min_avs(j_star_star: f64, n_hv: u64) -> Result<u64> {
    check_margin(j_star_star)?;
    Ok((n_hv as f64 / j_star_star).ceil() as u64)
}

/// Most human drivers `n_av` AVs can stabilize: `floor(J** · n_av)`.
pub fn max_hvs(j_star_star: f64, n_av: u64) -> Result<u64> {
    check_margin(j_star_star)?;
    Ok((j_star_star * n_av as f64).floor() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleetBounds {
    pub j_star_star: f64,
    pub gamma_lower: f64,
    pub n_hv: u64,
    /// `ceil(n_hv / J**)`.
    pub min_avs: u64,
    pub n_av: u64,
    /// `floor(J** · n_av)`.
    pub max_hvs: u64,
}

impl FleetBounds {
    pub fn min_avs_for(&self, n_hv: u64) -> u64 {
        (n_hv as f64 / self.j_star_star).ceil() as u64
    }

    pub fn max_hvs_for(&self, n_av: u64) -> u64 {
        (self.j_star_star * n_av as f64).floor() as u64
    }
}

pub fn fleet_bounds(j_star_star: f64, n_hv: u64, n_av: u64) -> Result<FleetBounds> {
    if n_hv == 0 || n_av == 0 {
        return Err(Error::InvalidParams("vehicle counts must be >= 1".into()));
    }
    Ok(FleetBounds {
        j_star_star,
        gamma_lower: gamma_lower_bound(j_star_star)?,
        n_hv,
        min_avs: min_avs(j_star_star, n_hv)?,
        n_av,
        max_hvs: max_hvs(j_star_star, n_av)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn worst_case_hv() -> HvParams {
        HvParams::new(0.3 * PI, 1.5, 0.9).unwrap()
    }

    #[test]
    fn limit_formula_matches_small_omega() {
        let hv = worst_case_hv();
        let av = AvGains::new(1.0, 2.0, 1.0);
        let an = MarginAnalyzer::new(&hv, DEFAULT_TOL).unwrap();
        let lim = an.limit_at_zero(&av);
        assert!((lim - 1.996).abs() < 5e-4);
        for w in [1e-3, 1e-4] {
            let j = j_ratio(w, &av, &hv).unwrap();
            assert!((j - lim).abs() / lim < 1e-5, "J({w}) = {j}, limit {lim}");
        }
        assert_eq!(j_ratio(1e-9, &av, &hv).unwrap(), lim);
    }

    #[test]
    fn ratio_blows_up_at_band_edge() {
        let hv = worst_case_hv();
        let av = AvGains::new(1.0, 2.0, 1.0);
        let hi = (-hv.delta()).sqrt();
        let j = j_ratio(hi * (1.0 - 1e-10), &av, &hv).unwrap();
        assert!(j > 1e6);
    }

    #[test]
    fn ratio_errors() {
        let hv = worst_case_hv();
        let av = AvGains::new(1.0, 2.0, 1.0);
        assert!(matches!(
            j_ratio(0.0, &av, &hv),
            Err(Error::OutOfBand { .. })
        ));
        assert!(matches!(
            j_ratio(0.7, &av, &hv),
            Err(Error::OutOfBand { .. })
        ));
        let calm = HvParams::new(0.5, 2.0, 1.0).unwrap();
        assert!(matches!(
            j_ratio(0.1, &av, &calm),
            Err(Error::NotWorstCase { .. })
        ));
        let bad = AvGains::new(2.0, 1.5, 0.5);
        assert!(matches!(
            j_ratio(0.1, &bad, &hv),
            Err(Error::UnstableGains { .. })
        ));
    }

    #[test]
    fn j_star_reference_values() {
        let hv = worst_case_hv();
        let r = j_star(&AvGains::new(0.01, 2.0, 0.01), &hv, DEFAULT_TOL).unwrap();
        assert!(
            (r.j_star - 184.9594).abs() / 184.9594 < 1e-6,
            "{}",
            r.j_star
        );
        assert!(matches!(r.argmin, Argmin::Interior(_)));
        assert!(r.j_star <= r.limit_at_zero);

        let r = j_star(&AvGains::new(0.8, 2.0, 0.8), &hv, DEFAULT_TOL).unwrap();
        assert!((r.j_star - 5.4898).abs() / 5.4898 < 1e-4, "{}", r.j_star);
        assert!(r.j_star <= r.limit_at_zero);
    }

    #[test]
    fn gamma_examples() {
        assert!((gamma_lower_bound(184.9594).unwrap() - 0.0054).abs() < 5e-5);
        assert!((gamma_lower_bound(5.4898).unwrap() - 0.1541).abs() < 5e-5);
        assert_eq!(gamma_lower_bound(1.0).unwrap(), 0.5);
        assert!(matches!(
            gamma_lower_bound(0.0),
            Err(Error::NonpositiveMargin { .. })
        ));
    }

    #[test]
    fn fleet_examples() {
        let fb = fleet_bounds(184.9594, 400, 1).unwrap();
        assert_eq!(fb.min_avs, 3);
        assert_eq!(fb.max_hvs, 184);
        assert_eq!(fleet_bounds(5.4898, 27, 5).unwrap().max_hvs, 27);
        assert!(fleet_bounds(-1.0, 1, 1).is_err());
        assert!(fleet_bounds(1.0, 0, 1).is_err());
    }

    #[test]
    fn ceil_floor_duality() {
        for &j in &[0.37, 1.0, 5.4898, 184.9594, 1234.5] {
            for n_hv in 1..500u64 {
                let n_av = min_avs(j, n_hv).unwrap();
                assert!(max_hvs(j, n_av).unwrap() >= n_hv, "J={j} n_hv={n_hv}");
            }
        }
    }
}
