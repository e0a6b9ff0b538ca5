//! Linearized car-following factors.
//!
//! Every vehicle in the ring responds to its leader through a second-order
//! transfer function
//!
//! ```text
//!            k3 s + k1
//! T(s) = -----------------
//!        s^2 + k2 s + k1
//! ```
//!
//! where `(k1, k2, k3)` are the stiffness, damping and relative-velocity
//! sensitivities. Human drivers carry the triple `alpha` ([`HvParams`]) and
//! autonomous vehicles the controller gains `beta` ([`AvGains`]); both share
//! the arithmetic in [`Factor`].

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Coefficient triple of one second-order car-following factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factor {
    /// Stiffness sensitivity (1/s²).
    pub k1: f64,
    /// Damping sensitivity (1/s).
    pub k2: f64,
    /// Relative-velocity sensitivity (1/s).
    pub k3: f64,
}

impl Factor {
    pub const fn new(k1: f64, k2: f64, k3: f64) -> Self {
        Self { k1, k2, k3 }
    }

    /// Discriminant `-2 k1 + k2² - k3²`. Nonnegative iff `|T(iω)| <= 1` for all ω.
    pub fn delta(&self) -> f64 {
        delta(self.k1, self.k2, self.k3)
    }

    /// Both poles in the open left half plane.
    pub fn is_hurwitz(&self) -> bool {
        self.k1 > 0.0 && self.k2 > 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.k1.is_finite() && self.k2.is_finite() && self.k3.is_finite()
    }

    fn numerator_sq(&self, x: f64) -> f64 {
        self.k3 * self.k3 * x + self.k1 * self.k1
    }

    fn denominator_sq(&self, x: f64) -> f64 {
        let d = x - self.k1;
        self.k2 * self.k2 * x + d * d
    }

    /// `ln |T(iω)|` expressed in `x = ω²`.
    ///
    /// Written as `½ ln(1 + u)` with `u = -x (Δ + x) / den`, which is exact and
    /// keeps full relative accuracy as `x -> 0`. Returns NaN at a pole.
    pub(crate) fn log_magnitude_sq(&self, x: f64) -> f64 {
        let den = self.denominator_sq(x);
        if den <= 0.0 {
            return f64::NAN;
        }
        let u = -x * (self.delta() + x) / den;
        if u > -0.5 {
            0.5 * u.ln_1p()
        } else {
            0.5 * (self.numerator_sq(x) / den).ln()
        }
    }

    /// Derivative of [`Self::log_magnitude_sq`] with respect to `x = ω²`.
    pub(crate) fn log_magnitude_sq_slope(&self, x: f64) -> f64 {
        let num = self.numerator_sq(x);
        let den = self.denominator_sq(x);
        0.5 * (self.k3 * self.k3 / num - (self.k2 * self.k2 + 2.0 * (x - self.k1)) / den)
    }

    /// Second-order coefficient of `ln |T(iω)|` at the origin:
    /// `ln |T(iω)| = -Δ / (2 k1²) ω² + O(ω⁴)`.
    pub fn low_frequency_curvature(&self) -> f64 {
        -self.delta() / (2.0 * self.k1 * self.k1)
    }

    /// `D(ω) = ln |T(iω)|`.
    pub fn log_magnitude(&self, omega: f64) -> Result<f64> {
        let x = omega * omega;
        if self.denominator_sq(x) <= 0.0 {
            return Err(Error::Pole { omega });
        }
        Ok(self.log_magnitude_sq(x))
    }

    /// Frequencies `(0, sqrt(-Δ))` on which the factor amplifies.
    pub fn amplifying_band(&self) -> OpenInterval {
        let d = self.delta();
        if d < 0.0 {
            OpenInterval::new(0.0, (-d).sqrt())
        } else {
            OpenInterval::EMPTY
        }
    }

    /// Numerator `k3 s + k1`.
    pub fn numerator(&self, s: Complex64) -> Complex64 {
        s * self.k3 + self.k1
    }

    /// Denominator `s² + k2 s + k1`.
    pub fn denominator(&self, s: Complex64) -> Complex64 {
        s * (s + self.k2) + self.k1
    }

    pub fn transfer(&self, s: Complex64) -> Complex64 {
        self.numerator(s) / self.denominator(s)
    }
}

/// `-2 p1 + p2² - p3²`.
pub fn delta(p1: f64, p2: f64, p3: f64) -> f64 {
    -2.0 * p1 + p2 * p2 - p3 * p3
}

/// `D(ω)` for either parameter role.
pub fn log_magnitude(params: &impl AsRef<Factor>, omega: f64) -> Result<f64> {
    params.as_ref().log_magnitude(omega)
}

/// An open interval `(lo, hi)`; empty when `hi <= lo`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenInterval {
    pub lo: f64,
    pub hi: f64,
}

impl OpenInterval {
    pub const EMPTY: OpenInterval = OpenInterval { lo: 0.0, hi: 0.0 };

    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn width(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }
}

/// Linearized human-driver sensitivities `alpha = (a1, a2, a3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HvParams(Factor);

impl HvParams {
    /// Validates the rational driving constraints `a1 > 0`, `a2 > a3 > 0`.
    pub fn new(a1: f64, a2: f64, a3: f64) -> Result<Self> {
        let f = Factor::new(a1, a2, a3);
        if !f.is_finite() {
            return Err(Error::InvalidParams(format!(
                "HV parameters must be finite, got ({a1}, {a2}, {a3})"
            )));
        }
        if !(a1 > 0.0 && a2 > a3 && a3 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "HV parameters ({a1}, {a2}, {a3}) violate a1 > 0, a2 > a3 > 0"
            )));
        }
        Ok(Self(f))
    }

    pub fn a1(&self) -> f64 {
        self.0.k1
    }

    pub fn a2(&self) -> f64 {
        self.0.k2
    }

    pub fn a3(&self) -> f64 {
        self.0.k3
    }

    pub fn factor(&self) -> &Factor {
        &self.0
    }

    pub fn delta(&self) -> f64 {
        self.0.delta()
    }

    /// Δα < 0: human drivers alone amplify some frequency.
    pub fn is_worst_case(&self) -> bool {
        self.delta() < 0.0
    }
}

impl AsRef<Factor> for HvParams {
    fn as_ref(&self) -> &Factor {
        &self.0
    }
}

/// AV controller gains `beta = (b1, b2, b3)`.
///
/// Construction does not validate; use [`check_rdc`] or [`AvGains::checked`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvGains(Factor);

impl AvGains {
    pub const fn new(b1: f64, b2: f64, b3: f64) -> Self {
        Self(Factor::new(b1, b2, b3))
    }

    pub fn checked(b1: f64, b2: f64, b3: f64) -> Result<Self> {
        let g = Self::new(b1, b2, b3);
        if !g.0.is_finite() || !check_rdc(&g) {
            return Err(Error::InvalidParams(format!(
                "AV gains ({b1}, {b2}, {b3}) violate b1 > 0, b2 > b3 > 0"
            )));
        }
        Ok(g)
    }

    pub fn b1(&self) -> f64 {
        self.0.k1
    }

    pub fn b2(&self) -> f64 {
        self.0.k2
    }

    pub fn b3(&self) -> f64 {
        self.0.k3
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.0.k1, self.0.k2, self.0.k3]
    }

    pub fn factor(&self) -> &Factor {
        &self.0
    }

    pub fn delta(&self) -> f64 {
        self.0.delta()
    }
}

impl AsRef<Factor> for AvGains {
    fn as_ref(&self) -> &Factor {
        &self.0
    }
}

/// Rational driving constraints on AV gains: `b1 > 0`, `b2 - b3 > 0`, `b3 > 0`.
pub fn check_rdc(gains: &AvGains) -> bool {
    gains.b1() > 0.0 && gains.b2() - gains.b3() > 0.0 && gains.b3() > 0.0
}

/// Frequencies where the HV factor amplifies, `(0, sqrt(-Δα))`, or empty.
pub fn unstable_band(hv: &HvParams) -> OpenInterval {
    hv.factor().amplifying_band()
}

/// Lower and upper box bounds on the AV gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainBounds {
    pub lower: AvGains,
    pub upper: AvGains,
}

impl GainBounds {
    /// Requires `0 < lower_i <= upper_i` componentwise.
    pub fn new(lower: [f64; 3], upper: [f64; 3]) -> Result<Self> {
        for i in 0..3 {
            if !(lower[i].is_finite() && upper[i].is_finite()) {
                return Err(Error::InvalidParams("gain bounds must be finite".into()));
            }
            if !(lower[i] > 0.0 && lower[i] <= upper[i]) {
                return Err(Error::InvalidParams(format!(
                    "gain bounds need 0 < lower <= upper, component {} has ({}, {})",
                    i + 1,
                    lower[i],
                    upper[i]
                )));
            }
        }
        Ok(Self {
            lower: AvGains::new(lower[0], lower[1], lower[2]),
            upper: AvGains::new(upper[0], upper[1], upper[2]),
        })
    }

    /// Same bound on all three gains.
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        Self::new([lower; 3], [upper; 3])
    }

    pub fn contains(&self, g: &AvGains) -> bool {
        let (l, u, v) = (self.lower.as_array(), self.upper.as_array(), g.as_array());
        (0..3).all(|i| l[i] <= v[i] && v[i] <= u[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn worst_case_hv() -> HvParams {
        HvParams::new(0.3 * PI, 1.5, 0.9).unwrap()
    }

    #[test]
    fn rdc_examples() {
        assert!(check_rdc(&AvGains::new(1.0, 2.0, 1.0)));
        assert!(!check_rdc(&AvGains::new(1.0, 1.0, 1.0)));
        assert!(check_rdc(&AvGains::new(0.01, 2.0, 0.01)));
        assert!(!check_rdc(&AvGains::new(0.0, 2.0, 1.0)));
        assert!(!check_rdc(&AvGains::new(1.0, 2.0, 0.0)));
    }

    #[test]
    fn delta_examples() {
        assert!((worst_case_hv().delta() - (-0.4450)).abs() < 5e-5);
        assert_eq!(delta(1.0, 2.0, 1.0), 1.0);
        assert!((delta(0.01, 2.0, 0.01) - 3.9799).abs() < 1e-12);
    }

    #[test]
    fn log_magnitude_examples() {
        let b = AvGains::new(1.0, 2.0, 1.0);
        assert_eq!(log_magnitude(&b, 0.0).unwrap(), 0.0);
        assert_eq!(log_magnitude(&worst_case_hv(), 0.0).unwrap(), 0.0);
        let d = log_magnitude(&b, 1.0).unwrap();
        assert!((d - 0.5 * (0.5f64).ln()).abs() < 1e-15);
        // direct evaluation of ½ ln(num/den)
        let hv = worst_case_hv();
        let w: f64 = 0.3;
        let (a1, a2, a3) = (hv.a1(), hv.a2(), hv.a3());
        let direct =
            0.5 * ((a3 * a3 * w * w + a1 * a1) / (a2 * a2 * w * w + (w * w - a1).powi(2))).ln();
        let got = log_magnitude(&hv, w).unwrap();
        assert!(got > 0.0);
        assert!((got - direct).abs() < 1e-14);
    }

    #[test]
    fn log_magnitude_pole() {
        let f = Factor::new(1.0, 0.0, 0.5);
        assert!(matches!(f.log_magnitude(1.0), Err(Error::Pole { .. })));
    }

    #[test]
    fn log_magnitude_rolls_off() {
        let b = AvGains::new(1.0, 2.0, 1.0);
        let mut prev = 0.0;
        for k in 1..12 {
            let w = 10f64.powi(k);
            let d = log_magnitude(&b, w).unwrap();
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < -20.0);
    }

    #[test]
    fn unstable_band_examples() {
        let band = unstable_band(&worst_case_hv());
        assert_eq!(band.lo, 0.0);
        assert!((band.hi - 0.444956f64.sqrt()).abs() < 1e-5);
        assert!((band.hi - 0.66705).abs() < 1e-5);
        let calm = HvParams::new(0.5, 2.0, 1.0).unwrap();
        assert!(unstable_band(&calm).is_empty());
    }

    #[test]
    fn sign_structure_on_grid() {
        let hv = worst_case_hv();
        let band = unstable_band(&hv);
        for k in 1..2000 {
            let w = band.hi * 3.0 * k as f64 / 2000.0;
            let d = log_magnitude(&hv, w).unwrap();
            if band.contains(w) {
                assert!(d > 0.0, "w={w}");
            } else if (w - band.hi).abs() > 1e-9 {
                assert!(d < 0.0, "w={w}");
            }
        }
        assert!(log_magnitude(&hv, band.hi).unwrap().abs() < 1e-15);
    }

    #[test]
    fn hv_params_validation() {
        assert!(HvParams::new(1.0, 0.5, 0.9).is_err());
        assert!(HvParams::new(-1.0, 1.5, 0.9).is_err());
        assert!(HvParams::new(1.0, 1.5, 0.0).is_err());
        assert!(HvParams::new(f64::NAN, 1.5, 0.9).is_err());
    }

    #[test]
    fn gain_bounds_validation() {
        assert!(GainBounds::uniform(0.01, 2.0).is_ok());
        assert!(GainBounds::uniform(0.0, 2.0).is_err());
        assert!(GainBounds::new([1.0, 1.0, 1.0], [2.0, 0.5, 2.0]).is_err());
    }
}
