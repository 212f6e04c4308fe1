//! κ-deformed exponential and logarithm.
//!
//! ```text
//! exp_κ(τ) = (κτ + √(1 + κ²τ²))^(1/κ) = exp(asinh(κτ) / κ)
//! ln_κ(x)  = (x^κ − x^(−κ)) / (2κ)     = sinh(κ ln x) / κ
//! ```
//!
//! Both are evaluated through the hyperbolic forms on the right. The power
//! forms cancel catastrophically as κ → 0, while `sinh`/`asinh` stay accurate
//! down to the Boltzmann–Gibbs point, where a short Taylor series takes over.
//! κ = 0 itself dispatches to `f64::exp` / `f64::ln`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude of the hyperbolic argument the Taylor branch is used.
const SERIES_THRESHOLD: f64 = 1e-4;

/// The deformation parameter κ, restricted to the open interval (−1, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct KappaParam(f64);

impl KappaParam {
    /// The undeformed (Boltzmann–Gibbs) case.
    pub const ZERO: KappaParam = KappaParam(0.0);

    pub fn new(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kappa must be finite, got {kappa}"
            )));
        }
        if kappa.abs() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "kappa must satisfy |kappa| < 1, got {kappa}"
            )));
        }
        Ok(KappaParam(kappa))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    /// exp_κ(τ) without the overflow check. May return `inf` or `0`.
    #[inline]
    pub fn exp_unchecked(self, tau: f64) -> f64 {
        let k = self.0;
        if k == 0.0 {
            return tau.exp();
        }
        let z = k * tau;
        if z.abs() < SERIES_THRESHOLD {
            // asinh(z)/κ = τ (1 − z²/6 + 3z⁴/40 − …)
            let z2 = z * z;
            (tau * (1.0 - z2 / 6.0 + 3.0 * z2 * z2 / 40.0)).exp()
        } else {
            (z.asinh() / k).exp()
        }
    }

    /// ln_κ(x) for x > 0 without domain checking.
    #[inline]
    pub fn ln_unchecked(self, x: f64) -> f64 {
        let k = self.0;
        let y = x.ln();
        if k == 0.0 {
            return y;
        }
        let z = k * y;
        if z.abs() < SERIES_THRESHOLD {
            // sinh(z)/κ = y (1 + z²/6 + z⁴/120 + …)
            let z2 = z * z;
            y * (1.0 + z2 / 6.0 + z2 * z2 / 120.0)
        } else {
            z.sinh() / k
        }
    }

    /// d ln_κ(p)/dp = (p^(κ−1) + p^(−κ−1)) / 2 = cosh(κ ln p) / p.
    #[inline]
    pub fn ln_deriv_unchecked(self, p: f64) -> f64 {
        let k = self.0;
        if k == 0.0 {
            return 1.0 / p;
        }
        (k * p.ln()).cosh() / p
    }

    /// κ-exponential, failing instead of returning an infinity.
    pub fn exp(self, tau: f64) -> Result<f64> {
        if !tau.is_finite() {
            return Err(Error::Domain(format!(
                "exp_kappa argument must be finite, got {tau}"
            )));
        }
        let v = self.exp_unchecked(tau);
        if v.is_infinite() {
            return Err(Error::Overflow(format!(
                "exp_kappa({tau}) with kappa = {} exceeds the f64 range",
                self.0
            )));
        }
        Ok(v)
    }

    /// κ-logarithm, defined for x > 0.
    pub fn ln(self, x: f64) -> Result<f64> {
        if !(x > 0.0) || x.is_infinite() {
            return Err(Error::Domain(format!(
                "ln_kappa requires 0 < x < inf, got {x}"
            )));
        }
        Ok(self.ln_unchecked(x))
    }

    /// First derivative of the κ-logarithm, defined for p > 0.
    pub fn ln_deriv(self, p: f64) -> Result<f64> {
        if !(p > 0.0) || p.is_infinite() {
            return Err(Error::Domain(format!(
                "ln_kappa derivative requires 0 < p < inf, got {p}"
            )));
        }
        let v = self.ln_deriv_unchecked(p);
        if v.is_infinite() {
            return Err(Error::Overflow(format!(
                "ln_kappa derivative at p = {p} exceeds the f64 range"
            )));
        }
        Ok(v)
    }
}

impl TryFrom<f64> for KappaParam {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        KappaParam::new(value)
    }
}

impl From<KappaParam> for f64 {
    fn from(k: KappaParam) -> f64 {
        k.0
    }
}

impl std::fmt::Display for KappaParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// exp_κ(τ); reduces to `exp(τ)` at κ = 0.
pub fn kappa_exp(tau: f64, kappa: KappaParam) -> Result<f64> {
    kappa.exp(tau)
}

/// ln_κ(x); reduces to `ln(x)` at κ = 0.
pub fn kappa_log(x: f64, kappa: KappaParam) -> Result<f64> {
    kappa.ln(x)
}

/// ln_κ′(p) = (κ/p)·ln_κ(p) + p^(−(κ+1)).
pub fn kappa_log_deriv(p: f64, kappa: KappaParam) -> Result<f64> {
    kappa.ln_deriv(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(v: f64) -> KappaParam {
        KappaParam::new(v).unwrap()
    }

    #[test]
    fn rejects_out_of_range_kappa() {
        assert!(KappaParam::new(1.0).is_err());
        assert!(KappaParam::new(-1.0).is_err());
        assert!(KappaParam::new(f64::NAN).is_err());
        assert!(KappaParam::new(f64::INFINITY).is_err());
        assert!(KappaParam::new(0.999).is_ok());
    }

    #[test]
    fn exp_examples() {
        assert_eq!(kappa_exp(0.0, k(0.5)).unwrap(), 1.0);
        assert_eq!(
            kappa_exp(1.0, KappaParam::ZERO).unwrap(),
            std::f64::consts::E
        );
        assert!((kappa_exp(1.5, k(0.5)).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn log_examples() {
        assert_eq!(kappa_log(1.0, k(0.7)).unwrap(), 0.0);
        assert!((kappa_log(4.0, k(0.5)).unwrap() - 1.5).abs() < 1e-14);
        assert!((kappa_log(0.25, k(0.5)).unwrap() + 1.5).abs() < 1e-14);
    }

    #[test]
    fn log_deriv_examples() {
        assert!((kappa_log_deriv(1.0, k(0.5)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(kappa_log_deriv(2.0, KappaParam::ZERO).unwrap(), 0.5);
        assert!((kappa_log_deriv(0.25, k(0.5)).unwrap() - 5.0).abs() < 1e-13);
    }

    #[test]
    fn log_deriv_matches_power_form() {
        // (κ/p) ln_κ(p) + p^(−(κ+1))
        for &kv in &[-0.9, -0.3, 0.2, 0.5, 0.9] {
            let kp = k(kv);
            for &p in &[0.01, 0.2, 0.5, 0.9, 3.0] {
                let power = kv / p * kappa_log(p, kp).unwrap() + p.powf(-(kv + 1.0));
                let got = kappa_log_deriv(p, kp).unwrap();
                assert!(((got - power) / power).abs() < 1e-13, "p={p} k={kv}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(kappa_log(0.0, k(0.3)), Err(Error::Domain(_))));
        assert!(matches!(
            kappa_log(-1.0, KappaParam::ZERO),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            kappa_log_deriv(0.0, k(0.3)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(kappa_exp(f64::NAN, k(0.3)), Err(Error::Domain(_))));
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(
            kappa_exp(1e3, KappaParam::ZERO),
            Err(Error::Overflow(_))
        ));
        assert!(matches!(kappa_exp(1e300, k(0.5)), Err(Error::Overflow(_))));
    }

    #[test]
    fn series_branch_is_continuous() {
        // Straddle the switch point |κ ln x| = 1e-4 from both sides.
        let x: f64 = 10.0;
        let kv = SERIES_THRESHOLD / x.ln();
        let below = kappa_log(x, k(kv * (1.0 - 1e-9))).unwrap();
        let above = kappa_log(x, k(kv * (1.0 + 1e-9))).unwrap();
        assert!(((below - above) / above).abs() < 1e-14);

        let tau = 3.0;
        let kv = SERIES_THRESHOLD / tau;
        let below = kappa_exp(tau, k(kv * (1.0 - 1e-9))).unwrap();
        let above = kappa_exp(tau, k(kv * (1.0 + 1e-9))).unwrap();
        assert!(((below - above) / above).abs() < 1e-14);
    }

    #[test]
    fn direct_power_form_agrees_away_from_zero() {
        for &kv in &[0.1f64, 0.5, -0.7] {
            for &x in &[0.3f64, 2.0, 17.0] {
                let direct = (x.powf(kv) - x.powf(-kv)) / (2.0 * kv);
                let got = kappa_log(x, k(kv)).unwrap();
                assert!(((got - direct) / direct).abs() < 1e-13);
            }
            for &t in &[-2.0, 0.4, 5.0] {
                let direct = (kv * t + (1.0 + kv * kv * t * t).sqrt()).powf(1.0 / kv);
                let got = kappa_exp(t, k(kv)).unwrap();
                assert!(((got - direct) / direct).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn kappa_parses_with_validation() {
        let ok: KappaParam = serde_json::from_str("0.25").unwrap();
        assert_eq!(ok.value(), 0.25);
        assert!(serde_json::from_str::<KappaParam>("1.5").is_err());
    }
}
