//! Entropy generation: the κ-statistical form over a path ensemble, the
//! macroscopic balance form, the thermodynamic Lagrangian, and the stability
//! criterion on path probabilities.

use serde::{Deserialize, Serialize};

use crate::ensemble::PathEnsemble;
use crate::error::{Error, Result};
use crate::kappa_fn::KappaParam;

/// S = −Σ p ln_κ p, with 0·ln_κ(0) = 0.
pub fn kappa_entropy(ensemble: &PathEnsemble, kappa: KappaParam) -> f64 {
    -ensemble
        .probabilities()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * kappa.ln_unchecked(p))
        .sum::<f64>()
}

/// Termwise derivative of the κ-entropy,
/// `S_g′ = −Σ (1 + κ) ln_κ(p) − Σ p^(−κ)`.
///
/// The sum is taken over unconstrained variations; no normalization term is added.
pub fn entropy_derivative(ensemble: &PathEnsemble, kappa: KappaParam) -> Result<f64> {
    let sums = StabilitySums::new(ensemble.probabilities(), kappa)?;
    Ok(sums.derivative(kappa))
}

/// Both halves of the stability inequality, computed in one pass.
struct StabilitySums {
    /// −Σ ln_κ p
    neg_log_sum: f64,
    /// Σ p^(−κ)
    power_sum: f64,
}

impl StabilitySums {
    fn new(probabilities: &[f64], kappa: KappaParam) -> Result<Self> {
        let k = kappa.value();
        let mut neg_log_sum = 0.0;
        let mut power_sum = 0.0;
        for &p in probabilities {
            if !(p > 0.0) {
                return Err(Error::Domain(format!(
                    "stability criterion requires every probability > 0, got {p}"
                )));
            }
            if p > 1.0 {
                return Err(Error::Domain(format!(
                    "stability criterion requires every probability <= 1, got {p}"
                )));
            }
            neg_log_sum -= kappa.ln_unchecked(p);
            power_sum += (-k * p.ln()).exp();
        }
        Ok(StabilitySums {
            neg_log_sum,
            power_sum,
        })
    }

    fn derivative(&self, kappa: KappaParam) -> f64 {
        (1.0 + kappa.value()) * self.neg_log_sum - self.power_sum
    }
}

/// Outcome of the stability test on a set of path probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    /// (−Σ ln_κ p) / (Σ p^(−κ))
    pub ratio: f64,
    /// 1 / (1 + κ)
    pub threshold: f64,
    /// ratio − threshold
    pub margin: f64,
    pub stable: bool,
    pub entropy_derivative: f64,
    /// Whether `entropy_derivative ≥ 0` agrees with `stable`.
    pub consistent: bool,
}

/// Evaluates `(−Σ ln_κ p)/(Σ p^(−κ)) ≥ 1/(1 + κ)` together with the sign of
/// the entropy derivative, which is the same statement multiplied through by
/// `(1 + κ) Σ p^(−κ) > 0`.
pub fn stability_ratio(ensemble: &PathEnsemble, kappa: KappaParam) -> Result<StabilityReport> {
    let sums = StabilitySums::new(ensemble.probabilities(), kappa)?;
    let ratio = sums.neg_log_sum / sums.power_sum;
    let threshold = 1.0 / (1.0 + kappa.value());
    let margin = ratio - threshold;
    let stable = margin >= 0.0;
    let entropy_derivative = sums.derivative(kappa);
    Ok(StabilityReport {
        ratio,
        threshold,
        margin,
        stable,
        entropy_derivative,
        consistent: (entropy_derivative >= 0.0) == stable,
    })
}

/// Macroscopic process data for the entropy-generation balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermoState {
    /// Heat from the source, J.
    pub q_r: f64,
    /// Source temperature, K.
    pub t_r: f64,
    /// Ambient temperature, K.
    pub t_a: f64,
    /// Enthalpy change, J.
    #[serde(default)]
    pub dh: f64,
    /// Entropy change, J/K.
    #[serde(default)]
    pub ds: f64,
    /// Kinetic-energy change, J.
    #[serde(default)]
    pub dek: f64,
    /// Gravitational-energy change, J.
    #[serde(default)]
    pub deg: f64,
    /// Work, J.
    #[serde(default)]
    pub w: f64,
    /// Reference (lower reservoir) temperature, K.
    pub t_ref: f64,
}

impl ThermoState {
    /// A state with only the temperatures set.
    pub fn at_temperatures(t_r: f64, t_a: f64, t_ref: f64) -> Self {
        ThermoState {
            q_r: 0.0,
            t_r,
            t_a,
            dh: 0.0,
            ds: 0.0,
            dek: 0.0,
            deg: 0.0,
            w: 0.0,
            t_ref,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.q_r, self.t_r, self.t_a, self.dh, self.ds, self.dek, self.deg, self.w, self.t_ref,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "thermodynamic state fields must be finite".into(),
            ));
        }
        for (name, t) in [("t_r", self.t_r), ("t_a", self.t_a), ("t_ref", self.t_ref)] {
            if t <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// S_g = Q_r/T_a·(1 − T_a/T_r) + ΔH/T_a − ΔS + (ΔE_k + ΔE_g − W)/T_a, in J/K.
pub fn thermo_entropy_generation(state: &ThermoState) -> Result<f64> {
    state.validate()?;
    let s = state;
    Ok(s.q_r / s.t_a * (1.0 - s.t_a / s.t_r) + s.dh / s.t_a - s.ds + (s.dek + s.deg - s.w) / s.t_a)
}

/// Work lost to irreversibility, `W_lost = T_ref·S_g`.
pub fn lost_work(state: &ThermoState) -> Result<f64> {
    Ok(state.t_ref * thermo_entropy_generation(state)?)
}

/// L = −T_ref·S_g.
pub fn thermodynamic_lagrangian(entropy_generation: f64, t_ref: f64) -> Result<f64> {
    if !(t_ref > 0.0) || !t_ref.is_finite() {
        return Err(Error::Domain(format!(
            "T_ref must be positive, got {t_ref}"
        )));
    }
    Ok(0.0 - t_ref * entropy_generation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(v: f64) -> KappaParam {
        KappaParam::new(v).unwrap()
    }

    fn probs(p: &[f64]) -> PathEnsemble {
        PathEnsemble::from_probabilities(p.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let u4 = PathEnsemble::uniform(4).unwrap();
        assert!((kappa_entropy(&u4, k(0.5)) - 1.5).abs() < 1e-14);
        for &kv in &[0.0, 0.3, -0.8] {
            assert_eq!(kappa_entropy(&probs(&[1.0, 0.0, 0.0]), k(kv)), 0.0);
        }
        let u2 = PathEnsemble::uniform(2).unwrap();
        assert!((kappa_entropy(&u2, KappaParam::ZERO) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        assert!((entropy_derivative(&probs(&[1.0]), k(0.5)).unwrap() + 1.0).abs() < 1e-15);
        let u4 = PathEnsemble::uniform(4).unwrap();
        let expected = 4.0 * 4f64.ln() - 4.0;
        assert!((entropy_derivative(&u4, KappaParam::ZERO).unwrap() - expected).abs() < 1e-13);
        assert!((expected - 1.5452).abs() < 1e-4);
        let u2 = PathEnsemble::uniform(2).unwrap();
        let expected = 2.0 * 2f64.ln() - 2.0;
        assert!((entropy_derivative(&u2, KappaParam::ZERO).unwrap() - expected).abs() < 1e-13);
        assert!((expected + 0.6137).abs() < 1e-4);
    }

    #[test]
    fn derivative_rejects_zero_probability() {
        assert!(matches!(
            entropy_derivative(&probs(&[1.0, 0.0]), k(0.5)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn stability_examples() {
        let r = stability_ratio(&PathEnsemble::uniform(4).unwrap(), k(0.5)).unwrap();
        assert!((r.ratio - 0.75).abs() < 1e-12);
        assert!((r.threshold - 2.0 / 3.0).abs() < 1e-15);
        assert!(r.stable && r.consistent);

        let r = stability_ratio(&PathEnsemble::uniform(2).unwrap(), k(0.5)).unwrap();
        assert!((r.ratio - 0.5).abs() < 1e-12);
        assert!(!r.stable && r.consistent);

        for &kv in &[0.0, 0.4, -0.6] {
            let r = stability_ratio(&probs(&[1.0]), k(kv)).unwrap();
            assert_eq!(r.ratio, 0.0);
            assert!(!r.stable && r.consistent);
        }
    }

    #[test]
    fn stability_rejects_zero_probability() {
        assert!(stability_ratio(&probs(&[0.5, 0.5, 0.0]), k(0.2)).is_err());
    }

    #[test]
    fn stability_sums_reject_out_of_range() {
        assert!(StabilitySums::new(&[1.5], k(0.2)).is_err());
        assert!(StabilitySums::new(&[f64::NAN], k(0.2)).is_err());
    }

    #[test]
    fn thermo_examples() {
        let zero = ThermoState::at_temperatures(500.0, 300.0, 300.0);
        assert_eq!(thermo_entropy_generation(&zero).unwrap(), 0.0);

        let heat = ThermoState { q_r: 100.0, ..zero };
        let sg = thermo_entropy_generation(&heat).unwrap();
        assert!((sg - 2.0 / 15.0).abs() < 1e-15);
        assert!((lost_work(&heat).unwrap() - 40.0).abs() < 1e-12);

        let enthalpy = ThermoState { dh: 300.0, ..zero };
        assert!((thermo_entropy_generation(&enthalpy).unwrap() - 1.0).abs() < 1e-15);

        let work = ThermoState {
            w: 60.0,
            ds: -0.5,
            ..zero
        };
        assert!((thermo_entropy_generation(&work).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn thermo_rejects_bad_temperatures() {
        let bad = ThermoState::at_temperatures(500.0, 0.0, 300.0);
        assert!(thermo_entropy_generation(&bad).is_err());
        let bad = ThermoState::at_temperatures(500.0, 300.0, -1.0);
        assert!(thermo_entropy_generation(&bad).is_err());
    }

    #[test]
    fn lagrangian_examples() {
        assert!(thermodynamic_lagrangian(0.0, 300.0).unwrap().to_bits() == 0);
        let sg = 2.0 / 15.0;
        assert!((thermodynamic_lagrangian(sg, 300.0).unwrap() + 40.0).abs() < 1e-12);
        assert_eq!(thermodynamic_lagrangian(1.0, 1.0).unwrap(), -1.0);
        assert!(thermodynamic_lagrangian(1.0, 0.0).is_err());
    }
}
