//! Discrete path ensembles of κ-exponential form.
//!
//! A path γ with energy `E_γ` carries the weight
//!
//! ```text
//! p_γ = α_κ · exp_κ(θ − β (E_γ − E_ref)),     α_κ = ((1 − κ)/(1 + κ))^(1/(2κ))
//! ```
//!
//! which is the stationary point of `−Σ p ln_κ p` under the normalization and
//! mean-energy constraints. [`solve_ensemble`] finds `(β, θ)` for a target
//! mean energy; [`alpha_from_path_data`] evaluates the endpoint-Hamiltonian
//! normalization independently of the solver.

mod solver;

pub use solver::{solve_ensemble, SolveMethod, SolverOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kappa_fn::KappaParam;

/// Tolerance on `|Σp − 1|` accepted by [`PathEnsemble::new`].
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Energies and probabilities of a finite set of paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEnsemble {
    energies: Vec<f64>,
    probabilities: Vec<f64>,
}

impl PathEnsemble {
    pub fn new(energies: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::InvalidParameter(
                "ensemble must contain at least one path".into(),
            ));
        }
        if energies.len() != probabilities.len() {
            return Err(Error::InvalidParameter(format!(
                "ensemble has {} energies but {} probabilities",
                energies.len(),
                probabilities.len()
            )));
        }
        if let Some(e) = energies.iter().find(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter(format!("energy {e} is not finite")));
        }
        if let Some(p) = probabilities.iter().find(|&&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidParameter(format!(
                "probability {p} is outside [0, 1]"
            )));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(PathEnsemble {
            energies,
            probabilities,
        })
    }

    /// Solver output, normalized to the solver's own tolerance.
    pub(crate) fn from_parts(energies: Vec<f64>, probabilities: Vec<f64>) -> Self {
        PathEnsemble {
            energies,
            probabilities,
        }
    }

    /// An ensemble where only the probabilities matter; all energies are zero.
    pub fn from_probabilities(probabilities: Vec<f64>) -> Result<Self> {
        PathEnsemble::new(vec![0.0; probabilities.len()], probabilities)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "ensemble must contain at least one path".into(),
            ));
        }
        PathEnsemble::from_probabilities(vec![1.0 / n as f64; n])
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

/// Input to [`solve_ensemble`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleProblem {
    pub energies: Vec<f64>,
    /// Target mean energy U.
    pub target_energy: f64,
    pub kappa: KappaParam,
    /// Only used to report the solution in (λ, T) convention.
    pub temperature: f64,
    /// Only used to report the solution in (λ, T) convention.
    pub lambda: f64,
}

/// Boltzmann constant in reduced units.
pub const K_B: f64 = 1.0;

impl EnsembleProblem {
    pub fn new(energies: Vec<f64>, target_energy: f64, kappa: KappaParam) -> Self {
        EnsembleProblem {
            energies,
            target_energy,
            kappa,
            temperature: 1.0,
            lambda: 2.0 * K_B,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.energies.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one energy level is required".into(),
            ));
        }
        if let Some(e) = self.energies.iter().find(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter(format!("energy {e} is not finite")));
        }
        if !self.target_energy.is_finite() {
            return Err(Error::InvalidParameter(
                "target energy must be finite".into(),
            ));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Solver output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSolution {
    pub ensemble: PathEnsemble,
    /// Fixed prefactor α_κ of the stationary distribution.
    pub alpha: f64,
    /// Energy multiplier, in inverse energy units. Negative when U lies above the uniform mean.
    pub beta: f64,
    /// Dimensionless shift θ fixed by normalization.
    pub shift: f64,
    /// Energy origin, the smallest level.
    pub e_ref: f64,
    /// `μ` such that `p = α exp_κ(−(E − μ)/(λT))`; undefined when β = 0.
    pub mu: Option<f64>,
    /// The product `λT = 1/β`; undefined when β = 0.
    pub lambda_t: Option<f64>,
    /// `β·λ·T`: factor by which energies must be rescaled for the problem's λ and T.
    pub energy_rescaling: f64,
    pub normalization_residual: f64,
    pub energy_residual: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: SolveMethod,
}

impl EnsembleSolution {
    /// Evaluates the fitted weight at an arbitrary energy.
    pub fn weight(&self, energy: f64, kappa: KappaParam) -> f64 {
        self.alpha * kappa.exp_unchecked(self.shift - self.beta * (energy - self.e_ref))
    }
}

/// The prefactor α_κ = ((1 − κ)/(1 + κ))^(1/(2κ)) = exp(−atanh(κ)/κ); e⁻¹ at κ = 0.
pub fn stationary_prefactor(kappa: KappaParam) -> f64 {
    let k = kappa.value();
    if k.abs() < 1e-4 {
        // atanh(κ)/κ = 1 + κ²/3 + κ⁴/5 + …
        let k2 = k * k;
        (-(1.0 + k2 / 3.0 + k2 * k2 / 5.0)).exp()
    } else {
        (-k.atanh() / k).exp()
    }
}

/// p = α·exp_κ(−β(E − E_ref)).
pub fn path_probability(
    energy: f64,
    alpha: f64,
    beta: f64,
    e_ref: f64,
    kappa: KappaParam,
) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let w = kappa.exp(-beta * (energy - e_ref))?;
    let p = alpha * w;
    if p.is_infinite() {
        return Err(Error::Overflow(format!(
            "path probability at E = {energy} overflows"
        )));
    }
    Ok(p)
}

/// Σ p_γ E_γ.
pub fn mean_energy(ensemble: &PathEnsemble) -> f64 {
    ensemble
        .energies
        .iter()
        .zip(&ensemble.probabilities)
        .map(|(e, p)| p * e)
        .sum()
}

/// Endpoint data of one path: the volume-integrated endpoint Hamiltonian
/// `∫_V (H_γ(0) + H_γ(τ)) / (k_B T) dV` and the time-averaged entropy production.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathEndpoint {
    pub h: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEndpointData {
    paths: Vec<PathEndpoint>,
    tau: f64,
    k_b: f64,
}

impl PathEndpointData {
    pub fn new(paths: Vec<PathEndpoint>, tau: f64, k_b: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Domain("at least one path is required".into()));
        }
        if paths
            .iter()
            .any(|p| !p.h.is_finite() || !p.sigma.is_finite())
        {
            return Err(Error::InvalidParameter(
                "path endpoint data must be finite".into(),
            ));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tau must be positive, got {tau}"
            )));
        }
        if !(k_b > 0.0 && k_b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "k_B must be positive, got {k_b}"
            )));
        }
        Ok(PathEndpointData { paths, tau, k_b })
    }

    pub fn paths(&self) -> &[PathEndpoint] {
        &self.paths
    }
}

/// Exponent of one path's term in the α normalization sum.
///
/// Grouping: `−h/2 + τσ/(2k_B)`, i.e. the one-half applies to the
/// endpoint-Hamiltonian integral only.
fn endpoint_exponent(path: &PathEndpoint, tau: f64, k_b: f64) -> f64 {
    -0.5 * path.h + tau * path.sigma / (2.0 * k_b)
}

/// α = [Σ_γ exp(−h_γ/2 + τσ_γ/(2k_B))]⁻¹, evaluated with a log-sum-exp.
pub fn alpha_from_path_data(data: &PathEndpointData) -> Result<f64> {
    let exponents: Vec<f64> = data
        .paths
        .iter()
        .map(|p| endpoint_exponent(p, data.tau, data.k_b))
        .collect();
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = max + exponents.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    let alpha = (-log_sum).exp();
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::Overflow(format!(
            "normalization sum exp({log_sum}) is outside the f64 range"
        )));
    }
    Ok(alpha)
}
