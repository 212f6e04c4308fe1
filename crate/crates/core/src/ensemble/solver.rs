//! Constrained maximum-entropy solve for `(β, θ)`.
//!
//! Works on energies rescaled to `e = (E − E_min)/(E_max − E_min) ∈ [0, 1]`
//! and the scaled multiplier `b = β (E_max − E_min)`. Residuals are
//! `Σp − 1` and `Σp e − u`, with `u` the rescaled target.

use serde::Serialize;

use super::{stationary_prefactor, EnsembleProblem, EnsembleSolution, PathEnsemble};
use crate::error::{Error, Result};
use crate::kappa_fn::KappaParam;

/// Absolute bracket width at which bisection stops refining.
const RESOLUTION: f64 = 1e-18;

const POLISH_STEPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// All energies equal; the uniform distribution is returned directly.
    Degenerate,
    Newton,
    /// Nested bisection used after Newton stalled.
    Bisection,
}

struct Scaled<'a> {
    e: Vec<f64>,
    u: f64,
    alpha: f64,
    kappa: KappaParam,
    problem: &'a EnsembleProblem,
    e_min: f64,
    span: f64,
}

struct Eval {
    r_norm: f64,
    r_energy: f64,
    s_w: f64,
    s_ew: f64,
    s_eew: f64,
}

impl Eval {
    fn norm(&self) -> f64 {
        let n = self.r_norm.hypot(self.r_energy);
        if n.is_finite() {
            n
        } else {
            f64::INFINITY
        }
    }
}

impl Scaled<'_> {
    #[inline]
    fn weight(&self, b: f64, theta: f64, e: f64) -> f64 {
        self.alpha * self.kappa.exp_unchecked(theta - b * e)
    }

    fn eval(&self, b: f64, theta: f64) -> Eval {
        let k = self.kappa.value();
        let (mut s_p, mut s_ep, mut s_w, mut s_ew, mut s_eew) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &e in &self.e {
            let x = theta - b * e;
            let p = self.alpha * self.kappa.exp_unchecked(x);
            // d exp_κ(x)/dx = exp_κ(x) / √(1 + κ²x²)
            let w = if k == 0.0 {
                p
            } else {
                p / (1.0 + k * k * x * x).sqrt()
            };
            s_p += p;
            s_ep += p * e;
            s_w += w;
            s_ew += w * e;
            s_eew += w * e * e;
        }
        Eval {
            r_norm: s_p - 1.0,
            r_energy: s_ep - self.u,
            s_w,
            s_ew,
            s_eew,
        }
    }

    /// Residuals in the problem's own units.
    fn residuals(&self, b: f64, theta: f64) -> (f64, f64) {
        let (mut s_p, mut s_pe) = (0.0, 0.0);
        for (&e, &energy) in self.e.iter().zip(&self.problem.energies) {
            let p = self.weight(b, theta, e);
            s_p += p;
            s_pe += p * energy;
        }
        (s_p - 1.0, s_pe - self.problem.target_energy)
    }

    fn accepts(&self, b: f64, theta: f64, tol: f64) -> bool {
        let (rn, re) = self.residuals(b, theta);
        rn.abs() <= tol && re.abs() <= tol * self.problem.target_energy.abs().max(1.0)
    }

    /// θ such that Σp = 1 at fixed `b`. The sum is increasing in θ.
    fn normalizing_shift(&self, b: f64) -> Option<f64> {
        let total = |theta: f64| {
            self.e
                .iter()
                .map(|&e| self.weight(b, theta, e))
                .sum::<f64>()
        };
        let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
        let mut guard = 0;
        while !(total(lo) < 1.0) {
            lo = lo * 2.0 - 1.0;
            guard += 1;
            if guard > 2100 || !lo.is_finite() {
                return None;
            }
        }
        while !(total(hi) > 1.0) {
            if total(hi).is_nan() {
                return None;
            }
            hi = hi * 2.0 + 1.0;
            guard += 1;
            if guard > 4200 || !hi.is_finite() {
                return None;
            }
        }
        Some(bisect(lo, hi, |t| total(t) - 1.0))
    }

    fn scaled_mean(&self, b: f64) -> Option<(f64, f64)> {
        let theta = self.normalizing_shift(b)?;
        let ws: Vec<f64> = self.e.iter().map(|&e| self.weight(b, theta, e)).collect();
        let total: f64 = ws.iter().sum();
        let mean = ws.iter().zip(&self.e).map(|(w, e)| w * e).sum::<f64>() / total;
        Some((theta, mean))
    }
}

/// Bisection to the limit of f64 resolution, for `f` increasing on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..2200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= RESOLUTION {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo).abs(), f(hi).abs());
    if flo <= fhi {
        lo
    } else {
        hi
    }
}

/// Solves for the stationary κ-ensemble with mean energy `problem.target_energy`.
///
/// Damped Newton on `(b, θ)` with an analytic Jacobian, started from the κ = 0
/// two-level fit. If Newton stalls, falls back to bisection on `b` with θ
/// eliminated by normalization.
pub fn solve_ensemble(
    problem: &EnsembleProblem,
    options: SolverOptions,
) -> Result<EnsembleSolution> {
    problem.validate()?;
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "solver requires tol > 0 and max_iter >= 1".into(),
        ));
    }
    let kappa = problem.kappa;
    let alpha = stationary_prefactor(kappa);
    let e_min = problem
        .energies
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let e_max = problem
        .energies
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let target = problem.target_energy;
    let span = e_max - e_min;

    if span == 0.0 {
        return degenerate(problem, alpha, e_min, options.tol);
    }
    if !(target > e_min && target < e_max) {
        return Err(Error::Infeasible {
            target,
            min: e_min,
            max: e_max,
        });
    }

    let scaled = Scaled {
        e: problem
            .energies
            .iter()
            .map(|&e| (e - e_min) / span)
            .collect(),
        u: (target - e_min) / span,
        alpha,
        kappa,
        problem,
        e_min,
        span,
    };

    let b0 = ((1.0 - scaled.u) / scaled.u).ln();
    let theta0 = scaled.normalizing_shift(b0).unwrap_or(0.0);

    let (b, theta, iterations, method) = match newton(&scaled, b0, theta0, options) {
        Ok((b, theta, it)) => (b, theta, it, SolveMethod::Newton),
        Err(newton_iters) => {
            let (b, theta, it) = nested_bisection(&scaled, b0, options)?;
            (b, theta, newton_iters + it, SolveMethod::Bisection)
        }
    };
    Ok(finish(&scaled, b, theta, iterations, method))
}

/// Returns `Err(iterations)` when Newton stalls or runs out of budget.
///
/// Once the tolerance is met, up to [`POLISH_STEPS`] further steps are taken
/// while they keep reducing the residual.
fn newton(
    s: &Scaled,
    mut b: f64,
    mut theta: f64,
    options: SolverOptions,
) -> std::result::Result<(f64, f64, usize), usize> {
    let mut cur = s.eval(b, theta);
    let mut polished = 0;
    for it in 0..options.max_iter {
        let done = s.accepts(b, theta, options.tol);
        if done && polished >= POLISH_STEPS {
            return Ok((b, theta, it));
        }
        // J = [[Σw, −Σew], [Σew, −Σe²w]] for d/d(θ, b)
        let (j11, j12, j21, j22) = (cur.s_w, -cur.s_ew, cur.s_ew, -cur.s_eew);
        let det = j11 * j22 - j12 * j21;
        let step_ok = det != 0.0 && det.is_finite();
        let d_theta = -(j22 * cur.r_norm - j12 * cur.r_energy) / det;
        let d_b = -(-j21 * cur.r_norm + j11 * cur.r_energy) / det;

        let base = cur.norm();
        let mut step = 1.0;
        let accepted = loop {
            if !step_ok {
                break None;
            }
            let (nb, nt) = (b + step * d_b, theta + step * d_theta);
            let trial = s.eval(nb, nt);
            if trial.norm() < (1.0 - 1e-4 * step) * base {
                break Some((nb, nt, trial));
            }
            // no line search while polishing
            step *= 0.5;
            if done || step < 1e-12 {
                break None;
            }
        };
        match accepted {
            Some((nb, nt, trial)) => {
                b = nb;
                theta = nt;
                cur = trial;
                if done {
                    polished += 1;
                }
            }
            None => return if done { Ok((b, theta, it)) } else { Err(it) },
        }
    }
    if s.accepts(b, theta, options.tol) {
        Ok((b, theta, options.max_iter))
    } else {
        Err(options.max_iter)
    }
}

fn nested_bisection(s: &Scaled, b0: f64, options: SolverOptions) -> Result<(f64, f64, usize)> {
    let divergence = |b: f64, theta: f64, iterations: usize| {
        let (rn, re) = s.residuals(b, theta);
        Error::Divergence {
            iterations,
            residual: rn.hypot(re),
        }
    };
    // The normalized mean is decreasing in b.
    let mean = |b: f64| s.scaled_mean(b).map(|(_, m)| m);
    let mut iterations = 0;
    let (mut lo, mut hi) = (b0 - 1.0, b0 + 1.0);
    loop {
        match (mean(lo), mean(hi)) {
            (Some(mlo), Some(mhi)) if mlo >= s.u && mhi <= s.u => break,
            (Some(mlo), Some(_)) => {
                if mlo < s.u {
                    lo -= 2.0 * (hi - lo);
                } else {
                    hi += 2.0 * (hi - lo);
                }
            }
            _ => {
                return Err(divergence(
                    b0,
                    s.normalizing_shift(b0).unwrap_or(0.0),
                    iterations,
                ))
            }
        }
        iterations += 1;
        if iterations > options.max_iter || !lo.is_finite() || !hi.is_finite() {
            return Err(divergence(
                b0,
                s.normalizing_shift(b0).unwrap_or(0.0),
                iterations,
            ));
        }
    }
    while iterations < options.max_iter.max(1100) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= RESOLUTION {
            break;
        }
        match mean(mid) {
            Some(m) if m > s.u => lo = mid,
            Some(_) => hi = mid,
            None => break,
        }
        iterations += 1;
    }
    let b = 0.5 * (lo + hi);
    let theta = s
        .normalizing_shift(b)
        .ok_or_else(|| divergence(b, 0.0, iterations))?;
    if s.accepts(b, theta, options.tol) {
        Ok((b, theta, iterations))
    } else {
        Err(divergence(b, theta, iterations))
    }
}

fn finish(
    s: &Scaled,
    b: f64,
    theta: f64,
    iterations: usize,
    method: SolveMethod,
) -> EnsembleSolution {
    let probabilities: Vec<f64> = s.e.iter().map(|&e| s.weight(b, theta, e)).collect();
    let (rn, re) = s.residuals(b, theta);
    let beta = b / s.span;
    let ensemble = PathEnsemble::from_parts(s.problem.energies.clone(), probabilities);
    EnsembleSolution {
        ensemble,
        alpha: s.alpha,
        beta,
        shift: theta,
        e_ref: s.e_min,
        mu: (beta != 0.0).then(|| s.e_min + theta / beta),
        lambda_t: (beta != 0.0).then(|| 1.0 / beta),
        energy_rescaling: beta * s.problem.lambda * s.problem.temperature,
        normalization_residual: rn,
        energy_residual: re,
        residual_norm: rn.hypot(re),
        iterations,
        converged: true,
        method,
    }
}

fn degenerate(
    problem: &EnsembleProblem,
    alpha: f64,
    level: f64,
    tol: f64,
) -> Result<EnsembleSolution> {
    let target = problem.target_energy;
    let energy_residual = level - target;
    if energy_residual.abs() > tol * target.abs().max(1.0) {
        return Err(Error::Infeasible {
            target,
            min: level,
            max: level,
        });
    }
    let n = problem.energies.len();
    let p = 1.0 / n as f64;
    let shift = problem.kappa.ln_unchecked(p / alpha);
    Ok(EnsembleSolution {
        ensemble: PathEnsemble::new(problem.energies.clone(), vec![p; n])?,
        alpha,
        beta: 0.0,
        shift,
        e_ref: level,
        mu: None,
        lambda_t: None,
        energy_rescaling: 0.0,
        normalization_residual: 0.0,
        energy_residual,
        residual_norm: energy_residual.abs(),
        iterations: 0,
        converged: true,
        method: SolveMethod::Degenerate,
    })
}
