//! Ergodic diagnostics: Birkhoff time averages on a few interval maps,
//! ε-steady-state detection, the Wiener–Krein regularity integral and the
//! phase-volume contraction rate.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Modulus of the fixed-point doubling map: a safe prime `p ≡ 3 (mod 8)`, so
/// 2 is a primitive root and every non-zero orbit has period `p − 1`.
pub const DOUBLING_MODULUS: u64 = 4_611_686_018_427_377_339;

/// Default truncation ladder for [`wiener_krein_integral`].
pub const DEFAULT_TRUNCATIONS: [f64; 4] = [2.0, 4.0, 8.0, 16.0];

/// Default Cauchy gap between the last two truncations.
pub const DEFAULT_CAUCHY_GAP: f64 = 1e-3;

/// A map of the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    /// x ↦ x + ω (mod 1)
    Rotation { frequency: f64 },
    /// x ↦ 2x (mod 1), iterated exactly on a fixed-point grid.
    Doubling,
    /// x ↦ a·x + b (mod 1), 0 < a < 1
    AffineContraction { factor: f64, offset: f64 },
}

impl MapSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MapSpec::Rotation { frequency } if !frequency.is_finite() => Err(
                Error::InvalidParameter("rotation frequency must be finite".into()),
            ),
            MapSpec::AffineContraction { factor, offset }
                if !(factor > 0.0 && factor < 1.0) || !offset.is_finite() =>
            {
                Err(Error::InvalidParameter(format!(
                    "contraction factor must lie in (0, 1), got {factor}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// The orbit `x0, S x0, S² x0, …`.
    pub fn orbit(&self, x0: f64) -> Result<Orbit> {
        self.validate()?;
        if !x0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "initial point must be finite, got {x0}"
            )));
        }
        let x = wrap_unit(x0);
        let state = match *self {
            MapSpec::Doubling => {
                let n = (x * DOUBLING_MODULUS as f64) as u64 % DOUBLING_MODULUS;
                OrbitState::Fixed(n)
            }
            _ => OrbitState::Float(x),
        };
        Ok(Orbit { map: *self, state })
    }

    /// |det J|; constant for these piecewise-linear maps.
    pub fn jacobian_det(&self) -> f64 {
        match *self {
            MapSpec::Rotation { .. } => 1.0,
            MapSpec::Doubling => 2.0,
            MapSpec::AffineContraction { factor, .. } => factor,
        }
    }
}

fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy)]
enum OrbitState {
    Float(f64),
    Fixed(u64),
}

/// Infinite iterator over the points of an orbit.
#[derive(Debug, Clone)]
pub struct Orbit {
    map: MapSpec,
    state: OrbitState,
}

impl Iterator for Orbit {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let (current, next) = match (self.state, self.map) {
            (OrbitState::Fixed(n), _) => {
                // 2n < 2^63 since the modulus is below 2^62
                let next = (2 * n) % DOUBLING_MODULUS;
                (n as f64 / DOUBLING_MODULUS as f64, OrbitState::Fixed(next))
            }
            (OrbitState::Float(x), MapSpec::Rotation { frequency }) => {
                (x, OrbitState::Float(wrap_unit(x + frequency)))
            }
            (OrbitState::Float(x), MapSpec::AffineContraction { factor, offset }) => {
                (x, OrbitState::Float(wrap_unit(factor * x + offset)))
            }
            (OrbitState::Float(x), MapSpec::Doubling) => (x, OrbitState::Float(wrap_unit(2.0 * x))),
        };
        self.state = next;
        Some(current)
    }
}

/// Observables available to the Birkhoff check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Observable {
    Cos2Pi,
    Sin2Pi,
    Identity,
    /// Indicator of [0, ½).
    LowerHalf,
}

impl Observable {
    pub const ALL: [Observable; 4] = [
        Observable::Cos2Pi,
        Observable::Sin2Pi,
        Observable::Identity,
        Observable::LowerHalf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::Cos2Pi => "cos2pi",
            Observable::Sin2Pi => "sin2pi",
            Observable::Identity => "x",
            Observable::LowerHalf => "indicator_lower_half",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Observable::ALL
            .into_iter()
            .find(|o| o.name() == name)
            .ok_or_else(|| {
                let known: Vec<_> = Observable::ALL.iter().map(|o| o.name()).collect();
                Error::Config(format!(
                    "unknown observable '{name}' (known: {})",
                    known.join(", ")
                ))
            })
    }

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Observable::Cos2Pi => (2.0 * PI * x).cos(),
            Observable::Sin2Pi => (2.0 * PI * x).sin(),
            Observable::Identity => x,
            Observable::LowerHalf => {
                if x < 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Mean with respect to Lebesgue measure on [0, 1).
    pub fn lebesgue_mean(self) -> f64 {
        match self {
            Observable::Cos2Pi | Observable::Sin2Pi => 0.0,
            Observable::Identity | Observable::LowerHalf => 0.5,
        }
    }
}

impl TryFrom<String> for Observable {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Observable::from_name(&s)
    }
}

impl From<Observable> for String {
    fn from(o: Observable) -> String {
        o.name().to_string()
    }
}

/// Observable values sampled along a trajectory at spacing `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    values: Vec<f64>,
    dt: f64,
}

impl ObservableSeries {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("observable series must not be empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "observable series values must be finite".into(),
            ));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        Ok(ObservableSeries { values, dt })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Total sampled duration.
    pub fn duration(&self) -> f64 {
        self.values.len() as f64 * self.dt
    }
}

/// ⟨φ⟩ = (1/T)·Σ φ_j·dt over the series.
pub fn time_average(series: &ObservableSeries) -> f64 {
    series.values.iter().sum::<f64>() * series.dt / series.duration()
}

/// Running averages ⟨φ⟩_1, ⟨φ⟩_2, …, ⟨φ⟩_N.
pub fn running_averages(series: &ObservableSeries) -> Vec<f64> {
    let mut sum = 0.0;
    series
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            sum += v;
            sum / (i + 1) as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BirkhoffReport {
    pub time_average: f64,
    pub space_average: f64,
    pub deviation: f64,
    pub tol: f64,
    pub steps: usize,
    pub pass: bool,
}

/// Time average of `observable` over `steps` points of the orbit of `x0`,
/// compared against a supplied space average.
pub fn birkhoff_check(
    map: &MapSpec,
    observable: Observable,
    x0: f64,
    steps: usize,
    space_average: f64,
    tol: f64,
) -> Result<BirkhoffReport> {
    if steps == 0 {
        return Err(Error::Domain(
            "birkhoff check needs at least one step".into(),
        ));
    }
    if !(tol >= 0.0) || !space_average.is_finite() {
        return Err(Error::InvalidParameter(
            "tolerance must be non-negative and the space average finite".into(),
        ));
    }
    let sum: f64 = map.orbit(x0)?.take(steps).map(|x| observable.eval(x)).sum();
    let time_average = sum / steps as f64;
    let deviation = (time_average - space_average).abs();
    Ok(BirkhoffReport {
        time_average,
        space_average,
        deviation,
        tol,
        steps,
        pass: deviation <= tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyStateSpec {
    pub zeta: f64,
    pub epsilon: f64,
    pub window: usize,
}

impl SteadyStateSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.zeta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive and zeta finite (epsilon = {}, zeta = {})",
                self.epsilon, self.zeta
            )));
        }
        if self.window == 0 {
            return Err(Error::InvalidParameter("window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Largest |⟨φ⟩_t − ζ| over the trailing `window` running averages.
pub fn steady_state_deviation(series: &ObservableSeries, spec: &SteadyStateSpec) -> Result<f64> {
    spec.validate()?;
    let averages = running_averages(series);
    if spec.window > averages.len() {
        return Err(Error::Domain(format!(
            "window {} exceeds the {} available running averages",
            spec.window,
            averages.len()
        )));
    }
    Ok(averages[averages.len() - spec.window..]
        .iter()
        .map(|a| (a - spec.zeta).abs())
        .fold(0.0, f64::max))
}

/// True iff every trailing running average lies within ε of ζ.
pub fn epsilon_steady_state(series: &ObservableSeries, spec: &SteadyStateSpec) -> Result<bool> {
    Ok(steady_state_deviation(series, spec)? <= spec.epsilon)
}

/// A tabulated, absolutely continuous spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    grid: Vec<f64>,
    density: Vec<f64>,
}

impl SpectralDensity {
    pub fn new(grid: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != density.len() {
            return Err(Error::InvalidParameter(format!(
                "spectral density needs matching grid and density of length >= 2 (got {} and {})",
                grid.len(),
                density.len()
            )));
        }
        if grid.iter().chain(&density).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "spectral density values must be finite".into(),
            ));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "frequency grid must be strictly increasing".into(),
            ));
        }
        if density.iter().any(|&d| d < 0.0) {
            return Err(Error::InvalidParameter(
                "spectral density must be non-negative".into(),
            ));
        }
        Ok(SpectralDensity { grid, density })
    }

    /// Samples `f` on `n` equally spaced points of `[lo, hi]`.
    pub fn tabulate(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(Error::InvalidParameter(
                "tabulation needs n >= 2 and hi > lo".into(),
            ));
        }
        let grid: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let density = grid.iter().map(|&x| f(x)).collect();
        SpectralDensity::new(grid, density)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularity {
    Regular,
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceReason {
    /// The density vanishes somewhere on the grid.
    ZeroDensity,
    /// The tail-corrected integrals do not settle within the gap.
    NotSettled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedIntegral {
    pub cutoff: f64,
    /// ∫_{−Λ}^{Λ} ln ρ(λ)/(1+λ²) dλ; `None` when ρ vanishes inside the range (the integral is −∞).
    pub integral: Option<f64>,
    /// `integral` plus the tail beyond ±Λ with ln ρ held at its edge values.
    pub tail_corrected: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WienerKreinReport {
    pub truncations: Vec<TruncatedIntegral>,
    /// Distance between the last two tail-corrected integrals.
    pub cauchy_gap: Option<f64>,
    pub gap_threshold: f64,
    /// Raw truncated integrals are strictly decreasing in Λ.
    pub decreasing: bool,
    pub verdict: Regularity,
    pub reason: Option<DivergenceReason>,
}

/// Linear interpolation of samples `ys` on `xs` at `x` (inside the grid).
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = match xs.partition_point(|&g| g <= x) {
        0 => 0,
        i if i >= xs.len() => xs.len() - 2,
        i => i - 1,
    };
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// `∫_a^b y(λ)/(1+λ²) dλ` with `y` the piecewise-linear interpolant of the
/// samples, integrated exactly on each cell clipped to `[a, b]`.
fn weighted_integral(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..xs.len() - 1 {
        let (x0, x1) = (xs[i].max(a), xs[i + 1].min(b));
        if x1 <= x0 {
            continue;
        }
        let slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        let y0 = ys[i] + slope * (x0 - xs[i]);
        // ∫ (y0 + s(λ − x0))/(1+λ²) = (y0 − s x0)·Δatan + (s/2)·ln((1+x1²)/(1+x0²))
        let datan = (x1 - x0).atan2(1.0 + x0 * x1);
        let dlog = ((x1 - x0) * (x1 + x0) / (1.0 + x0 * x0)).ln_1p();
        total += (y0 - slope * x0) * datan + 0.5 * slope * dlog;
    }
    total
}

/// Truncated Wiener–Krein integrals `∫_{−Λ}^{Λ} ln ρ(λ)/(1+λ²) dλ` on a ladder of cutoffs.
///
/// The verdict is `Regular` when the last two tail-corrected values differ by
/// at most `gap_threshold`. Each tail `∫_Λ^∞ ln ρ/(1+λ²)` is approximated with
/// ln ρ frozen at its value at the cutoff, which is exact for constant
/// densities and grows without bound when ln ρ does.
pub fn wiener_krein_integral(
    density: &SpectralDensity,
    truncations: &[f64],
    gap_threshold: f64,
) -> Result<WienerKreinReport> {
    if truncations.len() < 2 {
        return Err(Error::Domain("at least two truncations are needed".into()));
    }
    if truncations.windows(2).any(|w| w[1] <= w[0]) || truncations[0] <= 0.0 {
        return Err(Error::Domain(
            "truncations must be positive and increasing".into(),
        ));
    }
    let (lo, hi) = (density.grid[0], density.grid[density.grid.len() - 1]);
    let last = truncations[truncations.len() - 1];
    if -last < lo || last > hi {
        return Err(Error::Domain(format!(
            "truncation {last} exceeds the frequency grid [{lo}, {hi}]"
        )));
    }
    if !(gap_threshold > 0.0) {
        return Err(Error::InvalidParameter(
            "gap threshold must be positive".into(),
        ));
    }

    let grid = &density.grid;
    let log_density: Vec<f64> = density.density.iter().map(|d| d.ln()).collect();

    let truncations: Vec<TruncatedIntegral> = truncations
        .iter()
        .map(|&cutoff| {
            let has_zero = grid
                .iter()
                .zip(&density.density)
                .enumerate()
                .any(|(i, (&l, &d))| {
                    d == 0.0 && {
                        // the cell touching a zero sample counts if it overlaps the range
                        let left = if i > 0 { grid[i - 1] } else { l };
                        let right = if i + 1 < grid.len() { grid[i + 1] } else { l };
                        right > -cutoff && left < cutoff
                    }
                });
            if has_zero {
                return TruncatedIntegral {
                    cutoff,
                    integral: None,
                    tail_corrected: None,
                };
            }
            let integral = weighted_integral(grid, &log_density, -cutoff, cutoff);
            let tail_weight = FRAC_PI_2 - cutoff.atan();
            let edges =
                interpolate(grid, &log_density, -cutoff) + interpolate(grid, &log_density, cutoff);
            TruncatedIntegral {
                cutoff,
                integral: Some(integral),
                tail_corrected: Some(integral + edges * tail_weight),
            }
        })
        .collect();

    let any_zero = density.density.contains(&0.0);
    let decreasing = truncations
        .windows(2)
        .all(|w| match (w[0].integral, w[1].integral) {
            (Some(a), Some(b)) => b < a,
            (Some(_), None) => true,
            _ => false,
        });
    let n = truncations.len();
    let cauchy_gap = match (
        truncations[n - 2].tail_corrected,
        truncations[n - 1].tail_corrected,
    ) {
        (Some(a), Some(b)) => Some((b - a).abs()),
        _ => None,
    };
    let (verdict, reason) = if any_zero {
        (Regularity::Divergent, Some(DivergenceReason::ZeroDensity))
    } else if cauchy_gap.is_some_and(|g| g <= gap_threshold) {
        (Regularity::Regular, None)
    } else {
        (Regularity::Divergent, Some(DivergenceReason::NotSettled))
    };
    Ok(WienerKreinReport {
        truncations,
        cauchy_gap,
        gap_threshold,
        decreasing,
        verdict,
        reason,
    })
}

/// Mean of ln|det J| along a trajectory; negative means phase volume contracts.
pub fn phase_volume_rate(jacobian_dets: &[f64]) -> Result<f64> {
    if jacobian_dets.is_empty() {
        return Err(Error::Domain(
            "at least one Jacobian determinant is required".into(),
        ));
    }
    let mut sum = 0.0;
    for &d in jacobian_dets {
        if d == 0.0 || !d.is_finite() {
            return Err(Error::Domain(format!(
                "degenerate Jacobian determinant {d}"
            )));
        }
        sum += d.abs().ln();
    }
    Ok(sum / jacobian_dets.len() as f64)
}
