use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kappa_fn::KappaParam;

/// Environment variable selecting the default solver tolerances.
pub const TOLERANCE_PROFILE_ENV: &str = "KAPPASTAT_TOLERANCE_PROFILE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Evaluate exp_κ, ln_κ and ln_κ′ at given points.
    Eval,
    /// Solve for the stationary ensemble at a target mean energy.
    Solve,
    /// κ-entropy and entropy derivative of an ensemble.
    Entropy,
    /// Stability criterion on path probabilities.
    Stability,
    /// Macroscopic entropy generation, lost work and Lagrangian.
    Thermo,
    /// Birkhoff, steady-state, Wiener–Krein and phase-volume diagnostics.
    Ergodic,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eval => "eval",
            Command::Solve => "solve",
            Command::Entropy => "entropy",
            Command::Stability => "stability",
            Command::Thermo => "thermo",
            Command::Ergodic => "ergodic",
        }
    }

    /// Whether κ is an input of this command.
    pub fn uses_kappa(self) -> bool {
        !matches!(self, Command::Thermo | Command::Ergodic)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// Machine-readable JSON report.
    #[default]
    Report,
    /// Plain-text key/value summary.
    Summary,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceProfile {
    #[default]
    Default,
    Strict,
    Loose,
}

impl ToleranceProfile {
    pub fn from_env() -> Result<Self> {
        match std::env::var(TOLERANCE_PROFILE_ENV) {
            Ok(v) => ToleranceProfile::parse(&v),
            Err(std::env::VarError::NotPresent) => Ok(ToleranceProfile::Default),
            Err(e) => Err(Error::Config(format!("{TOLERANCE_PROFILE_ENV}: {e}"))),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "" | "default" => Ok(ToleranceProfile::Default),
            "strict" => Ok(ToleranceProfile::Strict),
            "loose" => Ok(ToleranceProfile::Loose),
            other => Err(Error::Config(format!(
                "unknown tolerance profile '{other}' (expected default, strict or loose)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ToleranceProfile::Default => "default",
            ToleranceProfile::Strict => "strict",
            ToleranceProfile::Loose => "loose",
        }
    }

    pub fn tol(self) -> f64 {
        match self {
            ToleranceProfile::Default => 1e-10,
            ToleranceProfile::Strict => 1e-12,
            ToleranceProfile::Loose => 1e-8,
        }
    }

    pub fn max_iter(self) -> usize {
        match self {
            ToleranceProfile::Default => 200,
            ToleranceProfile::Strict => 500,
            ToleranceProfile::Loose => 100,
        }
    }
}

/// Everything needed to reproduce a run. Echoed verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub input_path: PathBuf,
    pub output_path: Option<PathBuf>,
    pub kappa: Option<f64>,
    pub kappa_sweep: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub format: Format,
}

impl RunConfig {
    pub fn new(command: Command, input_path: impl Into<PathBuf>) -> Self {
        RunConfig {
            command,
            input_path: input_path.into(),
            output_path: None,
            kappa: None,
            kappa_sweep: None,
            tol: None,
            max_iter: None,
            format: Format::Report,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.kappa {
            KappaParam::new(k)?;
        }
        if let Some(sweep) = &self.kappa_sweep {
            if sweep.is_empty() {
                return Err(Error::Config(
                    "--kappa-sweep needs at least one value".into(),
                ));
            }
            for &k in sweep {
                KappaParam::new(k)?;
            }
        }
        if !self.command.uses_kappa() && (self.kappa.is_some() || self.kappa_sweep.is_some()) {
            return Err(Error::Config(format!(
                "command '{}' does not take a kappa",
                self.command.name()
            )));
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "--tol must be positive, got {tol}"
                )));
            }
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidParameter(
                "--max-iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Command-line arguments.
#[derive(Debug, Parser)]
#[command(
    name = "kappastat",
    version,
    about = "κ-generalized statistical mechanics toolkit"
)]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,

    /// Problem document (TOML) or ensemble table (CSV).
    #[arg(long)]
    pub input: PathBuf,

    /// Report destination; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Override the document's kappa.
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,

    /// Comma-separated kappa values; results are reported in ascending order.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub kappa_sweep: Option<Vec<f64>>,

    /// Solver tolerance.
    #[arg(long, allow_hyphen_values = true)]
    pub tol: Option<f64>,

    /// Solver iteration budget.
    #[arg(long)]
    pub max_iter: Option<usize>,

    #[arg(long, value_enum, default_value_t = Format::Report)]
    pub format: Format,
}

impl From<Args> for RunConfig {
    fn from(a: Args) -> Self {
        RunConfig {
            command: a.command,
            input_path: a.input,
            output_path: a.output,
            kappa: a.kappa,
            kappa_sweep: a.kappa_sweep,
            tol: a.tol,
            max_iter: a.max_iter,
            format: a.format,
        }
    }
}
