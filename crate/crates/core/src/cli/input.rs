//! Input documents.
//!
//! Problems are TOML documents, one schema per command; unknown keys are
//! rejected. Ensembles may also be given as CSV tables with the header
//! `energy` or `energy,probability`.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ergodic::MapSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalDoc {
    pub kappa: Option<f64>,
    /// Arguments of exp_κ.
    #[serde(default)]
    pub tau: Vec<f64>,
    /// Arguments of ln_κ and ln_κ′.
    #[serde(default)]
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveDoc {
    pub energies: Option<Vec<f64>>,
    /// CSV table with an `energy` column, relative to the document.
    pub energies_file: Option<PathBuf>,
    #[serde(alias = "U")]
    pub target_energy: f64,
    pub kappa: Option<f64>,
    pub temperature: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleDoc {
    pub kappa: Option<f64>,
    pub probabilities: Option<Vec<f64>>,
    /// Defaults to zero for every path.
    pub energies: Option<Vec<f64>>,
    /// CSV table with `energy,probability` columns, relative to the document.
    pub ensemble_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirkhoffDoc {
    pub map: MapSpec,
    pub observable: String,
    pub x0: f64,
    pub steps: usize,
    /// Defaults to the observable's Lebesgue mean.
    pub space_average: Option<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitDoc {
    pub map: MapSpec,
    pub observable: String,
    pub x0: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyStateDoc {
    /// Observable samples; alternatively generated from `orbit`.
    pub values: Option<Vec<f64>>,
    pub orbit: Option<OrbitDoc>,
    pub dt: Option<f64>,
    pub zeta: f64,
    pub epsilon: f64,
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectralModel {
    /// ρ(λ) = value
    Constant { value: f64 },
    /// ρ(λ) = exp(−(λ/scale)²)
    Gaussian {
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl SpectralModel {
    pub fn density(&self, lambda: f64) -> f64 {
        match *self {
            SpectralModel::Constant { value } => value,
            SpectralModel::Gaussian { scale } => (-(lambda / scale).powi(2)).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralDoc {
    pub grid: Option<Vec<f64>>,
    pub density: Option<Vec<f64>>,
    /// Tabulated on `range` with `points` samples instead of explicit arrays.
    pub model: Option<SpectralModel>,
    pub range: Option<[f64; 2]>,
    pub points: Option<usize>,
    pub truncations: Option<Vec<f64>>,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseVolumeDoc {
    pub jacobian_dets: Option<Vec<f64>>,
    /// Uses the map's Jacobian along `steps` iterations instead.
    pub map: Option<MapSpec>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicDoc {
    #[serde(default)]
    pub birkhoff: Vec<BirkhoffDoc>,
    #[serde(default)]
    pub steady_state: Vec<SteadyStateDoc>,
    #[serde(default)]
    pub spectral: Vec<SpectralDoc>,
    #[serde(default)]
    pub phase_volume: Vec<PhaseVolumeDoc>,
}

/// Energies and probabilities loaded from a CSV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleTable {
    pub energies: Vec<f64>,
    pub probabilities: Option<Vec<f64>>,
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn parse_toml<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse(format!("{}: {}", path.display(), e.message())))
}

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_toml(&read_to_string(path)?, path)
}

pub fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Resolves `file` against the directory of the document that names it.
pub fn resolve_relative(document: &Path, file: &Path) -> PathBuf {
    if file.is_absolute() {
        file.to_path_buf()
    } else {
        document
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(file)
    }
}

/// Parses an ensemble table; the header must be `energy` or `energy,probability`.
pub fn parse_ensemble_csv(text: &str, origin: &Path) -> Result<EnsembleTable> {
    let parse_err = |msg: String| Error::Parse(format!("{}: {msg}", origin.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let with_probability = match headers.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["energy"] => false,
        ["energy", "probability"] => true,
        _ => {
            return Err(parse_err(format!(
                "header must be 'energy' or 'energy,probability', got '{}'",
                headers.join(",")
            )))
        }
    };
    let mut energies = Vec::new();
    let mut probabilities = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let field = |j: usize| -> Result<f64> {
            let raw = record.get(j).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| parse_err(format!("row {}: '{raw}' is not a number", i + 2)))
        };
        energies.push(field(0)?);
        if with_probability {
            probabilities.push(field(1)?);
        }
    }
    if energies.is_empty() {
        return Err(parse_err("table has no rows".into()));
    }
    Ok(EnsembleTable {
        energies,
        probabilities: with_probability.then_some(probabilities),
    })
}

pub fn load_ensemble_csv(path: &Path) -> Result<EnsembleTable> {
    parse_ensemble_csv(&read_to_string(path)?, path)
}
