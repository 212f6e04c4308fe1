//! Batch front end: reads a problem document, dispatches to the computational
//! modules and renders a report.
//!
//! Reports are JSON objects with the blocks `input_echo`, `result` (or
//! `error`), `diagnostics` and `provenance`. Object keys are sorted and floats
//! use the shortest round-trip representation, so identical inputs give
//! byte-identical reports.

pub mod config;
pub mod input;

use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::ensemble::{mean_energy, solve_ensemble, EnsembleProblem, PathEnsemble, SolverOptions};
use crate::entropy::{
    entropy_derivative, kappa_entropy, lost_work, stability_ratio, thermo_entropy_generation,
    thermodynamic_lagrangian, ThermoState,
};
use crate::ergodic::{
    birkhoff_check, phase_volume_rate, running_averages, steady_state_deviation,
    wiener_krein_integral, Observable, ObservableSeries, SpectralDensity, SteadyStateSpec,
    DEFAULT_CAUCHY_GAP, DEFAULT_TRUNCATIONS,
};
use crate::error::{Error, Result};
use crate::kappa_fn::KappaParam;

pub use config::{Args, Command, Format, RunConfig, ToleranceProfile, TOLERANCE_PROFILE_ENV};
use input::{EnsembleDoc, EnsembleTable, ErgodicDoc, EvalDoc, OrbitDoc, SolveDoc, SpectralDoc};

pub const ARTIFACT: &str = "kappastat";

/// Rendered output and process exit status of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub output: String,
    pub error: Option<Error>,
}

/// Runs one command and renders its report. Never panics on bad input; every
/// failure becomes an error report with a machine-readable code.
pub fn run(config: &RunConfig, profile: ToleranceProfile) -> Outcome {
    let options = SolverOptions {
        tol: config.tol.unwrap_or(profile.tol()),
        max_iter: config.max_iter.unwrap_or(profile.max_iter()),
    };
    let provenance = json!({
        "artifact": ARTIFACT,
        "version": env!("CARGO_PKG_VERSION"),
        "tolerance_profile": profile.name(),
        "tol": options.tol,
        "max_iter": options.max_iter,
    });

    let mut document = None;
    let computed = config
        .validate()
        .and_then(|()| execute(config, options, &mut document));

    let mut echo = Map::new();
    echo.insert(
        "config".into(),
        serde_json::to_value(config).unwrap_or(Value::Null),
    );
    echo.insert("document".into(), document.unwrap_or(Value::Null));

    let mut report = Map::new();
    report.insert("input_echo".into(), Value::Object(echo));
    report.insert("provenance".into(), provenance);
    let (exit_code, error) = match computed {
        Ok((result, diagnostics)) => {
            report.insert("result".into(), result);
            report.insert("diagnostics".into(), diagnostics);
            (0, None)
        }
        Err(e) => {
            report.insert(
                "error".into(),
                json!({ "code": e.code(), "message": e.to_string() }),
            );
            report.insert("diagnostics".into(), json!({}));
            (e.exit_code(), Some(e))
        }
    };
    let report = Value::Object(report);
    let output = match config.format {
        Format::Report => {
            let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Summary => render_summary(config.command, &report),
    };
    Outcome {
        exit_code,
        output,
        error,
    }
}

/// Parses command-line arguments, runs, and writes the output. Returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;

    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            if !e.use_stderr() {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            eprintln!(
                "{}",
                json!({ "error": { "code": "usage_error", "message": e.kind().to_string() } })
            );
            return 2;
        }
    };
    let config = RunConfig::from(args);
    let profile = match ToleranceProfile::from_env() {
        Ok(p) => p,
        Err(e) => {
            eprintln!(
                "{}",
                json!({ "error": { "code": e.code(), "message": e.to_string() } })
            );
            return e.exit_code();
        }
    };
    let outcome = run(&config, profile);
    if let Some(e) = &outcome.error {
        eprintln!("kappastat: {e}");
    }
    match &config.output_path {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &outcome.output) {
                let err = Error::Io(format!("{}: {e}", path.display()));
                eprintln!(
                    "{}",
                    json!({ "error": { "code": err.code(), "message": err.to_string() } })
                );
                return err.exit_code();
            }
        }
        None => print!("{}", outcome.output),
    }
    outcome.exit_code
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn execute(
    config: &RunConfig,
    options: SolverOptions,
    document: &mut Option<Value>,
) -> Result<(Value, Value)> {
    let path = config.input_path.as_path();
    match config.command {
        Command::Eval => {
            let doc: EvalDoc = input::load_toml(path)?;
            *document = Some(to_value(&doc));
            for_each_kappa(config, doc.kappa, |k| eval_at(&doc, k))
        }
        Command::Solve => {
            let doc: SolveDoc = input::load_toml(path)?;
            *document = Some(to_value(&doc));
            let energies = solve_energies(&doc, path)?;
            for_each_kappa(config, doc.kappa, |k| solve_at(&doc, &energies, k, options))
        }
        Command::Entropy | Command::Stability => {
            let (doc_kappa, ensemble) = load_ensemble(path, document)?;
            let stability = config.command == Command::Stability;
            for_each_kappa(config, doc_kappa, |k| {
                if stability {
                    stability_at(&ensemble, k)
                } else {
                    Ok(entropy_at(&ensemble, k))
                }
            })
        }
        Command::Thermo => {
            let state: ThermoState = input::load_toml(path)?;
            *document = Some(to_value(&state));
            let s_g = thermo_entropy_generation(&state)?;
            let result = json!({
                "entropy_generation": s_g,
                "lost_work": lost_work(&state)?,
                "lagrangian": thermodynamic_lagrangian(s_g, state.t_ref)?,
            });
            Ok((result, json!({})))
        }
        Command::Ergodic => {
            let doc: ErgodicDoc = input::load_toml(path)?;
            *document = Some(to_value(&doc));
            ergodic(&doc)
        }
    }
}

/// κ values for this run, ascending, and whether they form a sweep.
fn kappas(config: &RunConfig, doc_kappa: Option<f64>) -> Result<(Vec<KappaParam>, bool)> {
    if let Some(sweep) = &config.kappa_sweep {
        let mut ks = sweep
            .iter()
            .map(|&k| KappaParam::new(k))
            .collect::<Result<Vec<_>>>()?;
        ks.sort_by(|a, b| a.value().total_cmp(&b.value()));
        ks.dedup();
        return Ok((ks, true));
    }
    let k = config.kappa.or(doc_kappa).ok_or_else(|| {
        Error::Config("kappa must be given in the document or with --kappa".into())
    })?;
    Ok((vec![KappaParam::new(k)?], false))
}

fn for_each_kappa<F>(config: &RunConfig, doc_kappa: Option<f64>, f: F) -> Result<(Value, Value)>
where
    F: Fn(KappaParam) -> Result<(Value, Value)> + Sync,
{
    let (ks, sweep) = kappas(config, doc_kappa)?;
    if !sweep {
        return f(ks[0]);
    }
    let entries = ks.par_iter().map(|&k| f(k)).collect::<Vec<_>>();
    let mut results = Vec::with_capacity(entries.len());
    let mut diagnostics = Vec::with_capacity(entries.len());
    for (k, entry) in ks.iter().zip(entries) {
        let (r, d) = entry?;
        results.push(json!({ "kappa": k.value(), "result": r }));
        diagnostics.push(json!({ "kappa": k.value(), "diagnostics": d }));
    }
    Ok((json!({ "sweep": results }), json!({ "sweep": diagnostics })))
}

fn eval_at(doc: &EvalDoc, k: KappaParam) -> Result<(Value, Value)> {
    let exp = doc
        .tau
        .iter()
        .map(|&tau| Ok(json!({ "tau": tau, "value": k.exp(tau)? })))
        .collect::<Result<Vec<_>>>()?;
    let log = doc
        .x
        .iter()
        .map(|&x| Ok(json!({ "x": x, "value": k.ln(x)?, "derivative": k.ln_deriv(x)? })))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        json!({ "kappa": k.value(), "exp": exp, "log": log }),
        json!({ "points": doc.tau.len() + doc.x.len() }),
    ))
}

fn solve_energies(doc: &SolveDoc, path: &Path) -> Result<Vec<f64>> {
    match (&doc.energies, &doc.energies_file) {
        (Some(e), None) => Ok(e.clone()),
        (None, Some(file)) => {
            Ok(input::load_ensemble_csv(&input::resolve_relative(path, file))?.energies)
        }
        _ => Err(Error::Config(
            "give exactly one of 'energies' and 'energies_file'".into(),
        )),
    }
}

fn solve_at(
    doc: &SolveDoc,
    energies: &[f64],
    k: KappaParam,
    options: SolverOptions,
) -> Result<(Value, Value)> {
    let mut problem = EnsembleProblem::new(energies.to_vec(), doc.target_energy, k);
    if let Some(t) = doc.temperature {
        problem = problem.with_temperature(t);
    }
    if let Some(l) = doc.lambda {
        problem = problem.with_lambda(l);
    }
    let s = solve_ensemble(&problem, options)?;
    let result = json!({
        "kappa": k.value(),
        "energies": s.ensemble.energies(),
        "probabilities": s.ensemble.probabilities(),
        "alpha": s.alpha,
        "beta": s.beta,
        "shift": s.shift,
        "e_ref": s.e_ref,
        "mu": s.mu,
        "lambda_t": s.lambda_t,
        "energy_rescaling": s.energy_rescaling,
        "mean_energy": mean_energy(&s.ensemble),
        "kappa_entropy": kappa_entropy(&s.ensemble, k),
    });
    let diagnostics = json!({
        "iterations": s.iterations,
        "residual_norm": s.residual_norm,
        "normalization_residual": s.normalization_residual,
        "energy_residual": s.energy_residual,
        "method": s.method,
        "converged": s.converged,
    });
    Ok((result, diagnostics))
}

fn load_ensemble(path: &Path, document: &mut Option<Value>) -> Result<(Option<f64>, PathEnsemble)> {
    let (kappa, table, origin) = if input::is_csv(path) {
        let table = input::load_ensemble_csv(path)?;
        *document = Some(to_value(&table));
        (None, table, path.to_path_buf())
    } else {
        let doc: EnsembleDoc = input::load_toml(path)?;
        *document = Some(to_value(&doc));
        match (&doc.probabilities, &doc.ensemble_file) {
            (Some(p), None) => {
                let energies = doc.energies.clone().unwrap_or_else(|| vec![0.0; p.len()]);
                let table = EnsembleTable {
                    energies,
                    probabilities: Some(p.clone()),
                };
                (doc.kappa, table, path.to_path_buf())
            }
            (None, Some(file)) if doc.energies.is_none() => {
                let file = input::resolve_relative(path, file);
                (doc.kappa, input::load_ensemble_csv(&file)?, file)
            }
            _ => {
                return Err(Error::Config(
                    "give either 'probabilities' (with optional 'energies') or 'ensemble_file'"
                        .into(),
                ))
            }
        }
    };
    let probabilities = table.probabilities.ok_or_else(|| {
        Error::Parse(format!(
            "{}: ensemble needs a 'probability' column",
            origin.display()
        ))
    })?;
    Ok((kappa, PathEnsemble::new(table.energies, probabilities)?))
}

fn entropy_at(ensemble: &PathEnsemble, k: KappaParam) -> (Value, Value) {
    let derivative = entropy_derivative(ensemble, k).ok();
    (
        json!({
            "kappa": k.value(),
            "kappa_entropy": kappa_entropy(ensemble, k),
            "mean_energy": mean_energy(ensemble),
            "entropy_derivative": derivative,
        }),
        json!({ "paths": ensemble.len() }),
    )
}

fn stability_at(ensemble: &PathEnsemble, k: KappaParam) -> Result<(Value, Value)> {
    let report = stability_ratio(ensemble, k)?;
    let mut result = to_value(&report);
    result["kappa"] = json!(k.value());
    Ok((result, json!({ "paths": ensemble.len() })))
}

fn orbit_series(orbit: &OrbitDoc, dt: f64) -> Result<ObservableSeries> {
    let observable = Observable::from_name(&orbit.observable)?;
    if orbit.steps == 0 {
        return Err(Error::Domain("orbit needs at least one step".into()));
    }
    let values = orbit
        .map
        .orbit(orbit.x0)?
        .take(orbit.steps)
        .map(|x| observable.eval(x))
        .collect();
    ObservableSeries::new(values, dt)
}

fn spectral_density(doc: &SpectralDoc) -> Result<SpectralDensity> {
    match (&doc.grid, &doc.density, &doc.model) {
        (Some(g), Some(d), None) => SpectralDensity::new(g.clone(), d.clone()),
        (None, None, Some(model)) => {
            let [lo, hi] = doc
                .range
                .ok_or_else(|| Error::Config("spectral model needs 'range'".into()))?;
            let n = doc
                .points
                .ok_or_else(|| Error::Config("spectral model needs 'points'".into()))?;
            SpectralDensity::tabulate(lo, hi, n, |l| model.density(l))
        }
        _ => Err(Error::Config(
            "spectral entry needs either 'grid' and 'density' or 'model'".into(),
        )),
    }
}

fn ergodic(doc: &ErgodicDoc) -> Result<(Value, Value)> {
    let mut birkhoff = Vec::new();
    for b in &doc.birkhoff {
        let observable = Observable::from_name(&b.observable)?;
        let space = b.space_average.unwrap_or(observable.lebesgue_mean());
        let report = birkhoff_check(&b.map, observable, b.x0, b.steps, space, b.tol)?;
        let mut v = to_value(&report);
        v["map"] = to_value(&b.map);
        v["observable"] = json!(observable.name());
        birkhoff.push(v);
    }

    let mut steady = Vec::new();
    for s in &doc.steady_state {
        let dt = s.dt.unwrap_or(1.0);
        let series = match (&s.values, &s.orbit) {
            (Some(v), None) => ObservableSeries::new(v.clone(), dt)?,
            (None, Some(o)) => orbit_series(o, dt)?,
            _ => {
                return Err(Error::Config(
                    "steady_state needs either 'values' or 'orbit'".into(),
                ))
            }
        };
        let spec = SteadyStateSpec {
            zeta: s.zeta,
            epsilon: s.epsilon,
            window: s.window,
        };
        let deviation = steady_state_deviation(&series, &spec)?;
        let final_average = *running_averages(&series)
            .last()
            .expect("series is non-empty");
        steady.push(json!({
            "steady": deviation <= spec.epsilon,
            "max_deviation": deviation,
            "final_running_average": final_average,
            "zeta": spec.zeta,
            "epsilon": spec.epsilon,
            "window": spec.window,
        }));
    }

    let mut spectral = Vec::new();
    for s in &doc.spectral {
        let density = spectral_density(s)?;
        let ladder = s
            .truncations
            .clone()
            .unwrap_or_else(|| DEFAULT_TRUNCATIONS.to_vec());
        let report = wiener_krein_integral(&density, &ladder, s.gap.unwrap_or(DEFAULT_CAUCHY_GAP))?;
        spectral.push(to_value(&report));
    }

    let mut phase = Vec::new();
    for p in &doc.phase_volume {
        let dets = match (&p.jacobian_dets, &p.map) {
            (Some(d), None) => d.clone(),
            (None, Some(map)) => {
                map.validate()?;
                vec![map.jacobian_det(); p.steps.unwrap_or(1).max(1)]
            }
            _ => {
                return Err(Error::Config(
                    "phase_volume needs either 'jacobian_dets' or 'map'".into(),
                ))
            }
        };
        let rate = phase_volume_rate(&dets)?;
        phase.push(json!({ "rate": rate, "contracting": rate < 0.0, "samples": dets.len() }));
    }

    let diagnostics = json!({
        "birkhoff_checks": birkhoff.len(),
        "steady_state_checks": steady.len(),
        "spectral_checks": spectral.len(),
        "phase_volume_checks": phase.len(),
    });
    let result = json!({
        "birkhoff": birkhoff,
        "steady_state": steady,
        "spectral": spectral,
        "phase_volume": phase,
    });
    Ok((result, diagnostics))
}

/// Flattens the report into `path = value` lines.
fn render_summary(command: Command, report: &Value) -> String {
    let mut out = String::new();
    let status = if report.get("error").is_some() {
        "failed"
    } else {
        "ok"
    };
    out.push_str(&format!("{ARTIFACT} {}: {status}\n", command.name()));
    for block in ["error", "result", "diagnostics"] {
        if let Some(v) = report.get(block) {
            flatten(block, v, &mut out);
        }
    }
    out
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                flatten(&format!("{prefix}.{k}"), child, out);
            }
        }
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
            let parts: Vec<String> = items.iter().map(Value::to_string).collect();
            out.push_str(&format!("{prefix} = [{}]\n", parts.join(", ")));
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), child, out);
            }
        }
        other => out.push_str(&format!("{prefix} = {other}\n")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_flattens_nested_values() {
        let report = json!({
            "result": { "p": [0.75, 0.25], "rows": [{ "x": 1.0 }], "ok": true },
            "diagnostics": { "iterations": 3 },
        });
        let s = render_summary(Command::Solve, &report);
        assert_eq!(
            s,
            "kappastat solve: ok\nresult.ok = true\nresult.p = [0.75, 0.25]\nresult.rows[0].x = 1.0\ndiagnostics.iterations = 3\n"
        );
    }

    #[test]
    fn kappa_resolution_order() {
        let mut cfg = RunConfig::new(Command::Eval, "x.toml");
        assert!(kappas(&cfg, None).is_err());
        assert_eq!(kappas(&cfg, Some(0.2)).unwrap().0[0].value(), 0.2);
        cfg.kappa = Some(0.3);
        assert_eq!(kappas(&cfg, Some(0.2)).unwrap().0[0].value(), 0.3);
        cfg.kappa_sweep = Some(vec![0.5, -0.1, 0.5, 0.0]);
        let (ks, sweep) = kappas(&cfg, Some(0.2)).unwrap();
        assert!(sweep);
        let vals: Vec<f64> = ks.iter().map(|k| k.value()).collect();
        assert_eq!(vals, vec![-0.1, 0.0, 0.5]);
    }
}
