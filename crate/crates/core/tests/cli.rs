use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kappastat::cli::{run, Command as Cmd, RunConfig, ToleranceProfile, TOLERANCE_PROFILE_ENV};
use serde_json::Value;

fn sample(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("samples")
        .join(name)
}

fn kappastat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kappastat"))
        .args(args)
        .env_remove(TOLERANCE_PROFILE_ENV)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn schema() -> jsonschema::Validator {
    let text = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json"),
    )
    .unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(v: &Value) {
    let validator = schema();
    let errors: Vec<String> = validator.iter_errors(v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{v:#}");
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn solve_two_level() {
    let out = kappastat(&[
        "solve",
        "--input",
        sample("solve_two_level.toml").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let p = r["result"]["probabilities"].as_array().unwrap();
    assert!((p[0].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert!((p[1].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!((r["result"]["beta"].as_f64().unwrap() - 3f64.ln()).abs() < 1e-12);
    assert_eq!(r["provenance"]["tolerance_profile"], "default");
    assert_valid(&r);
}

#[test]
fn stability_uniform4_from_toml_and_csv() {
    for (input, kappa) in [
        (sample("stability_uniform4.toml"), None),
        (sample("uniform4.csv"), Some("0.5")),
    ] {
        let mut args = vec!["stability", "--input", input.to_str().unwrap()];
        if let Some(k) = kappa {
            args.extend(["--kappa", k]);
        }
        let out = kappastat(&args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let r = report(&out);
        assert!((r["result"]["ratio"].as_f64().unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(r["result"]["stable"], true);
        assert_eq!(r["result"]["consistent"], true);
        assert_valid(&r);
    }
}

#[test]
fn infeasible_target_exits_one() {
    let out = kappastat(&[
        "solve",
        "--input",
        sample("solve_infeasible.toml").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["error"]["code"], "infeasible_target_energy");
    assert!(r.get("result").is_none());
    assert_valid(&r);
}

#[test]
fn unknown_fields_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "bad.toml",
        "energies = [0.0, 1.0]\ntarget_energy = 0.5\nkappa = 0.0\ncolour = 1\n",
    );
    let out = kappastat(&["solve", "--input", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["error"]["code"], "parse_error");
    assert!(r["input_echo"]["document"].is_null());
    assert_valid(&r);
}

#[test]
fn missing_input_exits_two() {
    let out = kappastat(&["thermo", "--input", "/nonexistent/thermo.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["error"]["code"], "io_error");
}

#[test]
fn invalid_values_exit_two() {
    let two_level = sample("solve_two_level.toml");
    let cases: [&[&str]; 4] = [
        &["--kappa", "1.5"],
        &["--kappa-sweep", "0.1,-1.0"],
        &["--tol", "-1"],
        &["--max-iter", "0"],
    ];
    for extra in cases {
        let mut args = vec!["solve", "--input", two_level.to_str().unwrap()];
        args.extend_from_slice(extra);
        let out = kappastat(&args);
        assert_eq!(out.status.code(), Some(2), "{extra:?}");
        assert_eq!(
            report(&out)["error"]["code"],
            "invalid_parameter",
            "{extra:?}"
        );
    }
}

#[test]
fn usage_errors_exit_two_and_help_exits_zero() {
    let out = kappastat(&["frobnicate", "--input", "x.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage_error"));
    assert_eq!(kappastat(&["--help"]).status.code(), Some(0));
    assert_eq!(kappastat(&["--version"]).status.code(), Some(0));
}

#[test]
fn reports_are_byte_identical() {
    for (cmd, file) in [
        ("solve", "solve_three_level.toml"),
        ("ergodic", "ergodic.toml"),
        ("eval", "eval.toml"),
    ] {
        let path = sample(file);
        let args = [
            cmd,
            "--input",
            path.to_str().unwrap(),
            "--kappa-sweep",
            "0.5,-0.3,0.0",
        ];
        let args: &[&str] = if cmd == "ergodic" { &args[..3] } else { &args };
        let a = kappastat(args);
        let b = kappastat(args);
        assert_eq!(
            a.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&a.stderr)
        );
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn sweep_is_sorted_and_deduplicated() {
    let path = sample("solve_three_level.toml");
    let out = kappastat(&[
        "solve",
        "--input",
        path.to_str().unwrap(),
        "--kappa-sweep",
        "0.7,-0.4,0.0,0.7,0.2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let ks: Vec<f64> = r["result"]["sweep"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["kappa"].as_f64().unwrap())
        .collect();
    assert_eq!(ks, vec![-0.4, 0.0, 0.2, 0.7]);
    for entry in r["result"]["sweep"].as_array().unwrap() {
        assert_eq!(entry["kappa"], entry["result"]["kappa"]);
        assert!((entry["result"]["mean_energy"].as_f64().unwrap() - 1.5).abs() < 1e-9);
    }
    let dk: Vec<f64> = r["diagnostics"]["sweep"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["kappa"].as_f64().unwrap())
        .collect();
    assert_eq!(dk, ks);
    // The input order is echoed untouched.
    assert_eq!(
        r["input_echo"]["config"]["kappa_sweep"],
        serde_json::json!([0.7, -0.4, 0.0, 0.7, 0.2])
    );
    assert_valid(&r);
}

#[test]
fn echoed_config_round_trips() {
    let mut configs = vec![RunConfig::new(Cmd::Solve, sample("solve_two_level.toml"))];
    let mut c = RunConfig::new(Cmd::Eval, sample("eval.toml"));
    c.kappa_sweep = Some(vec![0.3, -0.2]);
    c.tol = Some(1e-11);
    c.max_iter = Some(17);
    configs.push(c);
    let mut c = RunConfig::new(Cmd::Stability, sample("uniform4.csv"));
    c.kappa = Some(-0.25);
    c.output_path = Some("out.json".into());
    configs.push(c);
    configs.push(RunConfig::new(Cmd::Thermo, "/nonexistent.toml"));
    for config in configs {
        let outcome = run(&config, ToleranceProfile::Default);
        let v: Value = serde_json::from_str(&outcome.output).unwrap();
        let echoed: RunConfig = serde_json::from_value(v["input_echo"]["config"].clone()).unwrap();
        assert_eq!(echoed, config);
        assert_valid(&v);
    }
}

#[test]
fn every_sample_report_matches_the_schema() {
    for (cmd, file) in [
        ("solve", "solve_two_level.toml"),
        ("solve", "solve_three_level.toml"),
        ("solve", "solve_infeasible.toml"),
        ("stability", "stability_uniform4.toml"),
        ("entropy", "stability_uniform4.toml"),
        ("eval", "eval.toml"),
        ("thermo", "thermo.toml"),
        ("ergodic", "ergodic.toml"),
    ] {
        let out = kappastat(&[cmd, "--input", sample(file).to_str().unwrap()]);
        assert_valid(&report(&out));
    }
}

#[test]
fn thermo_values() {
    let out = kappastat(&["thermo", "--input", sample("thermo.toml").to_str().unwrap()]);
    let r = report(&out);
    assert!((r["result"]["entropy_generation"].as_f64().unwrap() - 0.4 / 3.0).abs() < 1e-12);
    assert!((r["result"]["lagrangian"].as_f64().unwrap() + 40.0).abs() < 1e-10);
    let out = kappastat(&[
        "thermo",
        "--input",
        sample("thermo.toml").to_str().unwrap(),
        "--kappa",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["error"]["code"], "config_error");
}

#[test]
fn ergodic_sample_verdicts() {
    let r = report(&kappastat(&[
        "ergodic",
        "--input",
        sample("ergodic.toml").to_str().unwrap(),
    ]));
    let res = &r["result"];
    assert!(res["birkhoff"]
        .as_array()
        .unwrap()
        .iter()
        .all(|b| b["pass"] == true));
    assert_eq!(res["spectral"][0]["verdict"], "regular");
    assert_eq!(res["spectral"][1]["verdict"], "divergent");
    assert_eq!(res["steady_state"][0]["steady"], true);
    assert_eq!(res["phase_volume"][0]["contracting"], true);
}

#[test]
fn entropy_of_ensemble_with_zero_probability() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "e.csv",
        "energy,probability\n0,0.5\n1,0.5\n2,0\n",
    );
    let out = kappastat(&["entropy", "--input", p.to_str().unwrap(), "--kappa", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!((r["result"]["kappa_entropy"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-15);
    assert!(r["result"]["entropy_derivative"].is_null());
    let out = kappastat(&["stability", "--input", p.to_str().unwrap(), "--kappa", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["error"]["code"], "domain_error");
}

#[test]
fn csv_without_probabilities_is_rejected_for_stability() {
    let out = kappastat(&[
        "stability",
        "--input",
        sample("levels.csv").to_str().unwrap(),
        "--kappa",
        "0.2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["error"]["code"], "parse_error");
}

#[test]
fn missing_kappa_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "e.toml", "tau = [1.0]\n");
    let out = kappastat(&["eval", "--input", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["error"]["code"], "config_error");
}

#[test]
fn output_file_and_summary_format() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("summary.txt");
    let out = kappastat(&[
        "solve",
        "--input",
        sample("solve_two_level.toml").to_str().unwrap(),
        "--output",
        dest.to_str().unwrap(),
        "--format",
        "summary",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&dest).unwrap();
    assert!(text.starts_with("kappastat solve: ok\n"));
    assert!(text.contains("result.probabilities = [0.75, "));
    assert!(text.contains("diagnostics.converged = true\n"));
}

#[test]
fn tolerance_profile_from_environment() {
    let path = sample("solve_two_level.toml");
    let out = Command::new(env!("CARGO_BIN_EXE_kappastat"))
        .args(["solve", "--input", path.to_str().unwrap()])
        .env(TOLERANCE_PROFILE_ENV, "strict")
        .output()
        .unwrap();
    let r = report(&out);
    assert_eq!(r["provenance"]["tolerance_profile"], "strict");
    assert_eq!(r["provenance"]["tol"], 1e-12);
    assert_eq!(r["provenance"]["max_iter"], 500);

    let out = Command::new(env!("CARGO_BIN_EXE_kappastat"))
        .args(["solve", "--input", path.to_str().unwrap(), "--tol", "1e-9"])
        .env(TOLERANCE_PROFILE_ENV, "loose")
        .output()
        .unwrap();
    assert_eq!(report(&out)["provenance"]["tol"], 1e-9);

    let out = Command::new(env!("CARGO_BIN_EXE_kappastat"))
        .args(["solve", "--input", path.to_str().unwrap()])
        .env(TOLERANCE_PROFILE_ENV, "sloppy")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config_error"));
}

#[test]
fn divergence_exits_one() {
    let mut config = RunConfig::new(Cmd::Solve, sample("solve_three_level.toml"));
    config.tol = Some(1e-300);
    config.max_iter = Some(3);
    let outcome = run(&config, ToleranceProfile::Default);
    assert_eq!(outcome.exit_code, 1);
    let v: Value = serde_json::from_str(&outcome.output).unwrap();
    assert_eq!(v["error"]["code"], "solver_divergence");
}
