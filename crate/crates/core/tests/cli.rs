use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hyperconsensus::cli::{builtin, list_scenarios, run_to_dir, OutputFormat, Overrides, Scenario};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hyperconsensus"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn summary(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.json"))).unwrap()).unwrap()
}

#[test]
fn no_arguments_lists_the_builtins() {
    let out = run(&[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 7);
    for name in [
        "pseudosphere-divergence",
        "telescope-trap",
        "sphere-sync",
        "ellipsoid-zhu-conjugacy",
        "kuramoto-circle",
        "mexican-hat-reduction",
        "antipodal-equilibria",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name)), "missing {name}");
    }
    assert_eq!(run(&["list"]).stdout, text.as_bytes());
}

#[test]
fn every_builtin_runs_and_reports_its_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let expected = [
        ("pseudosphere-divergence", "Diverged"),
        ("telescope-trap", "Twisted(1)"),
        ("sphere-sync", "Consensus"),
        ("ellipsoid-zhu-conjugacy", "Consensus"),
        ("kuramoto-circle", "Other"),
        ("mexican-hat-reduction", "Other"),
        ("antipodal-equilibria", "Other"),
    ];
    for (name, _) in list_scenarios() {
        let out = run(&["run", &name, "--out", out_dir]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let s = summary(dir.path(), &name);
        if let Some((_, outcome)) = expected.iter().find(|(n, _)| *n == name) {
            assert_eq!(s["outcome"], *outcome, "{name}");
        }
        assert_eq!(s["aborted"], false);
        for key in ["terminal_V", "terminal_max_norm", "steps", "seed", "checks"] {
            assert!(s.get(key).is_some(), "{name} lacks {key}");
        }
        assert!(dir.path().join(format!("{name}.csv")).is_file());
    }
    let s = summary(dir.path(), "telescope-trap");
    assert_eq!(s["twist"], 1);
    let s = summary(dir.path(), "sphere-sync");
    assert_eq!(s["seed"], 1);
}

#[test]
fn pseudosphere_summary_tracks_the_ring_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "pseudosphere-divergence", "--out", dir.path().to_str().unwrap(), "--format", "json"]);
    assert!(out.status.success());
    assert!(!dir.path().join("pseudosphere-divergence.csv").exists());
    let s = summary(dir.path(), "pseudosphere-divergence");
    assert_eq!(s["outcome"], "Diverged");
    let checks = s["checks"].as_array().unwrap();
    let ode = checks.iter().find(|c| c["name"] == "u_vs_reduced_ode_solution").unwrap();
    assert_eq!(ode["passed"], true);
    assert!(ode["value"].as_f64().unwrap() < 1e-6);
}

#[test]
fn unknown_scenario_fails_and_names_it() {
    let out = run(&["run", "spherical-cow"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("spherical-cow"));
    assert!(!run(&["show", "spherical-cow"]).status.success());
}

#[test]
fn invalid_registry_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = builtin("mexican-hat-reduction").unwrap().to_toml().replace("hat:1,1,1", "sombrero:2");
    let path = dir.path().join("bad.toml");
    fs::write(&path, text).unwrap();
    let out = run(&["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("sombrero"));
}

#[test]
fn failed_step_exits_nonzero_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    // (1, 0, 2) is tangent to the radial direction, so the Zhu projector is singular there
    let text = r#"
schema = 1
name = "degenerate"

[surface]
kind = "double-graph"
field = "paraboloid:1,1"

[graph]
kind = "pair"

[initial]
kind = "explicit"
points = [[1.0, 0.0, 2.0], [0.0, 0.0, 1.0]]

[dynamics]
algorithm = "zhu"

[integrator]
step = 0.01
horizon = 1.0
"#;
    let path = dir.path().join("degenerate.toml");
    fs::write(&path, text).unwrap();
    let out = run(&["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let s = summary(dir.path(), "degenerate");
    assert_eq!(s["aborted"], true);
    assert_eq!(s["steps"], 0);
    let csv = fs::read_to_string(dir.path().join("degenerate.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn csv_bytes_are_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let s = builtin("sphere-sync").unwrap();
    let overrides = Overrides { horizon: Some(2.0), ..Default::default() };
    let mut bytes = Vec::new();
    for sub in ["a", "b"] {
        let d = dir.path().join(sub);
        run_to_dir(&s, &overrides, &d, OutputFormat::Csv).unwrap();
        bytes.push(fs::read(d.join("sphere-sync.csv")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    let d = dir.path().join("c");
    run_to_dir(&s, &Overrides { seed: Some(2), ..overrides }, &d, OutputFormat::Csv).unwrap();
    assert_ne!(fs::read(d.join("sphere-sync.csv")).unwrap(), bytes[0]);

    let text = String::from_utf8(bytes.swap_remove(0)).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,agent,x0,x1,x2,V,drift"));
    // header plus 6 agents at t = 0, 1, 2
    assert_eq!(text.lines().count(), 1 + 6 * 3);
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[..2], [0.0, 1.0]);
    let norm = first[2..5].iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-12);
}

#[test]
fn step_and_horizon_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run", "antipodal-equilibria", "--step", "0.05", "--horizon", "0.5",
        "--out", dir.path().to_str().unwrap(), "--seed", "11",
    ]);
    assert!(out.status.success());
    let s = summary(dir.path(), "antipodal-equilibria");
    assert_eq!(s["steps"], 10);
    assert_eq!(s["seed"], 11);
}

#[test]
fn shown_builtins_are_valid_scenario_files() {
    for (name, _) in list_scenarios() {
        let out = run(&["show", &name]);
        assert!(out.status.success());
        let s = Scenario::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
        assert_eq!(s, builtin(&name).unwrap());
    }
}
