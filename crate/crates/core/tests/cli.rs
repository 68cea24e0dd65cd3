use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn models() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models")
}

fn m(name: &str) -> String {
    models().join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opalg")).args(args).env("OPALG_THREADS", "2").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Every failure prints exactly one line, prefixed "ERROR".
fn assert_one_error(o: &Output) {
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with("ERROR "), "{err}");
}

#[test]
fn check_on_a_bundled_model_passes() {
    let o = run(&["--model", &m("twoblock4.json"), "check", "--state", &m("twoblock4_state.json")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["failed"], 0);
    assert!(v["passed"].as_u64().unwrap() > 10);
}

#[test]
fn check_accepts_several_models_with_the_default_state() {
    let o = run(&["--model", &m("diagonal4.json"), "--model", &m("cq2x2.json"), "check", "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.starts_with("name,value,bound,relation,pass\n"));
    assert!(out.contains("diagonal4.json/") && out.contains("cq2x2.json/"));
}

#[test]
fn arbitrage_cone_exits_with_check_failure() {
    let o = run(&["arb", "--gains", &m("gains_arbitrage.json"), "--delta", "0.01"]);
    assert_eq!(code(&o), 2);
    assert_one_error(&o);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["has_pricing_state"], false);
}

#[test]
fn feasible_cone_returns_a_state() {
    let o = run(&["arb", "--gains", &m("gains_feasible.json"), "--delta", "0.01"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["has_pricing_state"], true);
}

#[test]
fn malformed_json_names_the_failing_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(models().join("diagonal4.json")).unwrap()).unwrap();
    model["times"][1] = serde_json::Value::from("soon");
    std::fs::write(&bad, model.to_string()).unwrap();
    let o = run(&["--model", bad.to_str().unwrap(), "check"]);
    assert_eq!(code(&o), 1);
    assert_one_error(&o);
    assert!(stderr(&o).contains("times[1]"), "{}", stderr(&o));

    std::fs::write(&bad, "{\"block_dims\": [1, 1]").unwrap();
    let o = run(&["--model", bad.to_str().unwrap(), "check"]);
    assert_eq!(code(&o), 1);
    assert_one_error(&o);
}

#[test]
fn missing_file_is_a_validation_error() {
    let o = run(&["--model", "/nonexistent/model.json", "check"]);
    assert_eq!(code(&o), 1);
    assert_one_error(&o);
    assert!(stderr(&o).contains("/nonexistent/model.json"));
}

#[test]
fn impossible_tolerance_fails_the_checks() {
    let o = run(&["--model", &m("twoblock4.json"), "--tol", "1e-30", "check", "--state", &m("twoblock4_state.json")]);
    assert_eq!(code(&o), 2);
    assert_one_error(&o);
    let o = run(&["--model", &m("twoblock4.json"), "--tol", "-1", "check"]);
    assert_eq!(code(&o), 1);
    assert_one_error(&o);
}

#[test]
fn usage_errors_exit_one() {
    for args in [&[][..], &["frobnicate"][..], &["jump", "--tau", "x"][..]] {
        let o = run(args);
        assert_eq!(code(&o), 1, "{args:?}");
        assert_one_error(&o);
    }
    let o = run(&["jump"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--model"));
}

#[test]
fn output_is_deterministic_and_written_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&["--model", &m("pm1.json"), "--out", out.to_str().unwrap(), "jump", "--tau", "0.1,0.5,1", "--spot", "0.9,1,1.1"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 10);
    assert_eq!(text.lines().next().unwrap(), "tau,s,value,tail_bound");
    for line in text.lines().skip(1) {
        for cell in line.split(',') {
            cell.parse::<f64>().unwrap();
        }
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn jump_methods_agree() {
    let price = |method: &str| -> Vec<f64> {
        let o = run(&["--model", &m("pm1.json"), "--format", "json", "jump", "--method", method]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let v: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
        v.iter().map(|r| r["value"].as_f64().unwrap()).collect()
    };
    for (a, b) in price("series").iter().zip(price("expm")) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn seeded_commands_repeat() {
    let args = ["--seed", "11", "fisher", "--n", "64", "--count", "3"];
    let first = run(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, run(&args).stdout);
    assert_ne!(first.stdout, run(&["--seed", "12", "fisher", "--n", "64", "--count", "3"]).stdout);
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn config_supplies_defaults_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{{\"subcommand\": \"jump\", \"model\": [\"{}\"], \"format\": \"json\"}}", m("pm1.json")));
    let o = run(&["--config", &cfg, "jump"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap();

    // command line wins over the file
    let o = run(&["--config", &cfg, "--format", "csv", "jump"]);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("tau,"));

    let o = run(&["--config", &cfg, "fisher"]);
    assert_eq!(code(&o), 1);
    assert_one_error(&o);

    let cfg = write_config(dir.path(), "{\"tolerance\": 1e-8}");
    let o = run(&["--config", &cfg, "fisher"]);
    assert_eq!(code(&o), 1);
    assert_one_error(&o);
    assert!(stderr(&o).contains("tolerance"));
}

#[test]
fn condexp_and_price_report_on_bundled_models() {
    let o = run(&[
        "--model", &m("twoblock4.json"), "condexp", "--state", &m("twoblock4_state.json"), "--observable", &m("claim4.json"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["results"].as_array().unwrap().len(), 3);

    let o = run(&["--model", &m("twoblock4.json"), "price", "--state", &m("twoblock4_state.json"), "--claim", &m("claim4.json"), "--time", "0.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["results"].as_array().unwrap().len(), 1);

    let o = run(&["--model", &m("twoblock4.json"), "price", "--claim", &m("claim4.json"), "--time", "0.3"]);
    assert_eq!(code(&o), 1);
    assert_one_error(&o);
}

#[test]
fn dimension_mismatch_is_reported() {
    let o = run(&["--model", &m("cq2x2.json"), "--format", "csv", "condexp", "--observable", &m("pm1.json")]);
    assert_eq!(code(&o), 1);
    assert_one_error(&o);
    let o = run(&["--model", &m("binomial.json"), "condexp", "--observable", &m("claim4.json")]);
    assert_eq!(code(&o), 1);
    assert_one_error(&o);
}

#[test]
fn qms_checks_the_invariant_state() {
    let dir = tempfile::tempdir().unwrap();
    let state = |name: &str, rho: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, format!("{{\"rho\": {rho}}}")).unwrap();
        p.display().to_string()
    };
    let ground = state("ground.json", "[[[1, 0], [0, 0]], [[0, 0], [0, 0]]]");
    let excited = state("excited.json", "[[[0, 0], [0, 0]], [[0, 0], [1, 0]]]");
    let o = run(&["--model", &m("damping.json"), "qms", "--state", &ground]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["invariant"].is_object());
    let o = run(&["--model", &m("damping.json"), "qms", "--state", &excited]);
    assert_eq!(code(&o), 2);
    assert_one_error(&o);
    let o = run(&["--model", &m("blocks.json"), "qms", "--maturity", "0.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["backward_order"].as_f64().unwrap() - 2.0).abs() < 0.2);
}

#[test]
fn bslimit_and_wkb_run_with_defaults() {
    let o = run(&["bslimit", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["monotone"], true);
    let o = run(&["wkb"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&["bslimit", "--payoff", "{\"kind\": \"put\"}"]);
    assert_eq!(code(&o), 1);
    assert_one_error(&o);
}

/// Name and pass columns of a CSV suite report.
fn pass_set(csv: &[u8]) -> Vec<(String, String)> {
    String::from_utf8_lossy(csv)
        .lines()
        .skip(1)
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            (cells[0].to_string(), cells[4].to_string())
        })
        .collect()
}

#[test]
fn full_suite_passes_with_the_same_verdicts_for_every_seed() {
    let a = run(&["--seed", "1", "--format", "csv", "check"]);
    let b = run(&["--seed", "2", "--format", "csv", "check"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(code(&b), 0, "{}", stderr(&b));
    let (sa, sb) = (pass_set(&a.stdout), pass_set(&b.stdout));
    assert!(sa.len() > 100);
    assert_eq!(sa, sb);
    assert!(sa.iter().all(|(_, pass)| pass == "true"));
}
