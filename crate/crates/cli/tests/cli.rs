use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ampload"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name]
        .iter()
        .collect();
    p.to_string_lossy().into_owned()
}

#[test]
fn integrate_exact_midpoint() {
    let v = json(&[
        "integrate",
        "--y",
        "0.5",
        "--n",
        "1",
        "--rule",
        "midpoint",
        "--kmax",
        "2",
        "--shots",
        "0",
    ]);
    assert!((v["estimate"].as_f64().unwrap() - 0.25).abs() < 1e-6);
    assert_eq!(v["config"]["shots"], 0);
    assert_eq!(v["config"]["rule"], "midpoint");
    assert!(v["simpson"].is_null());
}

#[test]
fn integrate_simpson_runs_three_rules() {
    let v = json(&[
        "integrate",
        "--y",
        "0.7",
        "--n",
        "2",
        "--rule",
        "simpson",
        "--kmax",
        "2",
        "--shots",
        "0",
    ]);
    let rules: Vec<&str> = v["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["rule"].as_str().unwrap())
        .collect();
    assert_eq!(rules, ["left", "right", "midpoint"]);
    assert_eq!(v["simpson"], v["estimate"]);
    assert!(v["abs_error"].as_f64().unwrap() < 1e-3);
}

#[test]
fn invalid_rule_is_a_usage_error() {
    let out = run(&["integrate", "--rule", "gauss"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn identical_seed_gives_identical_json() {
    let args = [
        "integrate",
        "--y",
        "0.7",
        "--n",
        "2",
        "--kmax",
        "3",
        "--shots",
        "8192",
        "--seed",
        "9",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let other = run(&[
        "integrate",
        "--y",
        "0.7",
        "--n",
        "2",
        "--kmax",
        "3",
        "--shots",
        "8192",
        "--seed",
        "10",
    ]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn json_config_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"y": 0.5, "n": 1, "rule": "midpoint", "k_max": 1, "shots": 100}"#,
    )
    .unwrap();
    let v = json(&[
        "integrate",
        "--config",
        cfg.to_str().unwrap(),
        "--shots",
        "0",
    ]);
    assert_eq!(v["config"]["shots"], 0);
    assert_eq!(v["config"]["k_max"], 1);
    assert!((v["estimate"].as_f64().unwrap() - 0.25).abs() < 1e-6);
}

#[test]
fn integrate_dumps_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let circuit = dir.path().join("c.txt");
    let state = dir.path().join("s.csv");
    let csv = dir.path().join("r.csv");
    json(&[
        "integrate",
        "--shots",
        "0",
        "--kmax",
        "1",
        "--dump-circuit",
        circuit.to_str().unwrap(),
        "--dump-state",
        state.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(circuit).unwrap();
    let c: ampload::Circuit = text.parse().unwrap();
    assert_eq!(c.num_qubits(), 2);
    let rows = fs::read_to_string(state).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(rows.lines().nth(1).unwrap().starts_with("0,"));
    assert!(fs::read_to_string(csv)
        .unwrap()
        .starts_with("rule,estimate,classical,a_hat\nmidpoint,"));
}

#[test]
fn noisy_integrate_with_mitigation() {
    let v = json(&[
        "integrate",
        "--y",
        "0.7",
        "--n",
        "1",
        "--kmax",
        "1",
        "--shots",
        "20000",
        "--mitigate",
    ]);
    assert_eq!(v["config"]["mitigate"], true);
    assert_eq!(v["config"]["noise"]["cnot_error"], 0.01);
    assert!(v["abs_error"].as_f64().unwrap() < 0.05);
}

#[test]
fn gates_rows() {
    let out = run(&["gates", "--qubits", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let counts: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(counts, ["4", "7", "13", "25", "49"]);

    let out = run(&["gates", "--qubits", "3", "--unoptimized", "--k", "1,16"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text,
        "qubits,topology,optimized,k,cnots\n3,all_to_all,false,1,18\n3,all_to_all,false,16,228\n"
    );

    let out = run(&["gates", "--k"]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "qubits,topology,optimized,k,cnots\n"
    );
}

#[test]
fn gates_linear_chain_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    let out = run(&[
        "gates",
        "--qubits",
        "3",
        "--topology",
        "linear_chain",
        "--k",
        "1,2",
        "--csv",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(
        fs::read_to_string(path).unwrap(),
        "qubits,topology,optimized,k,cnots\n3,linear_chain,true,1,17\n3,linear_chain,true,2,31\n"
    );
}

#[test]
fn heston_with_reference_tables() {
    let v = json(&[
        "heston",
        "--use-table",
        &data("heston_reference_tables.csv"),
    ]);
    assert_eq!(v["config"]["source"], "external");
    let p = v["normalized_payoff"].as_f64().unwrap();
    // three-decimal tables; the full-precision value is 0.1181
    assert!((p - 0.1176).abs() < 1e-4, "{p}");
    let reference = v["classical_reference"].as_f64().unwrap();
    assert!((v["expected_payoff"].as_f64().unwrap() - reference).abs() < 1e-12);
}

#[test]
fn heston_self_compute_reports_deviation() {
    let v = json(&["heston", "--self-compute"]);
    assert_eq!(v["config"]["source"], "computed");
    let dev = &v["deviation_from_published"];
    assert!(dev["max_abs_deviation"].as_f64().unwrap() > 0.4);
    assert_eq!(dev["entries_beyond_rounding"], 18);
    assert!(v["max_row_sum_error"].as_f64().unwrap() < 1e-12);

    let v = json(&["heston", "--config", &data("heston_fine_step.toml")]);
    assert_eq!(v["deviation_from_published"]["entries_beyond_rounding"], 0);
    assert!((v["normalized_payoff"].as_f64().unwrap() - 0.1185).abs() < 5e-4);
}

#[test]
fn heston_exact_mlae() {
    let v = json(&["heston", "--shots", "0", "--kmax", "2"]);
    let exact = v["normalized_payoff"].as_f64().unwrap();
    let est = v["mlae_normalized_payoff"].as_f64().unwrap();
    assert!((exact - est).abs() < 1e-5);
    assert_eq!(v["mlae"]["shots"], 0);
}

#[test]
fn heston_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    json(&["heston", "--self-compute", "--csv", path.to_str().unwrap()]);
    let v = json(&["heston", "--use-table", path.to_str().unwrap()]);
    let w = json(&["heston", "--self-compute"]);
    assert_eq!(v["normalized_payoff"], w["normalized_payoff"]);
}

#[test]
fn heston_bad_table_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    fs::write(&path, "kind,t,condition,state,probability\nnu,1,0,0,0.5\n").unwrap();
    let out = run(&["heston", "--use-table", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mitigate_zero_noise() {
    let v = json(&[
        "mitigate-demo",
        "--cnot-error",
        "0",
        "--readout-p01",
        "0",
        "--readout-p10",
        "0",
        "--seeds",
        "3",
        "--shots",
        "100000",
        "--calibration-shots",
        "100000",
    ]);
    let truth = v["truth"].as_f64().unwrap();
    for r in v["runs"].as_array().unwrap() {
        assert!((r["raw"].as_f64().unwrap() - truth).abs() < 2e-3);
        assert!((r["mitigated"].as_f64().unwrap() - truth).abs() < 1e-2);
    }
}

#[test]
fn mitigate_default_noise_improves() {
    let v = json(&[
        "mitigate-demo",
        "--seeds",
        "10",
        "--shots",
        "200000",
        "--calibration-shots",
        "200000",
    ]);
    assert!(v["mean_mitigated_error"].as_f64().unwrap() < v["mean_raw_error"].as_f64().unwrap());
    assert_eq!(v["config"]["noise"]["readout_p10"], 0.04);
}

#[test]
fn malformed_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "seeds = \"many\"\n").unwrap();
    let out = run(&["mitigate-demo", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed config"));
}

#[test]
fn shipped_configs_parse() {
    let v = json(&[
        "integrate",
        "--config",
        &data("integrate.toml"),
        "--shots",
        "0",
    ]);
    assert_eq!(v["config"]["rule"], "simpson");
    let v = json(&["heston", "--config", &data("heston_example.toml")]);
    assert_eq!(v["config"]["params"]["dt"], 1.0);
    let v = json(&[
        "mitigate-demo",
        "--config",
        &data("mitigate.toml"),
        "--seeds",
        "1",
        "--shots",
        "1000",
        "--calibration-shots",
        "1000",
    ]);
    assert_eq!(v["runs"].as_array().unwrap().len(), 1);
}
