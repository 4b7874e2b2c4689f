use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn detbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detbound")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("detbound-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn anomaly_tanh_closed_form() {
    let v = json(&detbound(&["anomaly", "--n", "0", "--profile", "tanh", "--param", "1", "--radial"]));
    let total = v["result"]["total"].as_f64().unwrap();
    assert!((total - -0.171894).abs() < 1e-6, "{total}");
    assert_eq!(v["grid_meta"]["t_nodes"], 512);
    assert_eq!(v["grid_meta"]["theta_nodes"], 128);
}

#[test]
fn general_path_on_lift_agrees() {
    let r = json(&detbound(&["anomaly", "--n", "1", "--profile", "tent", "--param", "1", "--param", "2", "--radial"]));
    let g = json(&detbound(&["anomaly", "--n", "1", "--profile", "tent", "--param", "1", "--param", "2"]));
    let (a, b) = (r["result"]["total"].as_f64().unwrap(), g["result"]["total"].as_f64().unwrap());
    assert!((a - b).abs() < 1e-6);
}

#[test]
fn coefficient_sweep_margins_are_nonnegative() {
    let out = detbound(&["lemma3", "--coefficient-sweep", "1000"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,coefficient,bound,margin"));
    let margins: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(margins.len(), 1000);
    assert!(margins.iter().all(|m| *m >= 0.0));
    assert!(!text.contains('\r'));
}

#[test]
fn identical_config_gives_identical_bytes() {
    let args = ["search", "--n", "1", "--restarts", "3", "--max-iters", "50", "--seed", "11"];
    let (a, b) = (detbound(&args), detbound(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["grid_meta"]["seed"], 11);
    assert_eq!(v["traces"].as_array().unwrap().len(), 3);
}

#[test]
fn search_writes_trace_and_best() {
    let trace = scratch("trace.csv");
    let best = scratch("best.json");
    let out = detbound(&[
        "search",
        "--n",
        "0",
        "--restarts",
        "2",
        "--trace",
        trace.to_str().unwrap(),
        "--best",
        best.to_str().unwrap(),
    ]);
    let v = json(&out);
    assert!(v["best_value"].as_f64().unwrap() <= 1e-9);
    let csv = fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("restart,iter,A,energy,gradnorm\n"));
    let best: Value = serde_json::from_str(&fs::read_to_string(&best).unwrap()).unwrap();
    assert_eq!(best["values"].as_array().unwrap().len(), 512);
}

#[test]
fn config_file_and_flag_overrides() {
    let cfg = scratch("config.json");
    fs::write(&cfg, r#"{"grid": {"t_nodes": 256}, "seed": 4}"#).unwrap();
    let out_path = scratch("anomaly.json");
    let out = detbound(&[
        "anomaly",
        "--n",
        "2",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["grid_meta"]["t_nodes"], 256);
    assert_eq!(v["grid_meta"]["seed"], 9);
    assert_eq!(v["profile_nodes"], 256);
}

#[test]
fn exit_codes() {
    assert_eq!(detbound(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(detbound(&["anomaly", "--n", "0", "--bogus"]).status.code(), Some(2));
    assert_eq!(detbound(&["anomaly", "--n", "0", "--profile", "spiral"]).status.code(), Some(2));
    assert_eq!(detbound(&["anomaly", "--n", "0", "--t-nodes", "4"]).status.code(), Some(2));
    assert_eq!(detbound(&["search", "--n", "0", "--max-iters", "0"]).status.code(), Some(2));
    assert_eq!(detbound(&["anomaly", "--n", "9"]).status.code(), Some(1));
    let bad = scratch("bad_circle.csv");
    fs::write(&bad, "0.0\n1.0\n0.5\n").unwrap();
    assert_eq!(detbound(&["circle-det", "--input", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(detbound(&["--help"]).status.code(), Some(0));
}

#[test]
fn circle_det_matches_bessel_target() {
    let v = json(&detbound(&["circle-det", "--family", "cos", "--amplitude", "1", "--eigenvalues", "4"]));
    let log_det = v["log_det"].as_f64().unwrap();
    assert!((log_det - 0.471829).abs() < 1e-5, "{log_det}");
    assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 4);
}

#[test]
fn mt_check_x3_value() {
    let v = json(&detbound(&["mt-check", "--profile", "tanh", "--param", "1"]));
    assert!((v["mt_deficit"].as_f64().unwrap() - -0.005228).abs() < 1e-5);
    // energy ∫|∇f|²μ = 8π/3 > 1, so the input is rescaled to unit energy
    let scale = v["fontana"]["scale"].as_f64().unwrap();
    assert!((scale - (3.0 / (8.0 * std::f64::consts::PI)).sqrt()).abs() < 1e-6, "{scale}");
}

#[test]
fn rearrange_and_lemma3_report_from_csv() {
    let input = scratch("half_line.csv");
    let mut text = String::from("s,f\n");
    for k in 0..=400 {
        let s = k as f64 * 0.1;
        text.push_str(&format!("{s},{}\n", 1.0 - (-s).exp() + 0.2 * s.sin() * (-0.5 * s).exp()));
    }
    fs::write(&input, text).unwrap();
    let out = detbound(&["rearrange", "--input", input.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("s,u,fdot_star\n"));
    let slopes: Vec<f64> = csv.lines().skip(1).filter_map(|l| l.split(',').nth(2)?.parse().ok()).collect();
    assert!(slopes.windows(2).all(|w| w[1] <= w[0]));
    let v = json(&detbound(&["lemma3", "--input", input.to_str().unwrap(), "--m", "2", "--calibration", "1"]));
    assert_eq!(v["report"]["M"], 2);
    assert!(v["report"]["slack"].is_number());
}

#[test]
fn lemma3_constants_table() {
    let out = detbound(&["lemma3", "--constants", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("5,"));
    let r: f64 = last.split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(r, 0.01);
}

#[test]
fn selftest_passes() {
    let out = detbound(&["selftest"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 14, "{text}");
    assert_eq!(out.status.code(), Some(0));
}
