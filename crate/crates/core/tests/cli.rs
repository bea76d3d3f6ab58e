use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bdfpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdfpt"))
        .args(args)
        .env_remove("BDFPT_OUTPUT")
        .output()
        .unwrap()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = bdfpt(&[
            "simulate", "--model", "ou", "--N", "1000", "--h", "0.5", "--n-samples", "100000",
            "--seed", "42", "--output", s(dir),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["inter_burst.csv", "inter_burst.json", "inter_burst_pdf.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m = json(a.join("manifest.json"));
    assert_eq!(m["command"], "simulate");
    let files: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(files.contains(&"inter_burst.csv"));
    assert!(m["prng_family"].as_str().unwrap().contains("ChaCha8"));
    let meta = json(a.join("inter_burst.json"));
    assert_eq!(meta["threshold_state"], 500);
    assert_eq!(meta["rng_seed"], 42);
}

#[test]
fn fit_on_simulated_durations_matches_approximation() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    let out = bdfpt(&[
        "simulate", "--model", "ou", "--N", "1000", "--h", "0.5", "--n-samples", "100000",
        "--seed", "7", "--output", s(&sim),
    ]);
    assert!(out.status.success());
    let fit_dir = tmp.path().join("fit");
    let out = bdfpt(&["fit", "--input", s(&sim.join("inter_burst.csv")), "--output", s(&fit_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let approx_dir = tmp.path().join("approx");
    let out = bdfpt(&["approx", "--model", "ou", "--N", "1000", "--h", "0.5", "--output", s(&approx_dir)]);
    assert!(out.status.success());
    let fit = json(fit_dir.join("fit.json"));
    let approx = json(approx_dir.join("approx.json"));
    let f = |v: &Value, k: &str| v[k].as_f64().or_else(|| v["params"][k].as_f64()).unwrap();
    // the slow mode carries the identifiable information; compare it loosely
    let rel = |k: &str| (f(&fit, k) / f(&approx, k) - 1.0).abs();
    assert!(rel("lambda1") < 0.25, "lambda1 {}", rel("lambda1"));
    assert!(rel("rho") < 0.5, "rho {}", rel("rho"));
    assert!(fit["residuals"].as_array().unwrap().len() == 4);
    assert!(fit_dir.join("fit_diagnostics.json").exists());
}

#[test]
fn approx_writes_parameters_and_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bdfpt(&[
        "approx", "--model", "imitation", "--epsilon", "0.5", "--N", "1000", "--h", "0.3",
        "--output", s(tmp.path()),
    ]);
    assert!(out.status.success());
    let a = json(tmp.path().join("approx.json"));
    let rho = a["rho"].as_f64().or_else(|| a["params"]["rho"].as_f64()).unwrap();
    assert!(rho > 0.0 && rho < 1.0);
    let curve = std::fs::read_to_string(tmp.path().join("approx_pdf.csv")).unwrap();
    assert!(curve.starts_with("theta,pdf"));
    assert!(curve.lines().count() > 100);
}

#[test]
fn config_file_and_flags_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "model = \"ou\"\nN = 100\nh = 0.3\nn_samples = 2000\nseed = 5\n").unwrap();
    let out_dir = tmp.path().join("o");
    let out = bdfpt(&["simulate", "--config", s(&cfg), "--seed", "6", "--output", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta = json(out_dir.join("inter_burst.json"));
    assert_eq!(meta["rng_seed"], 6);
    assert_eq!(meta["threshold_state"], 30);
    assert_eq!(meta["n_samples"], 2000);
}

#[test]
fn bad_configuration_exits_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "model = \"ou\"\nunknown_key = 1\n").unwrap();
    let out = bdfpt(&["spectrum", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["kind"].is_string());
    assert!(err["error"]["message"].is_string());

    let out = bdfpt(&["spectrum", "--model", "ou"]);
    assert_ne!(out.status.code(), Some(0));
    let out = bdfpt(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_with_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bdfpt(&["fit", "--input", s(&tmp.path().join("missing.csv")), "--output", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn spectrum_reports_linearity() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bdfpt(&["spectrum", "--model", "ou", "--N", "1000", "--state", "450", "--output", s(tmp.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(tmp.path().join("spectrum_fit.json"));
    assert!(r["r_squared"].as_f64().unwrap() >= 0.99);
    let csv = std::fs::read_to_string(tmp.path().join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 451);
}

#[test]
fn reproduce_figures_writes_every_panel() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bdfpt(&["reproduce-figures", "--n-samples", "200", "--output", s(tmp.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for panel in ["bessel_like_a", "bessel_like_b", "bessel_like_c", "ou_a", "ou_b", "ou_c", "imitation_a", "imitation_b", "imitation_c"] {
        for f in ["inter_burst.csv", "burst.csv", "approx.json", "approx_pdf.csv"] {
            assert!(tmp.path().join(panel).join(f).exists(), "{panel}/{f}");
        }
    }
    for panel in ["bessel_like_d", "ou_d", "imitation_d"] {
        assert!(std::fs::read_dir(tmp.path().join(panel)).unwrap().count() > 0, "{panel}");
    }
    assert!(tmp.path().join("continuous_bessel").exists());
    let m = json(tmp.path().join("manifest.json"));
    assert!(m["artifacts"].as_array().unwrap().len() > 40);
}
