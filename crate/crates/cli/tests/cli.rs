use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const GAMMA2: f64 = 0.797_884_560_802_865_4;

fn tonks(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tonks")).args(args).output().expect("run tonks")
}

fn json(args: &[&str]) -> Value {
    let out = tonks(args);
    assert!(out.status.success(), "tonks {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn harmonic_table(path: &Path) {
    let mut text = String::from("# x V\n");
    for i in 0..1024 {
        let x = -8.0 + 16.0 * i as f64 / 1023.0;
        text.push_str(&format!("{x:.17e} {:.17e}\n", 0.5 * x * x));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn three_distinguishable_particles() {
    let r = json(&["spectrum", "--trap", "harmonic", "--n", "3", "--components", "1,1,1", "--level", "0"]);
    assert_eq!(r["schema_version"], "1.0");
    assert_eq!(r["slater"]["E_F"], 4.5);
    let gamma = r["gammas"][0]["value"].as_f64().unwrap();
    let full = floats(&r["spectrum"]["full"]);
    for (k, want) in full.iter().zip([0.0, 1.0, 1.0, 3.0, 3.0, 4.0]) {
        assert!((k / gamma - want).abs() <= 1e-6, "{full:?}");
    }
    assert_eq!(r["spectrum"]["labels"][0], "fermi");
    assert_eq!(r["spectrum"]["labels"][5], "bose");
    let hex = &r["spectrum"]["hexagon_order"];
    assert_eq!(hex["sectors"][5], "123");
    assert_eq!(hex["amplitudes"].as_array().unwrap().len(), 6);
    assert!(r["provenance"]["timestamp_unix"].is_u64());
    assert!(r.get("validation").is_none());
}

#[test]
fn two_identical_plus_one() {
    let r = json(&["spectrum", "--n", "3", "--components", "2,1"]);
    let gamma = r["gammas"][0]["value"].as_f64().unwrap();
    let p = floats(&r["spectrum"]["projected"]);
    assert_eq!(p.len(), 3);
    for (k, want) in p.iter().zip([0.0, 1.0, 3.0]) {
        assert!((k / gamma - want).abs() <= 1e-6, "{p:?}");
    }
    assert_eq!(floats(&r["spectrum"]["full"]).len(), 6);
}

#[test]
fn two_particles() {
    let r = json(&["spectrum", "--n", "2", "--components", "1,1"]);
    let gamma = r["gammas"][0]["value"].as_f64().unwrap();
    assert!((gamma - GAMMA2).abs() <= 1e-9);
    let p = floats(&r["spectrum"]["projected"]);
    assert!(p[0].abs() <= 1e-12 && (p[1] - 2.0 * GAMMA2).abs() <= 1e-9);
    assert_eq!(r["spectrum"]["expansion"]["form"], "E = E_F - K/g");
}

#[test]
fn mismatched_components_fail_before_compute() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.json");
    let o = tonks(&["spectrum", "--n", "3", "--components", "2,2", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("component"));
    assert!(!out.exists());
}

#[test]
fn failed_run_leaves_no_output() {
    let dir = TempDir::new().unwrap();
    // confining by the margin, but too shallow to bind 26 states
    let trap = dir.path().join("shallow.dat");
    let mut text = String::new();
    for i in 0..512 {
        let x = -8.0 + 16.0 * i as f64 / 511.0;
        text.push_str(&format!("{x} {}\n", 6.0 * (1.0 - (-x * x / 6.0).exp())));
    }
    std::fs::write(&trap, text).unwrap();
    let out = dir.path().join("r.json");
    let args = ["spectrum", "--trap", trap.to_str().unwrap(), "--n", "6"];
    let o = tonks(&[&args[..], &["--level", "20", "-o", out.to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not confining"), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
    // an earlier result survives a later failure untouched
    std::fs::write(&out, "previous").unwrap();
    let o = tonks(&[&args[..], &["--level", "20", "-o", out.to_str().unwrap()]].concat());
    assert!(!o.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "previous");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let common = ["spectrum", "--n", "4", "--samples", "200000", "--mc-tolerance", "0.1", "--no-timestamp"];
    let run = |path: &Path, threads: &str| {
        let o = tonks(&[&common[..], &["--threads", threads, "-o", path.to_str().unwrap()]].concat());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run(&a, "1");
    run(&b, "3");
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    let r: Value = serde_json::from_slice(&x).unwrap();
    assert_eq!(r["gammas"][0]["method"], "monte-carlo");
    assert!(r["provenance"].get("timestamp_unix").is_none());
}

#[test]
fn config_file_and_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "n = 2\nformat = \"csv\"\n[spectrum]\ncomponents = \"2,1\"\nn = 3\n").unwrap();
    let c = cfg.to_str().unwrap();
    let o = tonks(&["--config", c, "spectrum", "--no-timestamp"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("section,index,value,error,label\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("projected,")).count(), 3);
    // flags win over the file
    let r = json(&["--config", c, "spectrum", "--components", "1,1", "--n", "2", "--format", "json"]);
    assert_eq!(floats(&r["spectrum"]["projected"]).len(), 2);
    std::fs::write(&cfg, "n = 2\nunknown-key = 1\n").unwrap();
    assert!(!tonks(&["--config", c, "spectrum"]).status.success());
}

#[test]
fn gamma_by_monte_carlo() {
    let r = json(&["gamma", "--n", "2", "--method", "monte-carlo", "--samples", "400000"]);
    let w = &r["gammas"][0];
    assert_eq!(w["method"], "monte-carlo");
    let (v, e) = (w["value"].as_f64().unwrap(), w["error"].as_f64().unwrap());
    assert!((v - GAMMA2).abs() <= 4.0 * e, "{v} ± {e}");
    assert!(r.get("spectrum").is_none());
}

#[test]
fn tabulated_trap_matches_harmonic() {
    let dir = TempDir::new().unwrap();
    let trap = dir.path().join("harmonic.dat");
    harmonic_table(&trap);
    let r = json(&["spectrum", "--trap", trap.to_str().unwrap(), "--n", "2", "--tolerance", "1e-6"]);
    assert!((r["slater"]["E_F"].as_f64().unwrap() - 2.0).abs() <= 1e-6);
    let gamma = r["gammas"][0]["value"].as_f64().unwrap();
    assert!((gamma - GAMMA2).abs() <= 1e-5, "{gamma}");
}

#[test]
fn density_of_the_fermi_state() {
    let r = json(&["density", "--n", "3", "--state", "0", "--bins", "40", "--samples", "200000"]);
    let d = &r["density"];
    assert_eq!(d["K"], 0.0);
    assert!((d["integral"].as_f64().unwrap() - 3.0).abs() <= 2e-2);
    assert_eq!(floats(&d["values"]).len(), 40);
    let o = tonks(&["density", "--n", "3", "--components", "2,1", "--state", "3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validation_of_the_identical_pair_case() {
    let r = json(&[
        "validate", "--n", "3", "--components", "2,1", "--n-max", "12", "--couplings", "25,50,100", "--no-timestamp",
    ]);
    let v = &r["validation"];
    assert_eq!(v["coarse_n_max"], 8);
    let states = v["states"].as_array().unwrap();
    assert_eq!(states.len(), 3);
    for s in states {
        assert_eq!(s["pass"], true, "{s}");
    }
    assert_eq!(v["all_pass"], true);
    // a band too tight for the truncated basis fails with exit code 2
    let o = tonks(&["validate", "--n", "3", "--components", "2,1", "--n-max", "12", "--couplings", "25,50,100", "--band", "0.001"]);
    assert_eq!(o.status.code(), Some(2));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["validation"]["all_pass"], false);
}

#[test]
fn validation_rejects_bad_configs() {
    for args in [
        &["validate", "--n", "4"][..],
        &["validate", "--n", "2", "--couplings", "5,20,50"],
        &["validate", "--n", "2", "--couplings", "50,20,100"],
        &["validate", "--n", "2", "--level", "1"],
    ] {
        let o = tonks(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
}
