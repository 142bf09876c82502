use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn zzcancel(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zzcancel"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = zzcancel(args, out);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn manifest(dir: &Path) -> Value {
    read_json(&dir.join("manifest.json"))
}

#[test]
fn spectrum_reports_dispersive_and_perturbative_zz() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["spectrum"], dir.path());
    let s = read_json(&dir.path().join("spectrum.json"));
    let chi1 = s["chi1_mhz"].as_f64().unwrap();
    let chi2 = s["chi2_mhz"].as_f64().unwrap();
    assert!((chi1 / -6.79 - 1.0).abs() < 0.02, "{chi1}");
    assert!((chi2 / -4.80 - 1.0).abs() < 0.02, "{chi2}");
    assert!((s["chi_zz_khz"].as_f64().unwrap() + 103.0).abs() < 5.0);
    assert!((s["perturbative"]["chi_zz_khz"].as_f64().unwrap() + 101.3).abs() < 0.5);
    assert_eq!(s["seed"], 0);

    let m = manifest(dir.path());
    assert_eq!(m["command"], "spectrum");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["files"], serde_json::json!(["spectrum.json"]));
    assert!(m["version"].is_string() && m["wall_clock_s"].is_number());
}

#[test]
fn config_hash_tracks_inputs() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    ok(&["spectrum"], dirs[0].path());
    ok(&["spectrum"], dirs[1].path());
    ok(&["spectrum", "--seed", "3"], dirs[2].path());
    let h: Vec<Value> = dirs.iter().map(|d| manifest(d.path())["config_hash"].clone()).collect();
    assert_eq!(h[0], h[1]);
    assert_ne!(h[0], h[2]);
}

#[test]
fn unitless_frequency_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = zzcancel::config::TABLE_S1.replace("\"5.627 GHz\"", "\"5.627\"");
    let device = dir.path().join("bad.device");
    fs::write(&device, text).unwrap();
    let o = zzcancel(&["spectrum", "--device", device.to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("mode[Q1].frequency"), "{err}");
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn missing_device_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = zzcancel(&["spectrum", "--device", "/nonexistent/x.device"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/x.device"));
}

#[test]
fn bad_axis_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = zzcancel(&["zzmap", "--offset-points", "1"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn cancel_finds_the_operating_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["cancel"], dir.path());
    let c = read_json(&dir.path().join("cancel.json"));
    let amp = c["drive_amp_mhz"].as_f64().unwrap();
    assert!((amp / 0.66 - 1.0).abs() < 0.15, "{amp}");
    assert!(c["residual_khz"].as_f64().unwrap().abs() < 0.1);
    assert_eq!(manifest(dir.path())["files"], serde_json::json!(["cancel.json"]));
}

#[test]
fn rb_is_reproducible() {
    let args = ["rb", "--n-random", "80", "--taus-us", "0.4,1.6", "--seed", "11"];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(&args, a.path());
    ok(&args, b.path());
    for name in ["rb_on.csv", "rb_off.csv", "rb_t1.csv", "rb_slopes.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
        let text = String::from_utf8(x).unwrap();
        assert!(text.lines().next().unwrap().ends_with(",seed"));
        assert!(text.lines().skip(1).all(|l| l.ends_with(",11")));
    }
}

#[test]
fn every_table_has_a_header_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["zzmap", "--offset-points", "3", "--amp-points", "2", "--seed", "5"], dir.path());
    let text = fs::read_to_string(dir.path().join("zzmap.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header.first(), Some(&"drive_freq_ghz"));
    assert_eq!(header.last(), Some(&"seed"));
    assert_eq!(text.lines().count(), 1 + 3 * 2);
}

#[test]
fn json_format_writes_records() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["leakage", "--edges-ns", "0,300", "--format", "json"], dir.path());
    let rows = read_json(&dir.path().join("leakage.json"));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let square = rows[0]["coupler_excitation"].as_f64().unwrap();
    let smooth = rows[1]["coupler_excitation"].as_f64().unwrap();
    assert!(smooth <= 0.01 && smooth < square, "{square} {smooth}");
}

#[test]
fn small_chain_run() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["chain", "--step-mhz", "200", "--amp-points", "6"], dir.path());
    let m = manifest(dir.path());
    assert_eq!(m["files"].as_array().unwrap().len(), 4);
    let ind = read_json(&dir.path().join("chain_independence.json"));
    assert_eq!(ind["missing_crossings"], 0);
    assert!(ind["shift_q1q2_khz"].as_f64().unwrap() < 5.0);
    assert!(ind["shift_q2q3_khz"].as_f64().unwrap() < 5.0);
    let crossings = fs::read_to_string(dir.path().join("chain_crossings.csv")).unwrap();
    assert_eq!(crossings.lines().count(), 4);
    assert!(!crossings.contains("NaN"));
}
