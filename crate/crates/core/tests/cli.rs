use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ecfsense::cli::sha256_hex;
use ecfsense::config::{emit_config, parse_config, parse_config_str};

const SHORT_RUN: &str = r#"
seed = 17

[transit]
duration = 1.5
concentration_per_ml = 5e13

[detection]
duration = 2.0
reference_duration = 4.0
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecfsense"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("ECFSENSE_WORKERS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn trace_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT_RUN);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&a, &["trace", "--config", &cfg]).status.success());
    assert!(run(&b, &["trace", "--config", &cfg, "--workers", "1"]).status.success());
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    assert_eq!(fa.len(), 4);
    assert_eq!(fa, fb);
    let c = tmp.path().join("c");
    assert!(run(&c, &["trace", "--config", &cfg, "--seed", "18"]).status.success());
    assert_ne!(fs::read(a.join("trace.csv")).unwrap(), fs::read(c.join("trace.csv")).unwrap());
}

#[test]
fn provenance_matches_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert!(run(&out, &["transit", "--seed", "3"]).status.success());
    let resolved = fs::read(out.join("resolved_config.toml")).unwrap();
    let prov: toml::Value = toml::from_str(&fs::read_to_string(out.join("provenance.toml")).unwrap()).unwrap();
    let p = &prov["provenance"];
    assert_eq!(p["config_sha256"].as_str().unwrap(), sha256_hex(&resolved));
    assert_eq!(p["seed"].as_integer(), Some(3));
    assert_eq!(p["command"].as_str(), Some("transit"));
    for a in p["artifacts"].as_array().unwrap() {
        let bytes = fs::read(out.join(a["name"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"].as_str().unwrap(), sha256_hex(&bytes));
    }
}

#[test]
fn unknown_key_names_its_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[beam]\nwasit = 3e-6\n");
    let o = run(&tmp.path().join("o"), &["scaling", "--config", &cfg]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("beam") && err.contains("wasit"), "{err}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn out_of_range_value_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[heterodyne]\nsample_rate = 30e3\n");
    let o = run(&tmp.path().join("o"), &["detect", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("heterodyne.sample_rate"));
}

#[test]
fn missing_config_and_bad_command_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["scaling", "--config", "/nonexistent/run.toml"]);
    assert!(!o.status.success());
    let o = run(tmp.path(), &["bogus"]);
    assert!(!o.status.success());
    let o = run(tmp.path(), &["scaling", "--workers", "0"]);
    assert!(!o.status.success());
}

#[test]
fn minimal_config_resolves_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[geometry]\ncore_diameter = 1.5e-6\n");
    let out = tmp.path().join("o");
    assert!(run(&out, &["scaling", "--config", &cfg]).status.success());
    let resolved = fs::read_to_string(out.join("resolved_config.toml")).unwrap();
    assert!(resolved.contains("core_diameter = 0.0000015"));
    assert!(resolved.contains("[heterodyne]") && resolved.contains("height = "));
    let first = parse_config(Path::new(&cfg)).unwrap();
    let again = parse_config_str(&emit_config(&first).unwrap()).unwrap();
    assert_eq!(first, again);
    let from_disk = parse_config_str(&resolved).unwrap();
    assert_eq!(from_disk.geometry, first.geometry);
}

#[test]
fn scaling_curves_cross_at_normalization_radius() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert!(run(&out, &["figure", "scaling"]).status.success());
    let csv = fs::read_to_string(out.join("scaling.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("radius_m,amplitude_dipole,amplitude_corrected,P_scatt_W,P_sig_W")
    );
    for l in lines {
        let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
        let (a, dip, cor) = (f[0], f[1], f[2]);
        if (a - 50e-9).abs() < 1e-12 {
            assert!((dip - cor).abs() <= 1e-12 * dip);
        } else if a > 50e-9 {
            assert!(cor < dip);
        } else {
            assert!(cor > dip);
        }
    }
    let svg = fs::read_to_string(out.join("scaling.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn detect_on_noise_is_poisson_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT_RUN);
    let out = tmp.path().join("o");
    assert!(run(&out, &["detect", "--config", &cfg]).status.success());
    let summary: toml::Value = toml::from_str(&fs::read_to_string(out.join("detect_summary.toml")).unwrap()).unwrap();
    let expected = summary["expected_noise_events"].as_float().unwrap();
    let found = summary["events"].as_integer().unwrap() as f64;
    assert!(found <= expected + 3.0 * expected.sqrt() + 1.0, "{found} vs {expected}");
    let events = fs::read_to_string(out.join("events.csv")).unwrap();
    assert!(events.starts_with("start_s,end_s,peak_sigma,snr"));
}

#[test]
fn detect_reads_a_trace_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT_RUN);
    let t = tmp.path().join("t");
    assert!(run(&t, &["trace", "--config", &cfg]).status.success());
    let text = format!(
        "{SHORT_RUN}trace = \"{}\"\n",
        t.join("trace.csv").to_string_lossy()
    );
    let cfg2 = write_config(tmp.path(), &text);
    let out = tmp.path().join("d");
    let o = run(&out, &["detect", "--config", &cfg2]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("normalized.csv").exists());
}

#[test]
fn worker_count_does_not_change_noisefit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[noisefit]\nsamples = 65536\nsegment = 1024\n");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&a, &["noisefit", "--config", &cfg, "--workers", "1"]).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_ecfsense"))
        .args(["noisefit", "--config", &cfg, "--out"])
        .arg(&b)
        .env("ECFSENSE_WORKERS", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(csv_files(&a), csv_files(&b));
}
