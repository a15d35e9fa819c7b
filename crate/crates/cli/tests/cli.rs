use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bhc_core::io::{table_from_json, table_from_tsv};
use tempfile::TempDir;

fn bhc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bhc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn coherent_config(extra: &str, e: f64) -> String {
    format!(
        r#"{{
    "schema_version": 1,
    "state": {{"kind": "coherent", "amplitude_re": 0.5, "amplitude_im": 0.25}},
    "cutoffs": [20],
    "device": {{"depth": 2, "lo_amplitude": {e}, "eta": 1.0}},
    "request": {{"k": [2]}}{extra}
}}"#
    )
}

fn run(cmd: &str, cfg: &Path, out: &Path, more: &[&str]) -> Output {
    let mut args = vec![
        cmd,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ];
    args.extend_from_slice(more);
    bhc(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn analytic_reconstruct_writes_tables() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &coherent_config("", 1.0));
    let o = run("reconstruct", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json = std::fs::read_to_string(tmp.path().join("moments.json")).unwrap();
    let tsv = std::fs::read_to_string(tmp.path().join("moments.tsv")).unwrap();
    let a = table_from_json(&json).unwrap();
    assert_eq!(a, table_from_tsv(&tsv).unwrap());
    assert_eq!(a.len(), 3);
    // ⟨a†a⟩ = |α|² for a coherent state
    let v = a.value(&bhc_core::MomentOrder::single(1, 1)).unwrap();
    assert!((v.re - 0.3125).abs() < 1e-10 && v.im.abs() < 1e-10);
}

#[test]
fn analytic_compare_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &coherent_config("", 1.0));
    let o = run("compare", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = std::fs::read_to_string(tmp.path().join("report.tsv")).unwrap();
    assert_eq!(report.lines().count(), 4);
    assert!(report.lines().skip(1).all(|l| l.ends_with("\ttrue")));
}

#[test]
fn wrong_inversion_eta_breaches_tolerance() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &coherent_config(",\n    \"inversion_eta\": 0.7", 1.0),
    );
    let o = run("compare", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("tolerance"));
}

#[test]
fn zero_lo_is_a_pipeline_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &coherent_config("", 0.0));
    let o = run("reconstruct", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("ZeroLO"), "{}", stderr(&o));
    assert!(stderr(&o).contains("stage invert"));
}

#[test]
fn config_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let unknown = coherent_config(",\n    \"colour\": 3", 1.0);
    let cfg = write_config(tmp.path(), "u.json", &unknown);
    assert_eq!(run("reconstruct", &cfg, tmp.path(), &[]).status.code(), Some(2));

    let over = coherent_config("", 1.0).replace("[2]}", "[3]}");
    let cfg = write_config(tmp.path(), "o.json", &over);
    let o = run("reconstruct", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("CapacityExceeded"));

    let missing = tmp.path().join("absent.json");
    assert_eq!(run("reconstruct", &missing, tmp.path(), &[]).status.code(), Some(2));

    let cfg = write_config(tmp.path(), "c.json", &coherent_config("", 1.0));
    let o = run("reconstruct", &cfg, tmp.path(), &["--mode", "sampled"]);
    assert_eq!(o.status.code(), Some(2), "sampled mode without an experiment");
}

#[test]
fn truncation_failure_names_stage() {
    let tmp = TempDir::new().unwrap();
    let text = coherent_config("", 1.0)
        .replace("\"amplitude_re\": 0.5", "\"amplitude_re\": 3.0")
        .replace("[20]", "[6]");
    let cfg = write_config(tmp.path(), "c.json", &text);
    let o = run("reconstruct", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("stage build_state: CutoffTooSmall"), "{}", stderr(&o));
}

#[test]
fn report_from_table() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &coherent_config(",\n    \"report\": {\"phase_points\": 16}", 1.0),
    );
    assert_eq!(run("reconstruct", &cfg, tmp.path(), &[]).status.code(), Some(0));
    let input = tmp.path().join("moments.tsv");
    let o = run("report", &cfg, tmp.path(), &["--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = std::fs::read_to_string(tmp.path().join("report.tsv")).unwrap();
    let rows: Vec<&str> = report.lines().skip(1).collect();
    assert_eq!(rows.len(), 16);
    // at φ = 0 the balanced data is (E/2)² ⟨:X²:⟩ with X = α e^{-iφ} + c.c.
    let f0: Vec<f64> = rows[0].split('\t').map(|x| x.parse().unwrap_or(f64::NAN)).collect();
    assert!((f0[2] - 0.25).abs() < 1e-10, "{}", rows[0]);
    assert!(f0[3].abs() < 1e-10);
}

#[test]
fn report_rejects_empty_input() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &coherent_config("", 1.0));
    let empty = write_config(tmp.path(), "empty.tsv", "");
    let o = run("report", &cfg, tmp.path(), &["--input", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run("report", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2), "nothing to report");
}

fn sampled_config() -> String {
    coherent_config(
        ",\n    \"mode\": \"sampled\",\n    \"experiment\": {\"shots\": 20000, \"seed\": 11}",
        1.0,
    )
    .replace("[2]}", "[1]}")
}

#[test]
fn sampling_is_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &sampled_config());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    for (dir, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let o = run("sample", &cfg, dir, &["--seed", seed]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["counts.tsv", "moments.tsv", "moments.json"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let x = std::fs::read(a.join("counts.tsv")).unwrap();
    assert_ne!(x, std::fs::read(c.join("counts.tsv")).unwrap());
    let header = String::from_utf8(x).unwrap();
    assert!(header.starts_with("setting_index\tshot_index\tch0_d0\tch0_d1\tch0_d2\tch0_d3\n"));
}

#[test]
fn sampled_compare_within_five_sigma() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &sampled_config());
    let o = run("compare", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t = table_from_json(&std::fs::read_to_string(tmp.path().join("moments.json")).unwrap())
        .unwrap();
    assert!(t.entries.values().all(|e| e.stderr.is_some_and(|s| s > 0.0)));
}

#[test]
fn points_request_runs() {
    let tmp = TempDir::new().unwrap();
    let text = r#"{
        "schema_version": 1,
        "state": {"kind": "two_mode_squeezed_vacuum", "r": 0.4},
        "cutoffs": [16, 16],
        "device": {"depth": 1, "lo_amplitude": 1.5, "eta": 0.9},
        "request": {
            "points": [
                {"label": "x1", "position": "a", "time": "t"},
                {"label": "x2", "position": "b", "time": "t"}
            ],
            "daggered": [false, false]
        }
    }"#;
    let cfg = write_config(tmp.path(), "c.json", text);
    let o = run("compare", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}
