use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hwisec"))
}

fn experiments() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/experiments")
}

fn run(spec: &Path, out: &Path) -> Output {
    bin()
        .arg("run")
        .arg(spec)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_spec(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("exp.json");
    std::fs::write(&p, body).unwrap();
    p
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn list_names_every_figure() {
    let o = bin().arg("list").output().unwrap();
    assert!(o.status.success());
    let s = String::from_utf8(o.stdout).unwrap();
    for id in ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6"] {
        assert!(s.contains(id), "missing {id}");
    }
    assert!(s.contains("desk: T=100, trials=200, slots=10, grid=[64, 128]"));
}

#[test]
fn malformed_json_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), r#"{"mode": "evaluate", "config": "#);
    let out = dir.path().join("out");
    let o = run(&spec, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"mode": "reproduce", "figure": "fig2", "colour": 1}"#,
    );
    assert_eq!(run(&spec, &dir.path().join("out")).status.code(), Some(2));
}

#[test]
fn invalid_configuration_exits_3_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(experiments().join("evaluate_fig4.json")).unwrap();
    let spec = write_spec(
        dir.path(),
        &text.replace("\"phi_split\": 0.5", "\"phi_split\": 1.5"),
    );
    let out = dir.path().join("out");
    let o = run(&spec, &out);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(!out.exists());
}

#[test]
fn missing_block_and_unknown_figure_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), r#"{"mode": "simulate"}"#);
    assert_eq!(run(&spec, &dir.path().join("a")).status.code(), Some(3));
    let spec = write_spec(dir.path(), r#"{"mode": "reproduce", "figure": "fig9"}"#);
    assert_eq!(run(&spec, &dir.path().join("b")).status.code(), Some(3));
}

#[test]
fn missing_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&dir.path().join("nope.json"), &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn evaluate_writes_one_summary_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&experiments().join("evaluate_fig4.json"), dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("evaluate.csv"));
    assert_eq!(rows.len(), 1);
    let secrecy: f64 = rows[0][1].parse().unwrap();
    assert!(secrecy > 2.0 && secrecy < 3.5, "{secrecy}");
    assert_eq!(csv_rows(&dir.path().join("rate_vs_t.csv")).len(), 496);

    let m = manifest(dir.path());
    assert_eq!(m["mode"], "evaluate");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["files"].as_array().unwrap().len(), 2);
}

#[test]
fn sweep_reports_argmax() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&experiments().join("sweep_phi.json"), dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&dir.path().join("sweep_phi.csv")).len(), 9);
    let best = manifest(dir.path())["summary"]["argmax"].as_f64().unwrap();
    assert!((0.2..=0.4).contains(&best), "{best}");
}

#[test]
fn small_simulation_tracks_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(experiments().join("simulate_fig4.json")).unwrap();
    let text = text
        .replace("\"trials\": 200", "\"trials\": 40")
        .replace("\"t_coh\": 500", "\"t_coh\": 60");
    let spec = write_spec(dir.path(), &text);
    let o = run(&spec, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("simulate.csv"));
    assert_eq!(rows.len(), 10);
    for r in &rows {
        let mc: f64 = r[1].parse().unwrap();
        let lb: f64 = r[3].parse().unwrap();
        assert!((mc / lb - 1.0).abs() < 0.2, "t={} mc={mc} lb={lb}", r[0]);
    }
    assert_eq!(manifest(dir.path())["seeds"][0], 7);
}

#[test]
fn reproduce_is_byte_identical_across_runs_and_backends() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"mode": "reproduce", "figure": "fig4", "mc": {"trials": 20, "seed": 3}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&spec, &a).status.success());
    let o = bin()
        .arg("run")
        .arg(&spec)
        .arg("--out")
        .arg(&b)
        .arg("--sequential")
        .output()
        .unwrap();
    assert!(o.status.success());
    let names = [
        "fig4_so_sigma0p6.csv",
        "fig4_to_sigma6.csv",
        "fig4_ideal.csv",
    ];
    for n in names {
        assert_eq!(
            std::fs::read(a.join(n)).unwrap(),
            std::fs::read(b.join(n)).unwrap(),
            "{n}"
        );
    }
    let files = manifest(&a)["files"].as_array().unwrap().len();
    assert_eq!(files, 5);
}

#[test]
fn reproduce_fig6_desk_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&experiments().join("reproduce_fig6.json"), dir.path());
    assert!(o.status.success());
    for phi in ["0p05", "0p25"] {
        for sigma in ["0p06", "6"] {
            let rows = csv_rows(&dir.path().join(format!("fig6_phi{phi}_sigma{sigma}.csv")));
            assert_eq!(rows.len(), 6);
            let first: f64 = rows[0][1].parse().unwrap();
            let last: f64 = rows[5][1].parse().unwrap();
            assert!(last < first, "secrecy should fall with BS distortion");
        }
    }
    let m = manifest(dir.path());
    assert_eq!(m["resolved"]["scale"], "desk");
    assert!(m["seeds"].as_array().unwrap().is_empty());
}
