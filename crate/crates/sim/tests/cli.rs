use std::path::Path;
use std::process::Command;

fn lsfd(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lsfd")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("net.cfg");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = "# tiny network\nnum_cells = 19\nusers_per_cell = 2\nnum_antennas = 20\nneighborhood_size = 2\n";

#[test]
fn simulate_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("res");
    let o = lsfd(&[
        "simulate", "--config", &cfg, "--decoder", "zf", "--lsfd", "dec-opt", "--power", "distributed", "--gamma-db", "-5",
        "--drops", "3", "--seed", "8", "--out-dir", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("rates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3 * 19 * 2 + 1);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 8);
    assert_eq!(json["config"]["num_cells"], 19);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let o = lsfd(&[
            "--threads", threads, "simulate", "--config", &cfg, "--power", "bisection", "--drops", "4", "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        files.push(std::fs::read(out.join("rates.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn configuration_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "num_antenas = 20\n");
    let o = lsfd(&["simulate", "--config", &cfg, "--drops", "1", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));

    let o = lsfd(&["simulate", "--power", "distributed", "--drops", "1", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--gamma-db"));
}

#[test]
fn sweep_prints_served_fractions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = lsfd(&["sweep", "--config", &cfg, "--lsfd", "dec-opt", "--gamma-db-range", "-20:0:10", "--drops", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "gamma_db,served_fixed,served_controlled");
    assert_eq!(lines.len(), 4);
    for l in &lines[1..] {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((0.0..=1.0).contains(&v[1]) && (0.0..=1.0).contains(&v[2]));
    }
}

#[test]
fn validate_reports_terms() {
    let o = lsfd(&["validate", "--samples", "3000", "--tolerance", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("max relative error"));
    let o = lsfd(&["validate", "--samples", "200", "--tolerance", "1e-9"]);
    assert_eq!(o.status.code(), Some(1));
}
