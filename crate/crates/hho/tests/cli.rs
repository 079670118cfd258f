use std::path::Path;
use std::process::{Command, Output};

use hho::config::RunConfig;
use hho::mesh_io::load_mesh;
use hho::report::RATES_HEADER;

fn hho(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hho")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = hho(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Rows of a rates CSV without the timing columns.
fn rows_without_timing(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().take(RATES_HEADER.len() - 2).map(String::from).collect())
        .collect()
}

#[test]
fn mesh_command_cell_counts() {
    let dir = tempfile::tempdir().unwrap();
    let rect = dir.path().join("rect.json");
    let out = ok(&["mesh", "--kind", "rect", "--n", "8", "--out", p(&rect)]);
    assert!(out.contains("cells 64"), "{out}");
    assert_eq!(load_mesh(&rect).unwrap().num_cells(), 64);
    let tri = dir.path().join("tri.json");
    ok(&["mesh", "--kind", "tri", "--n", "4", "--out", p(&tri)]);
    assert_eq!(load_mesh(&tri).unwrap().num_cells(), 32);
}

#[test]
fn voronoi_mesh_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for f in [&a, &b] {
        ok(&["mesh", "--kind", "voronoi", "--cells", "64", "--seed", "3", "--out", p(f)]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(load_mesh(&a).unwrap().num_cells(), 64);
}

#[test]
fn patch_solve_on_mesh_file() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("v.json");
    ok(&["mesh", "--kind", "voronoi", "--cells", "16", "--lloyd", "5", "--out", p(&mesh)]);
    let out_dir = dir.path().join("out");
    ok(&["solve", "--case", "0", "--k", "2", "--variant", "B", "--mesh-file", p(&mesh), "--out-dir", p(&out_dir)]);
    let mut r = csv::Reader::from_path(out_dir.join("solve_B_k2_strong.csv")).unwrap();
    let rec = r.records().next().unwrap().unwrap();
    let e2: f64 = rec[3].parse().unwrap();
    let e0: f64 = rec[4].parse().unwrap();
    assert!(e2 <= 1e-8 && e0 <= 1e-8, "{e2} {e0}");
    let sol = std::fs::read_to_string(out_dir.join("solution_B_k2_strong.csv")).unwrap();
    assert_eq!(sol.lines().count(), 17);
}

#[test]
fn print_config_round_trips() {
    let text = ok(&["convergence", "--k", "3", "--bc", "nitsche", "--levels", "4,8,16", "--print-config"]);
    let c = RunConfig::from_toml(&text).unwrap();
    assert_eq!(c.k, 3);
    assert_eq!(c.levels, vec![4, 8, 16]);
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("run.toml");
    std::fs::write(&f, &text).unwrap();
    assert_eq!(ok(&["solve", "--config", p(&f), "--print-config"]), text);
}

#[test]
fn config_errors_exit_with_2() {
    assert_eq!(hho(&["solve", "--variant", "C", "--bc", "nitsche"]).status.code(), Some(2));
    assert_eq!(hho(&["solve", "--k", "6"]).status.code(), Some(2));
    assert_eq!(hho(&["convergence", "--levels", "4,8"]).status.code(), Some(2));
    assert_eq!(hho(&["solve", "--config", "/nonexistent.toml"]).status.code(), Some(2));
    assert_eq!(hho(&["bogus"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = hho(&["solve", "--mesh-n", "4", "--solver", "cg", "--max-iters", "1", "--out-dir", p(dir.path())]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for t in ["1", "4"] {
        let d = dir.path().join(t);
        ok(&["--threads", t, "convergence", "--mesh-kind", "voronoi", "--levels", "16,32,64", "--k", "1", "--out-dir", p(&d)]);
        files.push(d.join("rates_A_k1_strong.csv"));
    }
    assert_eq!(rows_without_timing(&files[0]), rows_without_timing(&files[1]));
}

#[test]
fn convergence_writes_rate_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["convergence", "--k", "0", "--levels", "2,4,8", "--out-dir", p(dir.path())]);
    assert!(out.contains("fitted"), "{out}");
    let text = std::fs::read_to_string(dir.path().join("rates_A_k0_strong.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), RATES_HEADER.join(","));
    assert_eq!(lines.count(), 3);
}

#[test]
fn compare_variants_writes_one_csv_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["compare", "--what", "variants", "--k", "0", "--levels", "2,4,8", "--out-dir", p(dir.path())]);
    assert!(out.contains("spread_h2"), "{out}");
    for v in ["A", "B", "C"] {
        assert!(dir.path().join(format!("rates_{v}_k0_strong.csv")).exists());
    }
    ok(&["compare", "--what", "bc", "--k", "0", "--levels", "2,4,8", "--out-dir", p(dir.path())]);
    assert!(dir.path().join("rates_A_k0_nitsche.csv").exists());
}
