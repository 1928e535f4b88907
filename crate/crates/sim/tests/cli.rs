use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 1
cp_count = 3
type_grid = [0, 50, 100]
true_types = [100, 50, 0]
file_count = 10
zipf_alpha = 0.8
file_size = 5e6
sbs_count = 3
user_counts = [6, 6, 6]
storage_capacity_bits = 7.5e7
grid_step = 1.5e7
"#;

const SYMMETRIC: &str = r#"
seed = 2
cp_count = 3
type_grid = [0, 50, 100]
true_types = [100, 0, 50]
file_count = 10
zipf_alpha = 2.0
file_size = 5e6
sbs_count = 3
user_counts = [6, 6, 6]
storage_capacity_bits = 7.5e7
grid_step = 1.5e7
symmetric = true
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scn-cache"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn records(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn num(r: &csv::StringRecord, i: usize) -> f64 {
    r[i].parse().unwrap()
}

#[test]
fn identical_configs_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    for (sub, file) in [
        ("design", "contracts.csv"),
        ("sweep-misreport", "misreport.csv"),
        ("baseline", "baseline.csv"),
    ] {
        let a = run(dir.path(), &["--out", "a", sub, &cfg]);
        let b = run(dir.path(), &["--out", "b", sub, &cfg]);
        assert!(
            a.status.success() && b.status.success(),
            "{}",
            String::from_utf8_lossy(&a.stderr)
        );
        let left = fs::read(dir.path().join("a").join(file)).unwrap();
        let right = fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(!left.is_empty());
        assert_eq!(left, right, "{file}");
    }
}

#[test]
fn csv_utilities_rederive_from_rate_and_price() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    assert!(run(dir.path(), &["--out", "o", "design", &cfg])
        .status
        .success());
    assert!(run(dir.path(), &["--out", "o", "sweep-misreport", &cfg])
        .status
        .success());
    let contracts = records(&dir.path().join("o/contracts.csv"));
    assert_eq!(contracts.len(), 3);
    for r in &contracts {
        let (price, rate, utility) = (num(r, 4), num(r, 5), num(r, 7));
        assert!(
            (utility - (rate - price)).abs() <= 1e-9 * rate.abs().max(1.0),
            "{r:?}"
        );
    }
    let sweep = records(&dir.path().join("o/misreport.csv"));
    assert_eq!(sweep.len(), 9);
    for r in &sweep {
        let (price, rate, utility) = (num(r, 5), num(r, 7), num(r, 8));
        assert!(
            (utility - (rate - price)).abs() <= 1e-9 * rate.abs().max(1.0),
            "{r:?}"
        );
    }
}

#[test]
fn header_rows_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    assert!(run(dir.path(), &["--out", "o", "design", &cfg])
        .status
        .success());
    let text = fs::read_to_string(dir.path().join("o/contracts.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "cp,true_type,declared_type,storage_bits,price,rate,cost,utility"
    );
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_config(dir.path(), "small.toml", SMALL);
    let out = run(dir.path(), &["--out", "o", "--exact", "verify", &ok]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = fs::read_to_string(dir.path().join("o/verify.csv")).unwrap();
    assert!(rows.contains("ic_max_misreport_gain,0,"));

    let sym = write_config(dir.path(), "sym.toml", SYMMETRIC);
    let out = run(dir.path(), &["--out", "s", "--exact", "verify", &sym]);
    assert_eq!(out.status.code(), Some(2));
    let rows = fs::read_to_string(dir.path().join("s/verify.csv")).unwrap();
    assert!(
        rows.lines()
            .any(|l| l.starts_with("price_monotonicity,all,") && l.ends_with(",fail")),
        "{rows}"
    );
}

#[test]
fn heuristic_verify_is_not_asserted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = run(dir.path(), &["--out", "o", "--heuristic", "verify", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let rows = fs::read_to_string(dir.path().join("o/verify.csv")).unwrap();
    assert!(rows.contains("heuristic, IC not asserted"));
}

#[test]
fn bad_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write_config(dir.path(), "missing.toml", "cp_count = 2\n");
    let out = run(dir.path(), &["design", &missing]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("storage_capacity_bits"));

    let out = run(dir.path(), &["design", "does-not-exist.toml"]);
    assert_eq!(out.status.code(), Some(1));

    let unknown = write_config(dir.path(), "unknown.toml", &format!("{SMALL}\nbogus = 1\n"));
    let out = run(dir.path(), &["design", &unknown]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn scaling_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = run(
        dir.path(),
        &[
            "--out", "o", "scaling", &cfg, "--cps", "2,3", "--alphas", "0.2,2.0", "--seeds", "1..3",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(records(&dir.path().join("o/scaling.csv")).len(), 2 * 2 * 3);
    let summary = records(&dir.path().join("o/scaling_summary.csv"));
    assert_eq!(summary.len(), 4);
    assert!(summary.iter().all(|r| &r[2] == "3"));
}

#[test]
fn grid_step_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    assert!(run(
        dir.path(),
        &["--out", "o", "--grid-step", "7.5e7", "design", &cfg]
    )
    .status
    .success());
    let storage: Vec<f64> = records(&dir.path().join("o/contracts.csv"))
        .iter()
        .map(|r| num(r, 3))
        .collect();
    assert!(
        storage.iter().all(|&s| s == 0.0 || s == 7.5e7),
        "{storage:?}"
    );
}
