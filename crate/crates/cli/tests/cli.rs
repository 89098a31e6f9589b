use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn hystkin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hystkin"))
        .current_dir(dir)
        .env_remove("HYSTKIN_LOG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hystkin(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str], code: &str, status: i32) -> String {
    let out = hystkin(dir, args);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(out.status.code(), Some(status), "{args:?}: {stderr}");
    let last = stderr.lines().last().unwrap_or_default();
    assert!(last.starts_with(&format!("{code}: ")), "{args:?}: {stderr}");
    stderr
}

/// Dataset plus trained bundle in a fresh directory.
fn trained(preset: &str, seed: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["generate", "--preset", preset, "--seed", seed, "--out", "data.csv"]);
    ok(dir.path(), &["train", "--data", "data.csv", "--seed", seed, "--out", "model"]);
    dir
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ok(dir.path(), &["--help"]).contains("select-k"));
    assert!(ok(dir.path(), &["--version"]).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn argument_errors_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    fails(dir.path(), &["frobnicate"], "E_CONFIG", 2);
    fails(dir.path(), &["generate", "--out", "x.csv", "--cycles", "many"], "E_CONFIG", 2);
    fails(dir.path(), &["generate", "--preset", "roll-like", "--out", "x.csv"], "E_CONFIG", 2);
    fails(dir.path(), &["generate", "--steps", "7", "--out", "x.csv"], "E_CONFIG", 2);
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn invalid_log_level_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hystkin"))
        .current_dir(dir.path())
        .env("HYSTKIN_LOG", "verbose")
        .args(["generate", "--out", "d.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("E_CONFIG: "));
}

#[test]
fn quiet_log_level_silences_warnings() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["generate", "--seed", "2", "--out", "d.csv"]);
    let out = Command::new(env!("CARGO_BIN_EXE_hystkin"))
        .current_dir(dir.path())
        .env("HYSTKIN_LOG", "quiet")
        .args(["train", "--data", "d.csv", "--max-iters", "5", "--out", "m"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stderr.is_empty(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_and_malformed_inputs_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let msg = fails(dir.path(), &["train", "--data", "absent.csv", "--out", "m"], "E_IO", 3);
    assert!(msg.contains("absent.csv"));
    fs::write(dir.path().join("bad.csv"), "cycle_id,step_index,q,gamma\n0,0,0.1,abc\n").unwrap();
    fails(dir.path(), &["train", "--data", "bad.csv", "--out", "m"], "E_IO", 3);
    fails(dir.path(), &["evaluate", "--data", "bad.csv", "--model", "nowhere", "--out", "e"], "E_IO", 3);
    fails(dir.path(), &["report", "--dir", "nowhere"], "E_IO", 3);
    assert!(!dir.path().join("m").exists());
}

#[test]
fn bad_config_files_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "cycels = 4\n").unwrap();
    fails(dir.path(), &["--config", "c.toml", "generate", "--out", "d.csv"], "E_CONFIG", 2);
    fails(dir.path(), &["--config", "missing.toml", "generate", "--out", "d.csv"], "E_IO", 3);
}

#[test]
fn flag_overrides_file_overrides_default() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("c.toml"), "seed = 5\ncycles = 3\nsteps = 40\n").unwrap();
    ok(p, &["--config", "c.toml", "generate", "--out", "from_file.csv"]);
    ok(p, &["generate", "--seed", "5", "--cycles", "3", "--steps", "40", "--out", "explicit.csv"]);
    assert_eq!(read(p.join("from_file.csv")), read(p.join("explicit.csv")));

    ok(p, &["--config", "c.toml", "generate", "--seed", "6", "--out", "flag.csv"]);
    ok(p, &["generate", "--seed", "6", "--cycles", "3", "--steps", "40", "--out", "explicit6.csv"]);
    assert_eq!(read(p.join("flag.csv")), read(p.join("explicit6.csv")));
    assert_ne!(read(p.join("flag.csv")), read(p.join("from_file.csv")));

    ok(p, &["generate", "--out", "default.csv"]);
    assert_eq!(read(p.join("default.csv")).lines().count(), 1 + 9 * 200);
}

#[test]
fn bad_k_range_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["generate", "--cycles", "2", "--steps", "40", "--out", "d.csv"]);
    fails(p, &["select-k", "--data", "d.csv", "--k-min", "3", "--k-max", "50", "--out", "s"], "E_CONFIG", 2);
    fails(p, &["select-k", "--data", "d.csv", "--k-min", "4", "--k-max", "2", "--out", "s"], "E_CONFIG", 2);
    fails(p, &["train", "--data", "d.csv", "--train-cycles", "5", "--out", "m"], "E_CONFIG", 2);
}

#[test]
fn pipeline_is_deterministic_and_reruns_overwrite_cleanly() {
    let a = trained("pitch-like", "4");
    let b = trained("pitch-like", "4");
    for dir in [&a, &b] {
        ok(dir.path(), &["evaluate", "--data", "data.csv", "--model", "model", "--out", "eval"]);
    }
    for f in ["data.csv", "model/nominal", "model/cw", "model/ccw", "model/meta", "model/fit_report.txt"] {
        assert_eq!(read(a.path().join(f)), read(b.path().join(f)), "{f}");
    }
    for f in ["results.csv", "per_sample.csv", "loop_overlay.svg"] {
        assert_eq!(read(a.path().join("eval").join(f)), read(b.path().join("eval").join(f)), "{f}");
    }

    let before = read(a.path().join("eval/results.csv"));
    ok(a.path(), &["evaluate", "--data", "data.csv", "--model", "model", "--out", "eval"]);
    assert_eq!(read(a.path().join("eval/results.csv")), before);
    let mut names: Vec<String> =
        fs::read_dir(a.path().join("eval")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["loop_overlay.svg", "per_sample.csv", "results.csv"]);

    let results = read(a.path().join("eval/results.csv"));
    let mut lines = results.lines();
    assert_eq!(lines.next(), Some("rmse_nominal,rmse_compensated,improvement_pct"));
    let v: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!(v[1] < v[0]);
    assert!((v[2] - 100.0 * (v[0] - v[1]) / v[0]).abs() < 1e-9);
    assert_eq!(read(a.path().join("eval/per_sample.csv")).lines().count(), 1 + 3 * 200);
}

#[test]
fn report_prints_tip_error() {
    let dir = trained("pitch-like", "8");
    let p = dir.path();
    ok(p, &["evaluate", "--data", "data.csv", "--model", "model", "--out", "eval"]);
    let printed = ok(p, &["report", "--dir", "eval", "--model", "model", "--arm-length-mm", "3"]);
    assert_eq!(printed, read(p.join("eval/report.txt")));
    let field = |key: &str| -> f64 {
        printed.lines().find_map(|l| l.strip_prefix(key)).unwrap().trim().parse().unwrap()
    };
    let rmse = field("rmse_compensated_deg ");
    let tip = field("tip_error_compensated_um ");
    assert!((tip - rmse * std::f64::consts::PI / 180.0 * 3000.0).abs() < 0.05);
    assert!(printed.contains("within_bound yes"));
    assert!(printed.contains("nominal: points="));

    let doubled = ok(p, &["report", "--dir", "eval", "--arm-length-mm", "6", "--out", "r6.txt"]);
    let tip6: f64 =
        doubled.lines().find_map(|l| l.strip_prefix("tip_error_compensated_um ")).unwrap().parse().unwrap();
    assert!((tip6 - 2.0 * tip).abs() < 0.02);
    fails(p, &["report", "--dir", "eval", "--arm-length-mm", "-1"], "E_CONFIG", 2);
}

#[test]
fn invert_writes_rows_and_flags_unreachable_targets() {
    let dir = trained("yaw-like", "1");
    let p = dir.path();
    fs::write(p.join("targets.txt"), "gamma_des\n10\n10\n-25\n").unwrap();
    ok(p, &["invert", "--model", "model", "--targets", "targets.txt", "--q-prev", "0", "--out", "inv.csv"]);
    let csv = read(p.join("inv.csv"));
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(csv.lines().next(), Some("gamma_des,q_star,gamma_achieved,iterations,branch_summary,converged"));
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r[5], "true");
        let want: f64 = r[0].parse().unwrap();
        let got: f64 = r[2].parse().unwrap();
        assert!((want - got).abs() <= 0.05);
    }
    // The second request starts at the first answer.
    assert_eq!(rows[1][1], rows[0][1]);
    assert!(rows[1][3].parse::<usize>().unwrap() <= 2);
    assert!(rows[2][4].starts_with("ccw"));

    let msg = fails(
        p,
        &["invert", "--model", "model", "--target", "5", "--target", "80", "--out", "far.csv"],
        "E_UNREACHABLE",
        5,
    );
    assert!(msg.contains("1 of 2"));
    let far = read(p.join("far.csv"));
    assert_eq!(far.lines().count(), 3);
    assert!(far.lines().nth(2).unwrap().ends_with(",false"));

    fails(p, &["invert", "--model", "model", "--out", "none.csv"], "E_CONFIG", 2);
    fails(p, &["invert", "--model", "model", "--target", "5", "--epsilon", "0", "--out", "e.csv"], "E_CONFIG", 2);
}

#[test]
fn select_k_writes_table_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["generate", "--seed", "3", "--out", "d.csv"]);
    let out = ok(p, &["select-k", "--data", "d.csv", "--train-cycles", "6", "--k-max", "6", "--out", "sel"]);
    assert!(out.starts_with("best_k_bic="));
    let table = read(p.join("sel/bic_aic.csv"));
    assert_eq!(table.lines().count(), 7);
    let svg = read(p.join("sel/bic_aic.svg"));
    assert!(svg.starts_with("<svg") && svg.contains("BIC") && svg.contains("AIC"));
    let again = PathBuf::from("sel2");
    ok(p, &["select-k", "--data", "d.csv", "--train-cycles", "6", "--k-max", "6", "--out", again.to_str().unwrap()]);
    assert_eq!(table, read(p.join("sel2/bic_aic.csv")));
    assert_eq!(svg, read(p.join("sel2/bic_aic.svg")));
}
