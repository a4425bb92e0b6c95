//! End-to-end tests of the installed binary: exit codes, CSV schema,
//! determinism, the verify gate, and the env-var plumbing.

use std::path::Path;
use std::process::{Command, Output};

fn phicgc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phicgc"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_writes_csv_with_fixed_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "exp.json",
        &format!(
            r#"{{"problem":"heat1d","extents":[64],"levels":2,"output_dir":"{}"}}"#,
            dir.path().display()
        ),
    );
    let out = phicgc().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("heat1d-64-L2.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,levels,error,estimate,wall_seconds,matvecs_l1,tol_l1,matvecs_l2,tol_l2"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("1-grid,1,"));
    assert!(rows[1].starts_with("2-grid,2,"));
    assert!(dir.path().join("heat1d-64-L2.md").exists());
    assert!(stdout(&out).contains("| method |"));
}

#[test]
fn run_is_deterministic_except_wall_seconds() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let cfg = write_config(
            dir.path(),
            &format!("exp-{sub}.json"),
            &format!(
                r#"{{"problem":"heat1d","extents":[64],"levels":2,"output_dir":"{}"}}"#,
                out_dir.display()
            ),
        );
        let out = phicgc().args(["run", "--config"]).arg(&cfg).output().unwrap();
        assert!(out.status.success(), "stderr: {}", stderr(&out));
        csvs.push(std::fs::read_to_string(out_dir.join("heat1d-64-L2.csv")).unwrap());
    }
    let strip_wall = |text: &str| -> Vec<Vec<String>> {
        text.lines()
            .skip(1)
            .map(|line| {
                line.split(',')
                    .enumerate()
                    .filter(|(i, _)| *i != 4)
                    .map(|(_, f)| f.to_string())
                    .collect()
            })
            .collect()
    };
    assert_eq!(strip_wall(&csvs[0]), strip_wall(&csvs[1]));
}

#[test]
fn invalid_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"problem":"heat1d","extents":[64],"levels":2,"bogus":true}"#,
        r#"{"problem":"heat1d","extents":[63],"levels":2}"#,
        r#"{"problem":"heat3d","extents":[64],"levels":2}"#,
        r#"not json"#,
    ];
    for (i, body) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{i}.json"), body);
        let out = phicgc().args(["run", "--config"]).arg(&cfg).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "case {i}: {}", stderr(&out));
        assert!(stderr(&out).contains("config error"), "case {i}");
    }
    let out = phicgc()
        .args(["run", "--config", "/nonexistent/exp.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_fast_passes() {
    let out = phicgc().args(["verify", "--suite", "fast"]).output().unwrap();
    assert!(out.status.success(), "stdout: {}", stdout(&out));
    let text = stdout(&out);
    for name in [
        "scalar-phi-identity",
        "matrix-phi-identity",
        "residual-identity",
        "posterior-bound",
        "split-reconstruction",
        "transfer-adjointness",
        "tolerance-identity",
        "estimate-dominance",
        "reference-consistency",
    ] {
        assert!(text.contains(name), "missing check line for {name}");
    }
    assert!(text.contains("9/9 checks passed"));
}

#[test]
fn corrupt_tolerance_hook_fails_verify() {
    let out = phicgc()
        .args(["verify", "--suite", "fast", "--check", "tolerance-identity"])
        .env("PHICGC_VERIFY_CORRUPT_TOLERANCE", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("tolerance-identity       FAIL"));
}

#[test]
fn unknown_check_exits_2() {
    let out = phicgc()
        .args(["verify", "--suite", "fast", "--check", "no-such-check"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn table_merges_runs_with_different_depths() {
    let dir = tempfile::tempdir().unwrap();
    for levels in [2usize, 3] {
        let cfg = write_config(
            dir.path(),
            &format!("exp{levels}.json"),
            &format!(
                r#"{{"problem":"heat1d","extents":[64],"levels":{levels},"output_dir":"{}"}}"#,
                dir.path().display()
            ),
        );
        let out = phicgc().args(["run", "--config"]).arg(&cfg).output().unwrap();
        assert!(out.status.success(), "stderr: {}", stderr(&out));
    }
    let csv2 = dir.path().join("heat1d-64-L2.csv");
    let csv3 = dir.path().join("heat1d-64-L3.csv");
    let md = phicgc()
        .args(["table", "--inputs"])
        .arg(&csv2)
        .arg(&csv3)
        .args(["--format", "md"])
        .output()
        .unwrap();
    assert!(md.status.success());
    let text = stdout(&md);
    assert!(text.contains("matvecs (tol) L3"));
    assert!(text.contains("| 3-grid |"));
    let csv = phicgc()
        .args(["table", "--inputs"])
        .arg(&csv2)
        .arg(&csv3)
        .args(["--format", "csv"])
        .output()
        .unwrap();
    let text = stdout(&csv);
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "method,levels,error,estimate,wall_seconds,matvecs_l1,tol_l1,matvecs_l2,tol_l2,matvecs_l3,tol_l3"
    );
    // The 2-level rows must be padded to the 3-level width.
    for line in text.lines().skip(1) {
        assert_eq!(line.split(',').count(), header.split(',').count(), "row: {line}");
    }
}

#[test]
fn table_rejects_foreign_csv() {
    let dir = tempfile::tempdir().unwrap();
    let alien = dir.path().join("alien.csv");
    std::fs::write(&alien, "a,b,c\n1,2,3\n").unwrap();
    let out = phicgc().args(["table", "--inputs"]).arg(&alien).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_env_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "exp.json",
        &format!(
            r#"{{"problem":"heat3d","extents":[8,10,12],"levels":2,"output_dir":"{}"}}"#,
            dir.path().display()
        ),
    );
    for threads in ["1", "4"] {
        let out = phicgc()
            .args(["run", "--config"])
            .arg(&cfg)
            .env("PHICGC_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success(), "PHICGC_THREADS={threads}: {}", stderr(&out));
    }
}
