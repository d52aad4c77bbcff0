//! End-to-end CLI checks over a small synthetic dataset: subcommands,
//! output files, and exit codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_scm-debias")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn cli")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

/// Tiny planted-bias dataset plus a config file referencing it with
/// relative paths.
fn write_fixture(dir: &Path) -> PathBuf {
    let d = 8;
    let mut lines = String::new();
    let mut push = |token: &str, v: &[f64]| {
        write!(lines, "{token}").unwrap();
        for x in v {
            write!(lines, " {x:?}").unwrap();
        }
        lines.push('\n');
    };
    for i in 0..6 {
        let s = 1.0 + 0.2 * i as f64;
        let mut pos = vec![0.0; d];
        let mut neg = vec![0.0; d];
        pos[0] = s;
        pos[2 + (i % (d - 2))] = 0.05;
        neg[0] = -s;
        push(&format!("warmpos{i}"), &pos);
        push(&format!("warmneg{i}"), &neg);
        let mut pos = vec![0.0; d];
        let mut neg = vec![0.0; d];
        pos[1] = s;
        neg[1] = -s;
        neg[2 + ((i + 2) % (d - 2))] = 0.04;
        push(&format!("comppos{i}"), &pos);
        push(&format!("compneg{i}"), &neg);
    }
    for i in 0..4 {
        let mut g = vec![0.1; d];
        let mut r = vec![-0.1; d];
        g[2 + (i % (d - 2))] = 1.0 + i as f64 * 0.3;
        r[2 + ((i + 3) % (d - 2))] = -1.0 - i as f64 * 0.2;
        push(&format!("g{i}"), &g);
        push(&format!("r{i}"), &r);
    }
    std::fs::write(dir.join("vectors.txt"), lines).unwrap();
    std::fs::write(dir.join("gender.txt"), "g0\ng1\ng2\ng3\n").unwrap();
    std::fs::write(dir.join("race.txt"), "r0\nr1\nr2\nr3\n").unwrap();
    let pair_json = |prefix: &str| {
        let entries: Vec<String> = (0..6)
            .map(|i| format!(r#"{{"pos":"{prefix}pos{i}","neg":"{prefix}neg{i}","score":{}}}"#, 6 - i))
            .collect();
        format!("[{}]", entries.join(","))
    };
    std::fs::write(dir.join("warmth.json"), pair_json("warm")).unwrap();
    std::fs::write(dir.join("competence.json"), pair_json("comp")).unwrap();

    let config = r#"
gender_terms = "gender.txt"
race_terms = "race.txt"
warmth_pairs = "warmth.json"
competence_pairs = "competence.json"
top_k = 6
constructions = ["summed", "concatenated", "race_only", "gender_only"]
seeds = [11, 22, 33]
output_dir = "out"

[[embeddings]]
name = "toy"
path = "vectors.txt"
format = "glove-text"

[[operators]]
operator = "subtraction"

[[operators]]
operator = "linear_projection"

[[operators]]
operator = "partial_projection"
beta = 1.0
smoothing = { kind = "gaussian", sigma = 1.0 }
"#;
    let path = dir.join("exp.toml");
    std::fs::write(&path, config).unwrap();
    path
}

#[test]
fn run_emits_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_fixture(dir.path());
    let out = run(&["run", "--config", config.to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let outdir = dir.path().join("out");
    assert!(outdir.join("report.json").exists());
    assert!(outdir.join("report.csv").exists());
    assert!(outdir.join("report.md").exists());
    let md = std::fs::read_to_string(outdir.join("report.md")).unwrap();
    assert!(md.contains("| Aggregation Method | Mean ECT | Mean EQT |"));
    assert!(md.contains("ECT_lp"));
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_fixture(dir.path());
    let cfg = config.to_str().unwrap();
    let out1 = dir.path().join("o1");
    let out2 = dir.path().join("o2");
    assert_eq!(
        run(&["run", "--config", cfg, "--out", out1.to_str().unwrap()]).status.code(),
        Some(0)
    );
    assert_eq!(
        run(&["run", "--config", cfg, "--out", out2.to_str().unwrap()]).status.code(),
        Some(0)
    );
    for name in ["report.json", "report.csv", "report.md"] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn seed_override_changes_eqt_only_cells_not_structure() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_fixture(dir.path());
    let out = run(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--seeds",
        "5,6",
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("o/report.csv")).unwrap();
    // two per-seed entries per metric row
    let line = csv.lines().find(|l| l.contains(",eqt,")).unwrap();
    assert_eq!(line.split(',').last().unwrap().split(';').count(), 2);
}

#[test]
fn fit_prints_direction_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_fixture(dir.path());
    let out = run(&["fit", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("warmth: 6 pairs"));
    assert!(text.contains("cos(u_warmth, u_competence)"));
}

#[test]
fn debias_roundtrips_through_eval() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_fixture(dir.path());
    let cfg = config.to_str().unwrap();

    let before = dir.path().join("before.txt");
    let after = dir.path().join("after.txt");
    // emit two differently debiased files and score one against the other
    let out = run(&["debias", "--config", cfg, "--target", "summed", "--operator", "subtraction", "--out", before.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["debias", "--config", cfg, "--target", "summed", "--operator", "linear_projection", "--out", after.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    // attributes resolvable in the debiased files' own vocabulary? ECT
    // attributes resolve in `before`, which holds compound labels, so
    // point at the compound labels themselves.
    let attrs = dir.path().join("attrs.txt");
    std::fs::write(&attrs, "g0_r0\ng1_r1\ng2_r2\n").unwrap();
    let out = run(&[
        "eval",
        "--before", before.to_str().unwrap(),
        "--after", after.to_str().unwrap(),
        "--attributes", attrs.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("ect rho="));
}

#[test]
fn report_rerenders_from_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_fixture(dir.path());
    let outdir = dir.path().join("out");
    assert_eq!(
        run(&["run", "--config", config.to_str().unwrap(), "--format", "csv"]).status.code(),
        Some(0)
    );
    let rerender = dir.path().join("rerender");
    let out = run(&[
        "report",
        "--report", outdir.join("report.json").to_str().unwrap(),
        "--out", rerender.to_str().unwrap(),
        "--format", "markdown",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(rerender.join("report.md").exists());
}

#[test]
fn config_error_exits_one() {
    let out = run(&["run", "--config", "/nonexistent/exp.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn partial_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_fixture(dir.path());
    let mut config = std::fs::read_to_string(&config_path).unwrap();
    config.push_str("\n[[embeddings]]\nname = \"broken\"\npath = \"missing.txt\"\nformat = \"glove-text\"\n");
    std::fs::write(&config_path, config).unwrap();
    let out = run(&["run", "--config", config_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
