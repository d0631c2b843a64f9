//! End-to-end tests of the command-line binary: exit codes, file outputs,
//! and pipeline behavior.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_discrepancy-cli"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_writes_deterministic_instance() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let spec = r#"{"family":"randomSetSystem","n":16,"m":16,"seed":7}"#;
    let out = run(&["generate", "--spec", spec, "--out", path_str(&a)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["generate", "--spec", spec, "--out", path_str(&b)]);
    assert!(out.status.success());
    let fa = std::fs::read(&a).unwrap();
    let fb = std::fs::read(&b).unwrap();
    assert!(!fa.is_empty());
    assert_eq!(fa, fb, "same spec must yield identical bytes");
}

#[test]
fn generate_rejects_bad_spec_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "generate",
        "--spec",
        r#"{"family":"randomBlockFamily","n":4,"m":9,"q":2,"seed":0}"#,
        "--out",
        path_str(&dir.path().join("x.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

fn pipeline(algo: &str, spec: &str) {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let coloring = dir.path().join("coloring.json");
    let trace = dir.path().join("trace.json");
    let out = run(&["generate", "--spec", spec, "--out", path_str(&inst)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[
        "solve",
        "--algo",
        algo,
        "--in",
        path_str(&inst),
        "--out",
        path_str(&coloring),
        "--trace",
        path_str(&trace),
    ]);
    assert!(
        out.status.success(),
        "solve {algo}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("ratio="), "solve output: {stdout}");
    let out = run(&[
        "verify",
        "--algo",
        algo,
        "--in",
        path_str(&inst),
        "--coloring",
        path_str(&coloring),
        "--trace",
        path_str(&trace),
    ]);
    assert!(
        out.status.success(),
        "verify {algo}: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS"), "verify output: {stdout}");
}

#[test]
fn spencer_pipeline_passes() {
    pipeline("spencer", r#"{"family":"randomSetSystem","n":32,"m":32,"seed":1}"#);
}

#[test]
fn matrix_pipeline_passes() {
    pipeline("matrix", r#"{"family":"randomBlockFamily","n":32,"m":32,"q":2,"seed":2}"#);
}

#[test]
fn bdg_pipeline_passes() {
    pipeline("bdg", r#"{"family":"randomUnitColumns","n":32,"m":32,"seed":3}"#);
}

#[test]
fn verify_fails_on_tampered_coloring_with_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let coloring = dir.path().join("coloring.json");
    run(&[
        "generate",
        "--spec",
        r#"{"family":"randomSetSystem","n":16,"m":16,"seed":4}"#,
        "--out",
        path_str(&inst),
    ]);
    let out = run(&[
        "solve",
        "--algo",
        "spencer",
        "--in",
        path_str(&inst),
        "--out",
        path_str(&coloring),
    ]);
    assert!(out.status.success());
    // Truncate the coloring to the wrong length by dropping the last sign.
    let text = std::fs::read_to_string(&coloring).unwrap();
    let open = text.find('[').unwrap();
    let close = text.find(']').unwrap();
    let mut signs: Vec<&str> = text[open + 1..close].split(',').collect();
    signs.pop();
    let tampered = format!("{}{}{}", &text[..=open], signs.join(","), &text[close..]);
    assert_ne!(tampered, text);
    std::fs::write(&coloring, tampered).unwrap();
    let out = run(&[
        "verify",
        "--algo",
        "spencer",
        "--in",
        path_str(&inst),
        "--coloring",
        path_str(&coloring),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn verify_without_trace_warns_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let coloring = dir.path().join("coloring.json");
    run(&[
        "generate",
        "--spec",
        r#"{"family":"randomSetSystem","n":16,"m":16,"seed":5}"#,
        "--out",
        path_str(&inst),
    ]);
    run(&[
        "solve",
        "--algo",
        "spencer",
        "--in",
        path_str(&inst),
        "--out",
        path_str(&coloring),
    ]);
    let out = run(&[
        "verify",
        "--algo",
        "spencer",
        "--in",
        path_str(&inst),
        "--coloring",
        path_str(&coloring),
    ]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("warning"), "stderr: {stderr}");
}

#[test]
fn mismatched_algo_and_instance_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let coloring = dir.path().join("coloring.json");
    run(&[
        "generate",
        "--spec",
        r#"{"family":"randomBlockFamily","n":16,"m":16,"q":2,"seed":6}"#,
        "--out",
        path_str(&inst),
    ]);
    let out = run(&[
        "solve",
        "--algo",
        "spencer",
        "--in",
        path_str(&inst),
        "--out",
        path_str(&coloring),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn foreign_params_rejected_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let coloring = dir.path().join("coloring.json");
    run(&[
        "generate",
        "--spec",
        r#"{"family":"randomSetSystem","n":16,"m":16,"seed":8}"#,
        "--out",
        path_str(&inst),
    ]);
    // C applies to column balancing, not spencer.
    let out = run(&[
        "solve",
        "--algo",
        "spencer",
        "--in",
        path_str(&inst),
        "--out",
        path_str(&coloring),
        "--params",
        r#"{"C":40}"#,
    ]);
    assert_eq!(out.status.code(), Some(2));
    // Unknown keys are rejected outright.
    let out = run(&[
        "solve",
        "--algo",
        "spencer",
        "--in",
        path_str(&inst),
        "--out",
        path_str(&coloring),
        "--params",
        r#"{"typo_scale":2}"#,
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bdg_flags_override_params() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let coloring = dir.path().join("coloring.json");
    run(&[
        "generate",
        "--spec",
        r#"{"family":"randomUnitColumns","n":32,"m":32,"seed":9}"#,
        "--out",
        path_str(&inst),
    ]);
    let out = run(&[
        "solve",
        "--algo",
        "bdg",
        "--in",
        path_str(&inst),
        "--out",
        path_str(&coloring),
        "--bdg-C",
        "64",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // An invalid override (beta below C alpha^2) is a usage error.
    let out = run(&[
        "solve",
        "--algo",
        "bdg",
        "--in",
        path_str(&inst),
        "--out",
        path_str(&coloring),
        "--params",
        r#"{"beta_scale":1e-6}"#,
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_writes_csv_with_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = run(&[
        "bench",
        "--algo",
        "spencer",
        "--sizes",
        "16,32",
        "--seeds",
        "2",
        "--out",
        path_str(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "algo,n,m,q,seed,metric,bound_ratio,iterations,wall_ms");
    assert_eq!(lines.len(), 1 + 2 * 2);
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 9);
        assert_eq!(fields[0], "spencer");
        assert_eq!(fields[1], fields[2], "square instances have n = m");
        assert_eq!(fields[3], "1");
    }
}

#[test]
fn bench_replay_is_deterministic_modulo_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let r = run(&[
            "bench",
            "--algo",
            "bdg",
            "--sizes",
            "16,32",
            "--seeds",
            "2",
            "--out",
            path_str(out),
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let strip = |p: &Path| -> Vec<String> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn bench_with_no_sizes_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    let out = run(&[
        "bench",
        "--algo",
        "matrix",
        "--seeds",
        "2",
        "--out",
        path_str(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text, "algo,n,m,q,seed,metric,bound_ratio,iterations,wall_ms\n");
}
