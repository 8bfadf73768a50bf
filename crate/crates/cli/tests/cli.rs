use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use leafwise_cli::{parse_analyses, parse_range, run, Analysis, Format, RunConfig};
use serde_json::Value;

const T2: &str = r#"{"family": "kronecker_torus", "alpha": ["1", "sqrt2"]}"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn leafwise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leafwise")).args(args).output().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn derham_table_on_the_two_torus() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "t2.json", T2);
    let out = dir.path().join("out");
    let o = leafwise(&["derham", "--model", model.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out.join("derham.json"));
    assert_eq!(r["schema_version"], "leafwise-report/1");
    assert_eq!(r["passed"], true);
    let entries = r["data"]["leafwise"]["dims"]["entries"].as_array().unwrap();
    for (k, h) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let e = entries.iter().find(|e| e["r"] == k && e["s"] == h).unwrap();
        assert_eq!(e["dim"], 1);
    }
    assert!(entries.iter().all(|e| e["dim"].as_u64().unwrap() <= 1));
    assert!(r["operations"].as_array().unwrap().iter().any(|o| o == "derham::cohomology_dims"));
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["status"], "smooth");
    assert_eq!(s["certificate"]["verdict"], "diophantine");
}

#[test]
fn resonant_model_is_formal() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "res.json", r#"{"family": "kronecker_torus", "alpha": ["1", "2"]}"#);
    let mut cfg = RunConfig::new(&model, dir.path().join("out"));
    cfg.window.bound = 1;
    cfg.trials = 10;
    let outcome = run(&cfg).unwrap();
    assert_eq!(outcome.summary.status, "formal (non-Diophantine)");
    assert_eq!(outcome.exit_code(), 0);
    let sym = outcome.summary.analyses.iter().find(|a| a.analysis == Analysis::Symbols).unwrap();
    assert_eq!(sym.outcome, "skipped");
}

#[test]
fn corrupted_composition_fails_with_named_check() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "t2.json", T2);
    let out = dir.path().join("out");
    let o = leafwise(&[
        "symbols",
        "--model",
        model.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--trials",
        "20",
        "--corrupt-composition",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("failed: symbols: associativity above the watermark"), "{stdout}");
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["all_checks_passed"], false);
}

#[test]
fn parse_errors_carry_a_location() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "bad.json", "{\"family\": \"kronecker_torus\",\n \"alpha\": [\"1\", sqrt2]}");
    let o = leafwise(&["derham", "--model", model.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:line 2 column"), "{err}");

    let model = write(dir.path(), "unknown.json", r#"{"family": "kronecker_torus", "alpha": ["1"], "beta": 1}"#);
    let o = leafwise(&["derham", "--model", model.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unsupported_pairing_is_a_capability_error() {
    let dir = tempfile::tempdir().unwrap();
    let model =
        write(dir.path(), "h.json", r#"{"family": "lie_frame", "dim": 3, "structure": [[1, 2, 3, "1"]], "leaf": [3]}"#);
    let o = leafwise(&["symbols", "--model", model.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("capability error"));
}

#[test]
fn markdown_and_csv_are_rendered_from_json() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "t2.json", T2);
    for (format, ext) in [(Format::Markdown, "md"), (Format::Csv, "csv")] {
        let mut cfg = RunConfig::new(&model, dir.path().join(ext));
        cfg.analyses = vec![Analysis::Hochschild];
        cfg.skip_unsupported = false;
        cfg.window.bound = 1;
        cfg.format = format;
        let outcome = run(&cfg).unwrap();
        assert_eq!(outcome.exit_code(), 0);
        let text = std::fs::read_to_string(dir.path().join(ext).join(format!("hochschild.{ext}"))).unwrap();
        assert!(dir.path().join(ext).join("hochschild.json").exists());
        match format {
            Format::Markdown => assert!(text.contains("| dim | h | k |"), "{text}"),
            _ => assert!(text.contains("data.prediction.hh[1],6"), "{text}"),
        }
    }
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "t2.json", T2);
    let mut texts = Vec::new();
    for i in 0..2 {
        let mut cfg = RunConfig::new(&model, dir.path().join(format!("o{i}")));
        cfg.analyses = vec![Analysis::Derham, Analysis::Symbols];
        cfg.window.bound = 1;
        cfg.trials = 20;
        cfg.seed = 7;
        run(&cfg).unwrap();
        texts.push(std::fs::read(dir.path().join(format!("o{i}")).join("symbols.json")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn argument_parsing() {
    assert_eq!(parse_range("-2:2").unwrap(), (-2, 2));
    assert!(parse_range("2:-2").is_err());
    assert!(parse_range("3").is_err());
    let (a, all) = parse_analyses("symbols,derham,derham").unwrap();
    assert_eq!(a, vec![Analysis::Derham, Analysis::Symbols]);
    assert!(!all);
    assert_eq!(parse_analyses("all").unwrap().0.len(), 6);
    assert!(parse_analyses("hodge").is_err());
    assert!(parse_analyses("").is_err());
}
