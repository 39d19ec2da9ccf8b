use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn indra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_indra")).args(args).output().expect("spawn indra")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = indra(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bad_flag_values_are_usage_errors() {
    for args in [
        &["build", "--input", "x", "--out", "y", "--anchors", "random:zero"][..],
        &["match", "--input", "x", "--paired", "y", "--out", "z", "--sim", "jaccard"],
        &["build", "--input", "x", "--out", "y", "--ops", "sparsify:"],
    ] {
        assert_eq!(indra(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn missing_input_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = indra(&["build", "--input", "/no/such/file.indr", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn verify_on_build_output_passes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("e.csv"), "id,x0,x1,x2\na,1,0,0\nb,0,1,0\nc,1,1,0\nd,0.5,0.2,-1\n").unwrap();
    let s = indra(&["build", "--input", path(&d.join("e.csv")), "--out", path(&d.join("b"))]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let v = indra(&["verify", "--input", path(&d.join("b/indra.indr")), "--out", path(&d.join("v"))]);
    assert_eq!(v.status.code(), Some(0));
    let report = json(&d.join("v/verify.json"));
    assert_eq!(report["passed"], Value::Bool(true));
    assert_eq!(report["n"], 4);

    let manifest = json(&d.join("b/manifest.json"));
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);
    assert!(manifest["outputs"][0]["payload_crc"].is_u64());
}

#[test]
fn verify_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("e.csv"), "id,x0,x1\na,1,0\nb,0,1\nc,1,1\nd,-1,0.2\ne,0.3,-1\n").unwrap();
    indra(&["build", "--input", path(&d.join("e.csv")), "--out", path(&d.join("b"))]);
    // Rank-normalised rows are no longer a metric.
    let o = indra(&[
        "ops",
        "--input",
        path(&d.join("b/indra.indr")),
        "--ops",
        "sparsify:2:inf,zscore",
        "--out",
        path(&d.join("o")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = indra(&["verify", "--input", path(&d.join("o/indra.indr")), "--out", path(&d.join("v"))]);
    assert_eq!(v.status.code(), Some(1));
    assert_eq!(json(&d.join("v/verify.json"))["passed"], Value::Bool(false));
}

#[test]
fn match_on_orthogonal_synth_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s =
        indra(&["synth", "--generator", "paired-orthogonal", "--n", "200", "--dim", "16", "--out", path(&d.join("s"))]);
    assert!(s.status.success());
    let m = indra(&[
        "match",
        "--input",
        path(&d.join("s/u.indr")),
        "--paired",
        path(&d.join("s/q.indr")),
        "--anchors",
        "random:32",
        "--k",
        "1,5,500",
        "--out",
        path(&d.join("m")),
    ]);
    assert!(m.status.success(), "{}", String::from_utf8_lossy(&m.stderr));
    assert!(String::from_utf8_lossy(&m.stderr).contains("dropping k=500"));
    let report = json(&d.join("m/match.json"));
    assert_eq!(report["u_to_q"]["topk_accuracy"]["1"], 1.0);
    assert_eq!(report["q_to_u"]["topk_accuracy"]["1"], 1.0);
    assert_eq!(report["anchors"], 32);
    let ranks = fs::read_to_string(d.join("m/match_ranks.csv")).unwrap();
    assert_eq!(ranks.lines().count(), 1 + 2 * 168);
}

#[test]
fn full_build_respects_size_cap() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    indra(&["synth", "--generator", "paired-orthogonal", "--n", "50", "--dim", "4", "--out", path(&d.join("s"))]);
    let b = indra(&["build", "--input", path(&d.join("s/u.indr")), "--max-n", "20", "--out", path(&d.join("b"))]);
    assert_eq!(b.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&b.stderr).contains("--anchors random:K"));
}

#[test]
fn explicit_anchor_ids() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("e.csv"), "id,x0,x1\na,1,0\nb,0,1\nc,1,1\nd,-1,0.5\n").unwrap();
    fs::write(d.join("anchors.txt"), "c\na\n").unwrap();
    let anchors = format!("ids:{}", path(&d.join("anchors.txt")));
    let b = indra(&["build", "--input", path(&d.join("e.csv")), "--anchors", &anchors, "--out", path(&d.join("b"))]);
    assert!(b.status.success(), "{}", String::from_utf8_lossy(&b.stderr));
    let info = indra(&["info", "--input", path(&d.join("b/indra.indr"))]);
    let v: Value = serde_json::from_slice(&info.stdout).unwrap();
    assert_eq!((v["rows"].as_u64(), v["cols"].as_u64()), (Some(4), Some(2)));
    assert_eq!(v["anchored"], Value::Bool(true));

    fs::write(d.join("bad.txt"), "zz\n").unwrap();
    let anchors = format!("ids:{}", path(&d.join("bad.txt")));
    let b = indra(&["build", "--input", path(&d.join("e.csv")), "--anchors", &anchors, "--out", path(&d.join("c"))]);
    assert_eq!(b.status.code(), Some(1));
}

#[test]
fn nan_in_csv_names_position() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("e.csv"), "id,x0,x1\na,1,0\nb,NaN,1\n").unwrap();
    let b = indra(&["build", "--input", path(&d.join("e.csv")), "--out", path(&d.join("b"))]);
    assert_eq!(b.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&b.stderr).contains("non-finite at row 1 col 0"));
}

#[test]
fn probe_and_sweep_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = indra(&[
        "synth",
        "--generator",
        "gaussian-blobs",
        "--classes",
        "3",
        "--n-per-class",
        "30",
        "--dim",
        "6",
        "--out",
        path(&d.join("s")),
    ]);
    assert!(s.status.success());
    let emb = d.join("s/embeddings.indr");
    let labels = d.join("s/labels.csv");
    let p = indra(&["probe", "--input", path(&emb), "--labels", path(&labels), "--out", path(&d.join("p"))]);
    assert!(p.status.success(), "{}", String::from_utf8_lossy(&p.stderr));
    assert!(json(&d.join("p/probe.json"))["test_accuracy"].as_f64().unwrap() >= 0.9);

    let w = indra(&[
        "sweep",
        "--input",
        path(&emb),
        "--labels",
        path(&labels),
        "--sigma",
        "4,0",
        "--repr",
        "raw,indra:8",
        "--out",
        path(&d.join("w")),
    ]);
    assert!(w.status.success(), "{}", String::from_utf8_lossy(&w.stderr));
    let csv = fs::read_to_string(d.join("w/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("sigma,repr_kind,accuracy,seed"));
    assert_eq!(lines.count(), 4);
    assert!(csv.contains("\n0,indra:8,"));
}

#[test]
fn shipped_fixtures_load() {
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let b = indra(&["build", "--input", path(&fx.join("tiny.csv")), "--out", path(&d.join("b"))]);
    assert!(b.status.success(), "{}", String::from_utf8_lossy(&b.stderr));
    let m = indra(&[
        "match",
        "--input",
        path(&fx.join("tiny_u.indr")),
        "--paired",
        path(&fx.join("tiny_q.indr")),
        "--k",
        "1",
        "--out",
        path(&d.join("m")),
    ]);
    assert!(m.status.success(), "{}", String::from_utf8_lossy(&m.stderr));
    assert_eq!(json(&d.join("m/match.json"))["u_to_q"]["topk_accuracy"]["1"], 1.0);
    let p = indra(&[
        "probe",
        "--input",
        path(&fx.join("tiny.csv")),
        "--labels",
        path(&fx.join("tiny_labels.csv")),
        "--test-fraction",
        "0",
        "--out",
        path(&d.join("p")),
    ]);
    assert!(p.status.success(), "{}", String::from_utf8_lossy(&p.stderr));
}
