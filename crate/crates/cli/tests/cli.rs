use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::Value;
use sha2::{Digest, Sha256};
use thinfilm_cli::config::{canonical_json, config_hash, parse, ClassifyRun, PolysRun, ShootRun};
use thinfilm_cli::output::{fmt_num, render_csv, Cell, Meta};

fn thinfilm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thinfilm"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("THINFILM_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn small_polys(dir: &Path) -> String {
    write_config(
        dir,
        r#"{"schema": "thinfilm.v1", "m_points": 5, "z_points": 11}"#,
    )
}

#[test]
fn polys_writes_headed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_polys(dir.path());
    let out = dir.path().join("out");
    let o = thinfilm(&["polys", "--config", &cfg], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("double_zero.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let parsed: PolysRun = parse(&fs::read_to_string(&cfg).unwrap()).unwrap();
    let expected = format!(
        "# thinfilm {} command=polys config_sha256={}",
        env!("CARGO_PKG_VERSION"),
        config_hash(&parsed)
    );
    assert_eq!(lines[0], expected);
    assert_eq!(
        lines[1],
        "m,z_star,beta_star,z0,z0_slope,residual_value,residual_slope"
    );
    assert_eq!(lines.len(), 2 + 5);
    assert!(text.ends_with('\n'));
    for row in &lines[2..] {
        for cell in row.split(',') {
            let x: f64 = cell.parse().unwrap();
            assert_eq!(fmt_num(x), cell);
        }
    }
    let samples = fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 2 + 3 * 11);
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["meta"]["command"], "polys");
    assert_eq!(summary["meta"]["config_sha256"], config_hash(&parsed));
    assert_eq!(summary["config"]["m_points"], 5);
    let cases: Vec<&str> = summary["results"]["root_cases"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["roots_right_of_one"]["case"].as_str().unwrap())
        .collect();
    assert_eq!(cases, ["two_roots", "double_root", "zero_roots"]);
}

#[test]
fn header_hash_is_digest_of_dry_run_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = thinfilm(&["polys", "--dry-run"], &out);
    assert!(o.status.success());
    assert!(!out.exists());
    let printed = String::from_utf8(o.stdout).unwrap();
    let canonical = printed.trim_end();
    assert_eq!(canonical, canonical_json(&PolysRun::default()));
    let digest = hex::encode(Sha256::digest(canonical.as_bytes()));
    assert_eq!(digest, config_hash(&PolysRun::default()));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_polys(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(thinfilm(&["polys", "--config", &cfg], &a).status.success());
    assert!(thinfilm(&["polys", "--config", &cfg, "--threads", "1"], &b)
        .status
        .success());
    for f in ["double_zero.csv", "samples.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn classify_writes_jsonl_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema": "thinfilm.v1", "a": 1.0, "nus": [-2e-3, 2e-3], "grid": null}"#,
    );
    let out = dir.path().join("out");
    let o = thinfilm(&["classify", "--config", &cfg], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("verdicts.jsonl")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(
        lines[0].starts_with("# thinfilm ")
            && lines[0].contains(" command=classify config_sha256=")
    );
    assert_eq!(lines.len(), 3);
    let recs: Vec<Value> = lines[1..]
        .iter()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(recs[0]["verdict"], "Touchdown");
    assert_eq!(recs[1]["verdict"], "BlowUp");
    assert_eq!(
        read_json(&out.join("summary.json"))["meta"]["command"],
        "classify"
    );
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema": "thinfilm.v1", "bogus": 1}"#);
    let out = dir.path().join("out");
    let o = thinfilm(&["polys", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(2));
    let err = read_json(&out.join("error.json"));
    assert_eq!(err["error"], "config");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn wrong_schema_and_missing_file_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema": "thinfilm.v0"}"#);
    assert_eq!(
        thinfilm(&["shoot", "--config", &cfg], &dir.path().join("o1"))
            .status
            .code(),
        Some(2)
    );
    let missing = dir.path().join("nope.json");
    let o = thinfilm(
        &["shoot", "--config", missing.to_str().unwrap()],
        &dir.path().join("o2"),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_seed_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema": "thinfilm.v1", "nus": [], "grid": null}"#,
    );
    assert_eq!(
        thinfilm(&["classify", "--config", &cfg], &dir.path().join("out"))
            .status
            .code(),
        Some(2)
    );
    assert!(parse::<ClassifyRun>(
        r#"{"schema": "thinfilm.v1", "grid": {"lo": 0, "hi": 1, "n": 4}, "extra": 0}"#
    )
    .is_err());
}

#[test]
fn invalid_bracket_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema": "thinfilm.v1", "a": 0.0, "nu_bracket": [0.001, 0.002]}"#,
    );
    let out = dir.path().join("out");
    let o = thinfilm(&["shoot", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(
        read_json(&out.join("error.json"))["error"],
        "numerical.BracketInvalid"
    );
}

#[test]
fn zero_threads_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = thinfilm(
        &["polys", "--threads", "0", "--dry-run"],
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shoot_defaults_round_trip_through_json() {
    let d = ShootRun::default();
    let back: ShootRun = parse(&canonical_json(&d)).unwrap();
    assert_eq!(back, d);
}

#[test]
fn csv_layout() {
    let meta = Meta::new("x", "ab".repeat(32));
    let doc = render_csv(
        &meta,
        &["a", "b", "c"],
        &[vec![Cell::Num(0.1), Cell::Int(3), Cell::from("t")]],
    );
    let expected = format!(
        "# thinfilm {} command=x config_sha256={}\na,b,c\n1e-1,3,t\n",
        env!("CARGO_PKG_VERSION"),
        "ab".repeat(32)
    );
    assert_eq!(doc, expected);
    assert_eq!(fmt_num(f64::NAN), "nan");
    assert_eq!(fmt_num(f64::NEG_INFINITY), "-inf");
}

proptest! {
    #[test]
    fn numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = fmt_num(x);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
