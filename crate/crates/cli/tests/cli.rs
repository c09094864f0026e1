use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fdshift_cli::commands::report_rows;
use fdshift_cli::output::round12;
use fdshift_core::{load_bundle, run_studies, EvalOptions};
use serde_json::Value;

fn toy() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/toy")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdshift")).args(args).output().unwrap()
}

fn run_in(args: &[&str], out: &Path) -> Output {
    let toy = toy();
    let mut all = vec!["--bundle", toy.to_str().unwrap(), "--out", out.to_str().unwrap()];
    all.extend_from_slice(args);
    run(&all)
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn evaluate_reports_core_metrics_for_msr_and_pe() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(&["evaluate"], dir.path()).status.success());
    let report = json(&dir.path().join("report.json"));
    for csf in ["msr", "pe"] {
        let m = &report["studies"]["iid"]["metrics"][csf];
        for key in ["aurc", "aurc_raw", "e_aurc", "auroc_f", "accuracy"] {
            assert!(m[key].is_number(), "{csf}.{key} missing");
        }
        let raw = m["aurc_raw"].as_f64().unwrap();
        assert_eq!(m["aurc"].as_f64().unwrap(), round12(raw * 1e3));
    }
    assert_eq!(report["studies"]["iid"]["metrics"]["msr"]["aurc_raw"].as_f64(), Some(0.114583333333));
}

#[test]
fn csv_values_reparse_to_twelve_digits() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(&["evaluate", "--emit", "csv"], dir.path()).status.success());
    let text = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("study,csf,metric,value,rank"));

    let bundle = load_bundle(toy()).unwrap();
    let studies = fdshift_core::default_studies(&bundle);
    let csfs = fdshift_core::available_csfs(&bundle);
    let report = run_studies(&bundle, &studies, &csfs, &EvalOptions::default()).unwrap();
    let rows = report_rows(&report);
    let parsed: Vec<&str> = lines.collect();
    assert_eq!(parsed.len(), rows.len());
    for (line, key_value) in parsed.iter().zip(report.values.iter().flat_map(|(k, v)| {
        let n = if k.metric == fdshift_core::MetricId::Aurc { 2 } else { 1 };
        std::iter::repeat_n((k, *v), n)
    })) {
        let fields: Vec<&str> = line.split(',').collect();
        let value: f64 = fields[3].parse().unwrap();
        let expected = if fields[2] == "aurc" { key_value.1 * 1e3 } else { key_value.1 };
        assert_eq!(value, round12(expected), "{line}");
    }
}

#[test]
fn svg_plots_are_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(&["evaluate", "--emit", "svg"], dir.path()).status.success());
    assert!(!dir.path().join("report.json").exists());
    let svg = fs::read_to_string(dir.path().join("rc_iid_msr.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert!(doc.descendants().any(|n| n.has_tag_name("polyline")));
    assert!(dir.path().join("rc_iid_ext_confidnet.svg").exists());
}

#[test]
fn rc_curve_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(&["rc-curve", "--csf", "msr"], dir.path()).status.success());
    let text = fs::read_to_string(dir.path().join("rc_iid_msr.csv")).unwrap();
    assert_eq!(text, "coverage,risk\n1,0.25\n0.75,0.333333333333\n0.5,0\n0.25,0\n");
}

#[test]
fn verify_prints_zero_deviation() {
    let out = run(&["--bundle", toy().to_str().unwrap(), "verify"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "aurc_max_dev=0.0e0"), "{text}");
}

#[test]
fn sgr_on_calibrated_fixture_meets_target() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("val");
    let holdout = dir.path().join("test");
    for (path, seed) in [(&bundle, "1"), (&holdout, "2")] {
        let out = Command::new(env!("CARGO_BIN_EXE_fdshift"))
            .args(["synth", "calibrated", "--n", "5000", "--c", "10", "--out", path.to_str().unwrap()])
            .env("FDSHIFT_SEED", seed)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let out = run(&[
        "--bundle",
        bundle.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "sgr",
        "--rstar",
        "0.15",
        "--delta",
        "0.001",
        "--holdout",
        holdout.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = json(&dir.path().join("sgr.json"));
    assert!(res["risk_bound"].as_f64().unwrap() <= 0.15);
    assert!(res["empirical_coverage"].as_f64().unwrap() > 0.0);
    assert!(res["holdout"]["risk"].as_f64().unwrap() <= 0.15);
}

#[test]
fn synth_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for (i, seed) in ["5", "5", "6"].iter().enumerate() {
        let path = dir.path().join(format!("b{i}"));
        let out = Command::new(env!("CARGO_BIN_EXE_fdshift"))
            .args(["synth", "highconf", "--n", "200", "--c", "10", "--out", path.to_str().unwrap()])
            .env("FDSHIFT_SEED", seed)
            .output()
            .unwrap();
        assert!(out.status.success());
        bytes.push(fs::read(path.join("logits.csv")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    assert_ne!(bytes[0], bytes[2]);
}

#[test]
fn score_and_calibrate_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(&["score", "--csf", "msr,ext:confidnet"], dir.path()).status.success());
    let scores = json(&dir.path().join("scores.json"));
    assert_eq!(scores["scores"]["ext:confidnet"][2].as_f64(), Some(0.35));
    let csv = fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    assert!(csv.starts_with("index,msr,ext:confidnet\n"));

    assert!(run_in(&["calibrate", "--csf", "ext:confidnet"], dir.path()).status.success());
    let cal = json(&dir.path().join("calibration.json"));
    assert!(cal["ece_raw"].is_number());
}

#[test]
fn config_file_selects_studies_and_csfs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    fs::write(
        &config,
        format!(
            r#"{{"bundle_path": {:?}, "csfs": ["pe"], "emit": ["json"],
               "studies": [{{"name": "main", "kind": "STANDARD", "shift_filter": ["IID"], "metrics": ["aurc", "auroc_f"]}}]}}"#,
            toy().to_str().unwrap()
        ),
    )
    .unwrap();
    let out = run(&["--config", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "evaluate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("report.json"));
    let metrics = report["studies"]["main"]["metrics"].as_object().unwrap();
    assert_eq!(metrics.keys().collect::<Vec<_>>(), vec!["pe"]);
    assert!(!dir.path().join("report.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let out = run_in(&["--config", bad.to_str().unwrap(), "evaluate"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let invalid = dir.path().join("invalid.json");
    fs::write(
        &invalid,
        r#"{"studies": [{"name": "nc", "kind": "NEWCLASS", "shift_filter": ["IID"], "metrics": ["aurc"]}]}"#,
    )
    .unwrap();
    let out = run_in(&["--config", invalid.to_str().unwrap(), "evaluate"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    assert_eq!(run(&["evaluate"]).status.code(), Some(2));
    assert_eq!(run_in(&["--temperature", "0", "evaluate"], dir.path()).status.code(), Some(2));
}

#[test]
fn module_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--bundle", dir.path().join("missing").to_str().unwrap(), "evaluate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("meta.json"));

    let broken = dir.path().join("broken");
    fs::create_dir(&broken).unwrap();
    for f in fs::read_dir(toy()).unwrap() {
        let f = f.unwrap();
        fs::copy(f.path(), broken.join(f.file_name())).unwrap();
    }
    fs::write(broken.join("labels.csv"), "0\n1\n4\n2\n").unwrap();
    let out = run(&["--bundle", broken.to_str().unwrap(), "evaluate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("labels.csv"));

    let out = run_in(&["score", "--csf", "maha"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
