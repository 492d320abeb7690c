mod common;

use std::collections::BTreeMap;

use biascast::cli::{cmd_gridsearch, cmd_ingest, cmd_report, cmd_run, cmd_simulate, ReportFormat, RunConfig};
use biascast::eval::parse_report_csv;
use biascast::ingest::IngestError;
use biascast::Error;
use serde_json::Value;

fn fixture_config(out: &std::path::Path) -> RunConfig {
    let mut config = RunConfig::load(&common::fixture("run.json")).unwrap();
    config.out_dir = out.to_path_buf();
    config
}

#[test]
fn fixture_summary_matches_hand_tally() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture_config(tmp.path());
    cmd_ingest(&config).unwrap();
    let got: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    let want: Value =
        serde_json::from_str(&std::fs::read_to_string(common::fixture("expected_summary.json")).unwrap()).unwrap();
    assert_eq!(got, want);
    for metric in ["post_count", "likes_sum"] {
        let name = format!("series_twitter_{metric}.csv");
        assert_eq!(
            std::fs::read_to_string(tmp.path().join(&name)).unwrap(),
            std::fs::read_to_string(common::fixture(&format!("expected_{name}"))).unwrap()
        );
    }
    let sentiment = std::fs::read_to_string(tmp.path().join("sentiment_twitter.csv")).unwrap();
    assert_eq!(sentiment.lines().count(), 21);
}

#[test]
fn empty_posts_fail_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let posts = tmp.path().join("posts.csv");
    std::fs::write(&posts, "post_id,timestamp,platform,url_or_domain,likes,sentiment\n").unwrap();
    std::fs::copy(common::fixture("bias.csv"), tmp.path().join("bias.csv")).unwrap();
    let config_path = tmp.path().join("run.json");
    std::fs::write(
        &config_path,
        r#"{"input": {"posts": "posts.csv", "bias": "bias.csv"}, "window": {"start": "2018-03-01", "end": "2018-03-20"}}"#,
    )
    .unwrap();
    let mut config = RunConfig::load(&config_path).unwrap();
    config.out_dir = tmp.path().join("out");
    let err = cmd_ingest(&config).unwrap_err();
    assert!(matches!(err, Error::Ingest(IngestError::NoPosts { .. })), "{err}");
    assert!(cmd_run(&config).is_err());
    assert!(!config.out_dir.exists());
}

#[test]
fn synthetic_run_reports_one_row_per_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = RunConfig::from_json(
        r#"{
            "synthetic": {"kind": "sine", "period": 20.0, "amplitude": 10.0, "n": 120},
            "kinds": ["sarima", "lstm_14day"],
            "sarima": {"spec": {"order": [1, 0, 0], "seasonal": [0, 0, 0, 0]}},
            "seed": 3
        }"#,
    )
    .unwrap();
    config.out_dir = tmp.path().to_path_buf();
    let outcome = cmd_run(&config).unwrap();
    assert!(outcome.succeeded(), "{:?}", outcome.failures);
    let rows = parse_report_csv(&std::fs::read_to_string(tmp.path().join("report.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.test_rmse.is_finite() && r.train_rmse.is_some()));
    assert_eq!(std::fs::read_dir(tmp.path().join("plots")).unwrap().count(), 1);
    let text = cmd_report(tmp.path(), config.platform, ReportFormat::Text).unwrap();
    assert!(text.contains("lstm_14day") && text.contains("sarima"));
}

#[test]
fn multistep_on_short_series_names_the_minimum() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = RunConfig::from_json(
        r#"{"synthetic": {"kind": "ar1", "alpha": 0.5, "sigma": 1.0, "n": 18}, "kinds": ["multistep_14_5"]}"#,
    )
    .unwrap();
    config.out_dir = tmp.path().to_path_buf();
    let outcome = cmd_run(&config).unwrap();
    assert!(!outcome.succeeded());
    assert_eq!(outcome.failures.len(), 1);
    assert!(outcome.failures[0].error.contains("at least 19"), "{}", outcome.failures[0].error);
    let report = std::fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    assert!(report.contains("19"), "{report}");
}

#[test]
fn gridsearch_detects_weekly_period() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = RunConfig::from_json(
        r#"{
            "synthetic": {"kind": "seasonal_sarima",
                          "spec": {"order": [0, 0, 0], "seasonal": [1, 0, 0, 7]},
                          "params": {"c": 0.0, "alpha": [], "theta": [], "phi": [0.7], "eta": [], "sigma2": 1.0},
                          "n": 300},
            "kinds": ["sarima"],
            "sarima": {"grid": {"P": [1, 1], "s": {"values": [0, 7]}}},
            "seed": 5
        }"#,
    )
    .unwrap();
    config.out_dir = tmp.path().to_path_buf();
    let reports = cmd_gridsearch(&config).unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].winner.unwrap().period, 7);
    assert!(tmp.path().join("gridsearch.json").exists());
}

#[test]
fn malformed_grid_config_is_rejected() {
    let bad = r#"{"synthetic": {"kind": "ar1", "alpha": 0.5, "sigma": 1.0, "n": 50},
                  "sarima": {"grid": {"p": [0, 2], "bogus": [1, 2]}}}"#;
    assert!(RunConfig::from_json(bad).is_err());
}

#[test]
fn simulate_is_deterministic() {
    let read = |seed: u64| {
        let tmp = tempfile::tempdir().unwrap();
        let mut config = RunConfig::from_json(r#"{"synthetic": {"kind": "ar1", "alpha": 0.5, "sigma": 1.0, "n": 30}}"#).unwrap();
        config.seed = seed;
        config.out_dir = tmp.path().to_path_buf();
        cmd_simulate(&config).unwrap();
        std::fs::read(tmp.path().join("synthetic.csv")).unwrap()
    };
    assert_eq!(read(1), read(1));
    assert_ne!(read(1), read(2));
}

#[test]
fn fixture_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs: Vec<BTreeMap<String, Vec<u8>>> = Vec::new();
    for name in ["a", "b"] {
        let config = fixture_config(&tmp.path().join(name));
        cmd_run(&config).unwrap();
        let mut files = BTreeMap::new();
        for sub in ["", "models", "plots"] {
            for entry in std::fs::read_dir(config.out_dir.join(sub)).unwrap() {
                let path = entry.unwrap().path();
                if path.is_file() {
                    files.insert(path.strip_prefix(&config.out_dir).unwrap().display().to_string(), std::fs::read(&path).unwrap());
                }
            }
        }
        outputs.push(files);
    }
    assert!(outputs[0].len() > 20);
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_biascast");
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"synthetic": {"kind": "ar1", "alpha": 0.5, "sigma": 1.0, "n": 60}, "sarima": {"grid": {"p": "x"}}}"#).unwrap();
    let out = std::process::Command::new(bin).args(["gridsearch", "--config"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = std::process::Command::new(bin)
        .args(["ingest", "--config"])
        .arg(common::fixture("run.json"))
        .arg("--out")
        .arg(tmp.path().join("ingest"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"total_posts\": 100"));
}
