//! Experiment harness end to end: files on disk, determinism, log shape.

use std::fs;
use std::path::Path;

use infopower_core::harness::{run_experiment, ExperimentConfig, ExperimentOutput, SessionLog};
use infopower_core::metrics::RuleCatalog;
use infopower_core::tree::{train_cqi, CqiHyperparams};
use infopower_core::plant::PlantConfig;
use infopower_core::xai::XaiMode;

fn fixture() -> ExperimentConfig {
    ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/experiment.toml")).unwrap()
}

fn run_into(dir: &Path) -> ExperimentOutput {
    let cfg = fixture();
    let out = run_experiment(&cfg, &cfg.load_tree().unwrap(), &RuleCatalog::default_catalog()).unwrap();
    out.write_to(dir).unwrap();
    out
}

fn tree_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for sub in [dir.to_path_buf(), dir.join("logs")] {
        for e in fs::read_dir(&sub).unwrap() {
            let p = e.unwrap().path();
            if p.is_file() {
                files.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_into(a.path());
    run_into(b.path());
    let (fa, fb) = (tree_files(a.path()), tree_files(b.path()));
    assert_eq!(fa.len(), 2 + 40);
    assert_eq!(fa, fb);
}

#[test]
fn logs_on_disk_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path());
    for log in &out.logs {
        let text = fs::read_to_string(dir.path().join("logs").join(ExperimentOutput::log_file_name(log))).unwrap();
        assert_eq!(&SessionLog::from_jsonl(&text).unwrap(), log);
        assert!(log.summary.what_count >= log.summary.why_count);
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["arms"].as_array().unwrap().len(), 2);
    let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 21);
}

#[test]
fn fixture_arms_compare_as_designed() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path());
    let r = &out.report;
    let ua = r.arm(XaiMode::UserAware).unwrap();
    let cl = r.arm(XaiMode::Classical).unwrap();
    for arm in [ua, cl] {
        assert!((0.0..=1.0).contains(&arm.ip));
        assert!(arm.ip_report.users.iter().all(|u| (0.0..=1.0).contains(&u.ip)));
        assert_eq!(arm.attribution.len(), 8);
    }
    assert!(ua.ip > cl.ip, "user-aware {} vs classical {}", ua.ip, cl.ip);
    assert_eq!(r.ip_difference, Some(ua.ip - cl.ip));
}

#[test]
fn retraining_is_byte_identical() {
    let cfg = PlantConfig::default();
    let hp = CqiHyperparams { episodes: 300, ..Default::default() };
    let a = train_cqi(&cfg, &hp, 5).unwrap().to_json();
    let b = train_cqi(&cfg, &hp, 5).unwrap().to_json();
    assert_eq!(a, b);
    let c = train_cqi(&cfg, &hp, 6).unwrap().to_json();
    assert_ne!(a, c);
}
