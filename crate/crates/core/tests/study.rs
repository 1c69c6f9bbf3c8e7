mod common;

use common::assets;
use factorial_bayes::harness::{self, StudyConfig};
use factorial_bayes::Method;

fn config(name: &str) -> (StudyConfig, std::path::PathBuf) {
    let path = assets().join("configs").join(name);
    (StudyConfig::from_path(&path).unwrap(), path.parent().unwrap().to_path_buf())
}

#[test]
fn bundled_configs_load_100_cases() {
    for name in ["balanced.json", "imbalanced.json"] {
        let (cfg, dir) = config(name);
        let cases = cfg.load_cases(&dir).unwrap();
        assert_eq!(cases.len(), 100, "{name}");
        assert!(cases.iter().all(|c| c.units() == 800));
        assert_eq!(cfg.arms.iter().sum::<u64>(), 800);
    }
}

#[test]
fn fixture_first_case() {
    let (cfg, dir) = config("balanced.json");
    let cases = cfg.load_cases(&dir).unwrap();
    assert_eq!(cases[0].counts.counts()[0], 33);
    assert_eq!(cases[99].counts.counts()[0], 17);
}

#[test]
fn imbalanced_study_runs_to_completion() {
    let (mut cfg, dir) = config("imbalanced.json");
    cfg.replications = 20;
    cfg.draws_per_rep = 1000;
    let report = harness::run_study(&cfg, &dir).unwrap();
    assert_eq!(report.rows.len(), 200);
    for m in [Method::Neyman, Method::BayesIndep] {
        let s = report.summary.iter().find(|s| s.method == m).unwrap();
        assert_eq!(s.cases, 100);
        assert!(s.mean_coverage > 0.85, "{s:?}");
    }
}
