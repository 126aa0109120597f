//! End-to-end acceptance checks for the experiment runner: the desk-scale
//! width sweep and its error decay, warm-start readout deepening, and
//! bit-level reproducibility of the numeric artifacts. Each test is one
//! criterion and prints as one pass/fail line in the harness output.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use oscnet_cli::config::{ExperimentKind, RawConfig, ResolvedConfig};
use oscnet_cli::experiments::{run_experiment, Case2Summary, ExperimentSummary};

fn desk_config(experiment: ExperimentKind, out: &Path) -> ResolvedConfig {
    RawConfig {
        experiment,
        scale: None,
        seed: Some(0),
        output_dir: Some(out.display().to_string()),
        train: None,
        boucwen: None,
        spectrum: None,
        dataset: None,
    }
    .resolve()
    .expect("desk preset resolves")
}

struct Case2Run {
    _dir: tempfile::TempDir,
    summary: Case2Summary,
    seconds: f64,
    artifacts: BTreeMap<String, Vec<u8>>,
}

/// Deterministic numeric artifacts of a run: every CSV and JSON file except
/// the timing manifest, keyed by file name.
fn numeric_artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).expect("output directory exists") {
        let path = entry.expect("readable directory entry").path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let numeric = name.ends_with(".csv") || name.ends_with(".json");
        if numeric && name != "manifest.json" {
            out.insert(name, std::fs::read(&path).expect("readable artifact"));
        }
    }
    out
}

fn run_case2_desk() -> (Case2Summary, f64, BTreeMap<String, Vec<u8>>) {
    let dir = tempfile::tempdir().expect("temp dir");
    let cfg = desk_config(ExperimentKind::Case2, dir.path());
    let start = Instant::now();
    let summary = run_experiment(&cfg).expect("desk sweep completes");
    let seconds = start.elapsed().as_secs_f64();
    let artifacts = numeric_artifacts(dir.path());
    match summary {
        ExperimentSummary::Case2(s) => (s, seconds, artifacts),
        _ => unreachable!("case2 config yields a case2 summary"),
    }
}

fn shared_case2_run() -> &'static Case2Run {
    static RUN: OnceLock<Case2Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().expect("temp dir");
        let cfg = desk_config(ExperimentKind::Case2, dir.path());
        let start = Instant::now();
        let summary = run_experiment(&cfg).expect("desk sweep completes");
        let seconds = start.elapsed().as_secs_f64();
        let artifacts = numeric_artifacts(dir.path());
        let summary = match summary {
            ExperimentSummary::Case2(s) => s,
            _ => unreachable!("case2 config yields a case2 summary"),
        };
        Case2Run {
            _dir: dir,
            summary,
            seconds,
            artifacts,
        }
    })
}

#[test]
fn criterion_09_width_sweep_error_decays() {
    let run = shared_case2_run();
    assert_eq!(run.summary.widths, vec![2, 5, 10, 20]);
    assert!(
        run.summary.diverged.iter().all(|d| !d),
        "a width diverged during training"
    );
    let n_samples: usize = run.summary.report.summaries[0].samples;
    assert_eq!(n_samples, 200, "sweep must evaluate 200 selected samples");
    let slope = run.summary.report.linf_fit.slope;
    assert!(
        (-0.9..=-0.15).contains(&slope),
        "sup-error decay slope {slope} outside [-0.9, -0.15]"
    );
    assert!(
        run.seconds < 1800.0,
        "sweep took {:.0}s, budget 1800s",
        run.seconds
    );
}

#[test]
fn criterion_10_warm_start_deepening_trains_and_preserves_outputs() {
    let start = Instant::now();
    let dir = tempfile::tempdir().expect("temp dir");
    let cfg = desk_config(ExperimentKind::Case1, dir.path());
    assert_eq!(cfg.dataset.n_select, 32);
    assert_eq!(cfg.train.epochs, 300);
    assert_eq!(cfg.train.loss_power, 8);
    assert!((cfg.dataset.pi_clip_thresholds[1] - (203.0f64 / 92.0).sqrt()).abs() < 1e-12);
    let summary = match run_experiment(&cfg).expect("deepening run completes") {
        ExperimentSummary::Case1(s) => s,
        _ => unreachable!("case1 config yields a case1 summary"),
    };
    assert_eq!(summary.depths, vec![1, 2]);
    assert!(summary.diverged.iter().all(|d| !d), "training diverged");
    let reduction = summary.first_epoch_loss / summary.min_epoch_loss;
    assert!(
        reduction >= 10.0,
        "training loss only fell {reduction:.1}x, need 10x"
    );
    assert_eq!(summary.deepen_max_diffs.len(), 1);
    for &d in &summary.deepen_max_diffs {
        assert!(
            d <= 1e-12,
            "deepened readout changed outputs by {d:.2e} at insertion"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 900.0, "run took {elapsed:.0}s, budget 900s");
}

#[test]
fn criterion_11_rerun_reproduces_numeric_artifacts_bitwise() {
    let first = shared_case2_run();
    let start = Instant::now();
    let (summary, _, artifacts) = run_case2_desk();
    let elapsed = start.elapsed().as_secs_f64();

    assert_eq!(
        summary.report.linf_fit.slope,
        first.summary.report.linf_fit.slope,
        "refit slope differs between identical runs"
    );
    let names: Vec<&String> = first.artifacts.keys().collect();
    assert!(
        names.iter().any(|n| n.ends_with(".csv")) && names.contains(&&"summary.json".to_string()),
        "run produced no comparable artifacts"
    );
    assert_eq!(
        first.artifacts.keys().collect::<Vec<_>>(),
        artifacts.keys().collect::<Vec<_>>(),
        "artifact sets differ between identical runs"
    );
    for (name, bytes) in &first.artifacts {
        assert_eq!(
            bytes, &artifacts[name],
            "artifact {name} is not byte-identical across identical runs"
        );
    }
    // Budget: twice the width-sweep budget, and in practice comparable to
    // the first run.
    assert!(
        elapsed < 3600.0 && elapsed < 2.0 * first.seconds.max(60.0),
        "rerun took {elapsed:.0}s against first run {:.0}s",
        first.seconds
    );
}
