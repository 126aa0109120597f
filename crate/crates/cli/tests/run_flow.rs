//! End-to-end flow of the runner: config file on disk, CLI-style overrides,
//! experiment execution, and the artifact contract of the output directory.

use std::path::Path;

use oscnet_cli::config::{load_config, ResolvedConfig};
use oscnet_cli::experiments::{run_experiment, ExperimentSummary};

#[test]
fn config_file_with_overrides_runs_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("experiment.toml");
    std::fs::write(&cfg_path, "experiment = \"gradcheck\"\n").unwrap();
    let out = dir.path().join("out");
    let cfg = load_config(
        &cfg_path,
        Some(7),
        None,
        Some(&out.display().to_string()),
        &["train.epochs=5".into()],
    )
    .unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.train.epochs, 5);

    let summary = run_experiment(&cfg).unwrap();
    let max_rel = match summary {
        ExperimentSummary::Gradcheck(s) => s.max_rel_err,
        _ => unreachable!("gradcheck config yields a gradcheck summary"),
    };
    assert!(max_rel < 1e-5);

    for name in ["resolved.toml", "summary.json", "manifest.json", "gradcheck.csv"] {
        assert!(
            Path::new(&out).join(name).is_file(),
            "missing artifact {name}"
        );
    }
    // The echoed configuration parses back to exactly what ran.
    let echoed =
        ResolvedConfig::from_toml(&std::fs::read_to_string(out.join("resolved.toml")).unwrap())
            .unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn bad_configs_are_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("experiment.toml");
    std::fs::write(&cfg_path, "experiment = \"case2\"\nmystery = 1\n").unwrap();
    assert!(load_config(&cfg_path, None, None, None, &[]).is_err());

    std::fs::write(&cfg_path, "experiment = \"case2\"\n").unwrap();
    assert!(load_config(&cfg_path, None, None, None, &["train.initial_lr=-1".into()]).is_err());
}
