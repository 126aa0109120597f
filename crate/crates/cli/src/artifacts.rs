//! Output artifacts: JSON and CSV writers with deterministic formatting,
//! plus the run manifest. Numeric artifacts depend only on config and seed;
//! the manifest carries wall-clock timings and is excluded from
//! reproducibility comparisons.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use oscnet_core::signal::Signal;
use oscnet_core::training::EpochStats;

use crate::CliError;

/// Shortest round-trip decimal form, stable across runs.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_string(path, &text)
}

pub fn write_string(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        if row.len() != header.len() {
            return Err(CliError::Artifact(format!(
                "csv row width {} does not match header width {}",
                row.len(),
                header.len()
            )));
        }
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_string(path, &text)
}

/// Per-epoch training history table.
pub fn write_history_csv(path: &Path, history: &[EpochStats]) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|s| {
            vec![
                s.epoch.to_string(),
                fmt_f64(s.lr),
                fmt_f64(s.train_loss),
                fmt_f64(s.val_linf),
                fmt_f64(s.val_lr_loss),
            ]
        })
        .collect();
    write_csv(
        path,
        &["epoch", "lr", "train_loss", "val_linf", "val_lr_loss"],
        &rows,
    )
}

/// One signal per column block: time, then `name_0..name_{dim-1}` per signal.
pub fn write_signals_csv(path: &Path, names: &[&str], signals: &[&Signal]) -> Result<(), CliError> {
    if names.len() != signals.len() || signals.is_empty() {
        return Err(CliError::Artifact("signal table shape mismatch".into()));
    }
    let len = signals[0].len();
    let dt = signals[0].dt();
    let mut header: Vec<String> = vec!["t".into()];
    for (name, sig) in names.iter().zip(signals) {
        if sig.len() != len || sig.dt() != dt {
            return Err(CliError::Artifact("signal table grid mismatch".into()));
        }
        for d in 0..sig.dim() {
            header.push(format!("{name}_{d}"));
        }
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut rows = Vec::with_capacity(len);
    for i in 0..len {
        let mut row = vec![fmt_f64(i as f64 * dt)];
        for sig in signals {
            row.extend(sig.sample(i).iter().map(|&v| fmt_f64(v)));
        }
        rows.push(row);
    }
    write_csv(path, &header_refs, &rows)
}

#[derive(Debug, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub seconds: f64,
}

/// Wall-clock record of a run. Not part of the deterministic artifact set.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub output_dir: String,
    pub timings: Vec<ManifestEntry>,
    pub total_seconds: f64,
}

pub struct RunTimer {
    start: Instant,
    last: Instant,
    entries: Vec<ManifestEntry>,
}

impl RunTimer {
    pub fn new() -> Self {
        let now = Instant::now();
        RunTimer { start: now, last: now, entries: Vec::new() }
    }

    /// Closes the current phase under `name`.
    pub fn mark(&mut self, name: &str) {
        let now = Instant::now();
        self.entries.push(ManifestEntry {
            name: name.to_string(),
            seconds: now.duration_since(self.last).as_secs_f64(),
        });
        self.last = now;
    }

    pub fn into_manifest(self, experiment: &str, output_dir: &Path) -> Manifest {
        Manifest {
            experiment: experiment.to_string(),
            output_dir: output_dir.display().to_string(),
            total_seconds: self.start.elapsed().as_secs_f64(),
            timings: self.entries,
        }
    }
}

impl Default for RunTimer {
    fn default() -> Self {
        Self::new()
    }
}

pub fn path_in(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// Human-readable one-line summary appended to the run log.
pub fn log_line(buf: &mut String, line: &str) {
    let _ = writeln!(buf, "{line}");
}
