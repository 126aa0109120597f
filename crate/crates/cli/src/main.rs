use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use oscnet_core::analysis::fit_decay_rate;

use oscnet_cli::config::{load_config, ExperimentKind, RawConfig, Scale};
use oscnet_cli::experiments::run_experiment;
use oscnet_cli::plot::{write_loglog_svg, PlotSpec};

#[derive(Parser)]
#[command(name = "oscnet", about = "Neural oscillator experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Paper,
    Desk,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Gradcheck,
    Lemma1,
    Lemma2,
    Perturbation,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Replace the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Replace the config's scale preset.
        #[arg(long)]
        scale: Option<ScaleArg>,
        /// Replace the config's output directory.
        #[arg(long)]
        out: Option<String>,
        /// Dotted-path config override, e.g. train.epochs=50. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run one verification suite with its default configuration.
    Verify {
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<String>,
    },
    /// Render a log-log decay plot from a CSV table of positive values.
    Plot {
        table: PathBuf,
        out: PathBuf,
        /// Zero-based x column index.
        #[arg(long, default_value_t = 0)]
        x_col: usize,
        /// Zero-based y column index.
        #[arg(long, default_value_t = 1)]
        y_col: usize,
        /// Dashed guide line of this slope through the first point.
        #[arg(long)]
        reference_slope: Option<f64>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            scale,
            out,
            overrides,
        } => {
            let scale = scale.map(|s| match s {
                ScaleArg::Paper => Scale::Paper,
                ScaleArg::Desk => Scale::Desk,
            });
            let cfg = load_config(&config, seed, scale, out.as_deref(), &overrides)?;
            let summary = run_experiment(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Verify { suite, seed, out } => {
            let experiment = match suite {
                SuiteArg::Gradcheck => ExperimentKind::Gradcheck,
                SuiteArg::Lemma1 => ExperimentKind::Lemma1Verify,
                SuiteArg::Lemma2 => ExperimentKind::Lemma2Verify,
                SuiteArg::Perturbation => ExperimentKind::PerturbationVerify,
            };
            let raw = RawConfig {
                experiment,
                scale: None,
                seed: Some(seed),
                output_dir: out,
                train: None,
                boucwen: None,
                spectrum: None,
                dataset: None,
            };
            let summary = run_experiment(&raw.resolve()?)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Plot {
            table,
            out,
            x_col,
            y_col,
            reference_slope,
        } => {
            let text = std::fs::read_to_string(&table)
                .with_context(|| format!("reading {}", table.display()))?;
            let mut points = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if i == 0 || line.trim().is_empty() {
                    continue;
                }
                let cells: Vec<&str> = line.split(',').collect();
                let get = |c: usize| -> Result<f64> {
                    cells
                        .get(c)
                        .with_context(|| format!("line {} has no column {c}", i + 1))?
                        .trim()
                        .parse::<f64>()
                        .with_context(|| format!("line {} column {c} is not a number", i + 1))
                };
                points.push((get(x_col)?, get(y_col)?));
            }
            if points.is_empty() {
                bail!("{} has no data rows", table.display());
            }
            let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
            let fit = fit_decay_rate(&xs, &ys).ok();
            let spec = PlotSpec {
                title: table
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "decay".into()),
                x_label: format!("column {x_col}"),
                y_label: format!("column {y_col}"),
                points,
                fit: fit.map(|f| (f.slope, f.intercept)),
                reference_slope,
            };
            write_loglog_svg(&out, &spec)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
