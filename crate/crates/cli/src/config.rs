//! Experiment configuration: file schema with strict unknown-key rejection,
//! per-scale presets, override merging, and the resolved-config echo.

use std::path::Path;

use serde::{Deserialize, Serialize};

use oscnet_core::dynsys::BoucWenConfig;
use oscnet_core::stochastic::SpectrumGrid;
use oscnet_core::training::{ModelSelection, TrainConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Case1,
    Case2,
    Lemma1Verify,
    Lemma2Verify,
    PerturbationVerify,
    Gradcheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Case1 => "case1",
            ExperimentKind::Case2 => "case2",
            ExperimentKind::Lemma1Verify => "lemma1_verify",
            ExperimentKind::Lemma2Verify => "lemma2_verify",
            ExperimentKind::PerturbationVerify => "perturbation_verify",
            ExperimentKind::Gradcheck => "gradcheck",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Paper,
    Desk,
}

/// On-disk configuration. Unknown keys anywhere are rejected.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: ExperimentKind,
    pub scale: Option<Scale>,
    pub seed: Option<u64>,
    pub output_dir: Option<String>,
    pub train: Option<TrainOverrides>,
    pub boucwen: Option<BoucWenOverrides>,
    pub spectrum: Option<SpectrumOverrides>,
    pub dataset: Option<DatasetOverrides>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub initial_lr: Option<f64>,
    pub lr_drop_period: Option<usize>,
    pub lr_drop_factor: Option<f64>,
    pub clip_threshold_gamma: Option<f64>,
    pub clip_threshold_pi: Option<f64>,
    pub loss_power: Option<u32>,
    pub model_selection: Option<ModelSelection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoucWenOverrides {
    pub m: Option<f64>,
    pub k: Option<f64>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub s: Option<f64>,
    pub zeta: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumOverrides {
    pub f_max: Option<f64>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetOverrides {
    pub pool: Option<usize>,
    pub n_select: Option<usize>,
    pub stride: Option<usize>,
    pub grid_stride: Option<usize>,
    pub gamma_hidden_widths: Option<Vec<usize>>,
    pub pi_depths: Option<Vec<usize>>,
}

/// Dataset and architecture sweep parameters after preset resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub pool: usize,
    /// Spaced-rank selection count (response-ranked sweep).
    pub n_select: usize,
    /// Rank stride (deviation-ranked sweep).
    pub stride: usize,
    /// Subsampling stride from the generation grid to the training grid.
    pub grid_stride: usize,
    pub gamma_hidden_widths: Vec<usize>,
    pub pi_depths: Vec<usize>,
    /// Readout clip thresholds aligned with `pi_depths`.
    pub pi_clip_thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub experiment: ExperimentKind,
    pub scale: Scale,
    pub seed: u64,
    pub output_dir: String,
    pub train: TrainConfig,
    pub boucwen: BoucWenConfig,
    pub spectrum: SpectrumGrid,
    pub dataset: DatasetParams,
}

fn pi_clip_thresholds(depths: &[usize]) -> Vec<f64> {
    // Paper counts for depths 1..=5; deeper nets keep the last ratio pattern.
    let counts = [92.0, 203.0, 314.0, 425.0, 536.0];
    depths
        .iter()
        .map(|&d| {
            let c = counts
                .get(d - 1)
                .copied()
                .unwrap_or_else(|| 92.0 + 111.0 * (d as f64 - 1.0));
            (c / counts[0]).sqrt()
        })
        .collect()
}

fn preset(experiment: ExperimentKind, scale: Scale, seed: u64) -> (TrainConfig, DatasetParams) {
    let case1 = matches!(experiment, ExperimentKind::Case1);
    let paper = matches!(scale, Scale::Paper);
    let train = if case1 {
        TrainConfig {
            epochs: if paper { 10000 } else { 300 },
            batch_size: if paper { 2000 } else { 32 },
            initial_lr: 0.005,
            lr_drop_period: 100,
            lr_drop_factor: 0.9772,
            clip_threshold_gamma: 1.0,
            clip_threshold_pi: 1.0,
            loss_power: 8,
            seed,
            model_selection: ModelSelection::BestValLinf,
        }
    } else {
        TrainConfig {
            epochs: if paper { 5000 } else { 500 },
            batch_size: if paper { 1600 } else { 32 },
            initial_lr: 0.02,
            lr_drop_period: 100,
            lr_drop_factor: 0.965,
            clip_threshold_gamma: 1.0,
            clip_threshold_pi: 1.0,
            loss_power: 2,
            seed,
            model_selection: ModelSelection::LastUpdate,
        }
    };
    let pi_depths = if case1 {
        if paper {
            vec![1, 2, 3, 4, 5]
        } else {
            vec![1, 2]
        }
    } else {
        vec![1]
    };
    let dataset = DatasetParams {
        pool: if paper { 50000 } else if case1 { 64 } else { 2000 },
        n_select: if paper { 10000 } else { 32 },
        stride: if paper { 25 } else { 10 },
        grid_stride: if paper { 1 } else { 10 },
        gamma_hidden_widths: if case1 {
            vec![10]
        } else if paper {
            vec![2, 5, 10, 20, 30, 40]
        } else {
            vec![2, 5, 10, 20]
        },
        pi_clip_thresholds: pi_clip_thresholds(&pi_depths),
        pi_depths,
    };
    (train, dataset)
}

impl RawConfig {
    pub fn resolve(&self) -> Result<ResolvedConfig, CliError> {
        let scale = self.scale.unwrap_or(Scale::Desk);
        let seed = self.seed.unwrap_or(0);
        let (mut train, mut dataset) = preset(self.experiment, scale, seed);
        if let Some(t) = &self.train {
            if let Some(v) = t.epochs {
                train.epochs = v;
            }
            if let Some(v) = t.batch_size {
                train.batch_size = v;
            }
            if let Some(v) = t.initial_lr {
                train.initial_lr = v;
            }
            if let Some(v) = t.lr_drop_period {
                train.lr_drop_period = v;
            }
            if let Some(v) = t.lr_drop_factor {
                train.lr_drop_factor = v;
            }
            if let Some(v) = t.clip_threshold_gamma {
                train.clip_threshold_gamma = v;
            }
            if let Some(v) = t.clip_threshold_pi {
                train.clip_threshold_pi = v;
            }
            if let Some(v) = t.loss_power {
                train.loss_power = v;
            }
            if let Some(v) = t.model_selection {
                train.model_selection = v;
            }
        }
        let mut boucwen = BoucWenConfig::default();
        if let Some(b) = &self.boucwen {
            if let Some(v) = b.m {
                boucwen.m = v;
            }
            if let Some(v) = b.k {
                boucwen.k = v;
            }
            if let Some(v) = b.lambda {
                boucwen.lambda = v;
            }
            if let Some(v) = b.beta {
                boucwen.beta = v;
            }
            if let Some(v) = b.gamma {
                boucwen.gamma = v;
            }
            if let Some(v) = b.s {
                boucwen.s = v;
            }
            if let Some(v) = b.zeta {
                boucwen.zeta = v;
            }
        }
        let mut spectrum = SpectrumGrid::default_band();
        if let Some(s) = &self.spectrum {
            if let Some(v) = s.f_max {
                spectrum.f_max = v;
            }
            if let Some(v) = s.n {
                spectrum.n = v;
            }
        }
        if let Some(d) = &self.dataset {
            if let Some(v) = d.pool {
                dataset.pool = v;
            }
            if let Some(v) = d.n_select {
                dataset.n_select = v;
            }
            if let Some(v) = d.stride {
                dataset.stride = v;
            }
            if let Some(v) = d.grid_stride {
                dataset.grid_stride = v;
            }
            if let Some(v) = &d.gamma_hidden_widths {
                dataset.gamma_hidden_widths = v.clone();
            }
            if let Some(v) = &d.pi_depths {
                dataset.pi_depths = v.clone();
                dataset.pi_clip_thresholds = pi_clip_thresholds(&dataset.pi_depths);
            }
        }
        let resolved = ResolvedConfig {
            experiment: self.experiment,
            scale,
            seed,
            output_dir: self
                .output_dir
                .clone()
                .unwrap_or_else(|| format!("out/{}", self.experiment.name())),
            train,
            boucwen,
            spectrum,
            dataset,
        };
        resolved.validate()?;
        Ok(resolved)
    }
}

impl ResolvedConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.train
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.boucwen
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.spectrum
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.dataset.pi_depths.len() != self.dataset.pi_clip_thresholds.len() {
            return Err(CliError::Config(
                "pi_depths and pi_clip_thresholds lengths differ".into(),
            ));
        }
        if self.dataset.grid_stride == 0 {
            return Err(CliError::Config("grid_stride must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Parses a config file, applying `key=value` overrides (dotted paths into
/// the document) and optional CLI-level substitutions before validation.
pub fn load_config(
    path: &Path,
    seed: Option<u64>,
    scale: Option<Scale>,
    out: Option<&str>,
    overrides: &[String],
) -> Result<ResolvedConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", path.display())))?;
    for entry in overrides {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override '{entry}' is not key=value")))?;
        apply_override(&mut table, key.trim(), value.trim())?;
    }
    if let Some(s) = seed {
        table.insert("seed".into(), toml::Value::Integer(s as i64));
    }
    if let Some(s) = scale {
        let name = match s {
            Scale::Paper => "paper",
            Scale::Desk => "desk",
        };
        table.insert("scale".into(), toml::Value::String(name.into()));
    }
    if let Some(o) = out {
        table.insert("output_dir".into(), toml::Value::String(o.into()));
    }
    let raw: RawConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    raw.resolve()
}

fn parse_scalar(value: &str) -> toml::Value {
    if let Ok(v) = value.parse::<i64>() {
        return toml::Value::Integer(v);
    }
    if let Ok(v) = value.parse::<f64>() {
        return toml::Value::Float(v);
    }
    if let Ok(v) = value.parse::<bool>() {
        return toml::Value::Boolean(v);
    }
    toml::Value::String(value.to_string())
}

fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<(), CliError> {
    let mut parts = key.split('.').peekable();
    let mut current = table;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            current.insert(part.to_string(), parse_scalar(value));
            return Ok(());
        }
        current = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override path '{key}' crosses a scalar")))?;
    }
    Err(CliError::Config(format!("empty override key '{key}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ResolvedConfig, CliError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        raw.resolve()
    }

    #[test]
    fn minimal_config_uses_desk_presets() {
        let cfg = parse("experiment = \"case2\"").unwrap();
        assert_eq!(cfg.scale, Scale::Desk);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.train.epochs, 500);
        assert_eq!(cfg.dataset.gamma_hidden_widths, vec![2, 5, 10, 20]);
        assert_eq!(cfg.dataset.stride, 10);
    }

    #[test]
    fn paper_presets_match_published_protocol() {
        let cfg = parse("experiment = \"case1\"\nscale = \"paper\"\nseed = 3").unwrap();
        assert_eq!(cfg.train.epochs, 10000);
        assert_eq!(cfg.train.batch_size, 2000);
        assert_eq!(cfg.train.initial_lr, 0.005);
        assert_eq!(cfg.train.lr_drop_factor, 0.9772);
        assert_eq!(cfg.train.loss_power, 8);
        assert_eq!(cfg.dataset.pool, 50000);
        assert_eq!(cfg.dataset.n_select, 10000);
        assert_eq!(cfg.dataset.pi_depths, vec![1, 2, 3, 4, 5]);
        let th = &cfg.dataset.pi_clip_thresholds;
        assert!((th[0] - 1.0).abs() < 1e-12);
        assert!((th[1] - (203.0f64 / 92.0).sqrt()).abs() < 1e-12);
        assert!((th[4] - (536.0f64 / 92.0).sqrt()).abs() < 1e-12);

        let c2 = parse("experiment = \"case2\"\nscale = \"paper\"").unwrap();
        assert_eq!(c2.train.epochs, 5000);
        assert_eq!(c2.train.initial_lr, 0.02);
        assert_eq!(c2.train.lr_drop_factor, 0.965);
        assert_eq!(c2.dataset.stride, 25);
        assert_eq!(c2.dataset.gamma_hidden_widths, vec![2, 5, 10, 20, 30, 40]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse("experiment = \"case1\"\nbogus = 1").is_err());
        assert!(parse("experiment = \"case1\"\n[train]\nlearning = 1").is_err());
    }

    #[test]
    fn overrides_replace_preset_fields() {
        let cfg = parse(
            "experiment = \"case2\"\n[train]\nepochs = 7\ninitial_lr = 0.1\n[boucwen]\nlambda = 1.0\n[dataset]\npool = 50",
        )
        .unwrap();
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.train.initial_lr, 0.1);
        assert_eq!(cfg.boucwen.lambda, 1.0);
        assert_eq!(cfg.dataset.pool, 50);
        // Untouched fields keep the preset.
        assert_eq!(cfg.train.lr_drop_factor, 0.965);
    }

    #[test]
    fn resolved_config_round_trips_through_toml() {
        let cfg = parse("experiment = \"case1\"\nseed = 11").unwrap();
        let echoed = ResolvedConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, echoed);
    }

    #[test]
    fn dotted_cli_overrides_reach_nested_tables() {
        let dir = std::env::temp_dir().join("oscnet_cfg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.toml");
        std::fs::write(&path, "experiment = \"case2\"\n").unwrap();
        let cfg = load_config(
            &path,
            Some(9),
            None,
            Some("elsewhere"),
            &["train.epochs=3".into(), "boucwen.zeta=0.02".into()],
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.boucwen.zeta, 0.02);
        assert_eq!(cfg.output_dir, "elsewhere");
        assert!(load_config(&path, None, None, None, &["no.such.key=1".into()]).is_err());
    }
}
