//! Training pipeline: dataset construction and splits, Adam with a stepped
//! learning-rate schedule, per-network gradient-norm clipping, and the
//! deterministic epoch loop with validation-based model selection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::GradientVector;
use crate::oscillator::{
    oscillator_forward, oscillator_loss_and_grad, LossMode, OscError, OscillatorModel,
};
use crate::signal::Signal;
use crate::stochastic::SeededRng;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("dataset has no training samples")]
    EmptyDataset,
    #[error("pool of {pool} samples cannot supply {select} selections")]
    PoolTooSmall { pool: usize, select: usize },
    #[error("dataset signals do not share one time grid")]
    GridMismatch,
    #[error("non-finite gradient at epoch {epoch}")]
    NonFiniteGradient { epoch: usize },
    #[error(transparent)]
    Osc(#[from] OscError),
}

/// Rule for picking the returned network from the epoch history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSelection {
    /// Checkpoint with the smallest validation sup-norm error.
    BestValLinf,
    /// Network state after the final optimizer update.
    LastUpdate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    /// Epochs between learning-rate drops.
    pub lr_drop_period: usize,
    pub lr_drop_factor: f64,
    pub clip_threshold_gamma: f64,
    pub clip_threshold_pi: f64,
    /// Power r of the mean |error|^r training loss.
    pub loss_power: u32,
    pub seed: u64,
    pub model_selection: ModelSelection,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig("batch_size must be positive".into()));
        }
        if self.lr_drop_period == 0 {
            return Err(TrainError::BadConfig("lr_drop_period must be positive".into()));
        }
        if !(self.initial_lr > 0.0) {
            return Err(TrainError::BadConfig("initial_lr must be positive".into()));
        }
        if !(self.lr_drop_factor > 0.0 && self.lr_drop_factor <= 1.0) {
            return Err(TrainError::BadConfig("lr_drop_factor must lie in (0, 1]".into()));
        }
        if !(self.clip_threshold_gamma > 0.0 && self.clip_threshold_pi > 0.0) {
            return Err(TrainError::BadConfig("clip thresholds must be positive".into()));
        }
        if self.loss_power < 1 {
            return Err(TrainError::BadConfig("loss_power must be at least 1".into()));
        }
        Ok(())
    }
}

/// Stepped schedule: `initial_lr * factor^{floor(epoch / period)}`.
pub fn lr_at(config: &TrainConfig, epoch: usize) -> f64 {
    config.initial_lr * config.lr_drop_factor.powi((epoch / config.lr_drop_period) as i32)
}

/// Rescales so the 2-norm never exceeds `threshold`; direction is preserved.
pub fn clip_grad_norm(mut grad: GradientVector, threshold: f64) -> GradientVector {
    clip_slice(&mut grad.0, threshold);
    grad
}

fn clip_slice(seg: &mut [f64], threshold: f64) {
    let norm = seg.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > threshold {
        let scale = threshold / norm;
        for g in seg.iter_mut() {
            *g *= scale;
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// Standard bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    lr: f64,
    epoch: usize,
) -> Result<(), TrainError> {
    assert_eq!(params.len(), grad.len());
    assert_eq!(params.len(), state.m.len());
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient { epoch });
    }
    state.step += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.step as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.step as i32);
    for i in 0..params.len() {
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * grad[i];
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
    Ok(())
}

/// Excitation/response pairs with disjoint train and validation splits over
/// one shared time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Signal>,
    pub targets: Vec<Signal>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub provenance: String,
}

impl Dataset {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.inputs.len() != self.targets.len() || self.inputs.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        let (dt, len) = (self.inputs[0].dt(), self.inputs[0].len());
        for s in self.inputs.iter().chain(&self.targets) {
            if s.dt() != dt || s.len() != len {
                return Err(TrainError::GridMismatch);
            }
        }
        let mut seen = vec![false; self.inputs.len()];
        for &i in self.train_indices.iter().chain(&self.val_indices) {
            if i >= seen.len() || seen[i] {
                return Err(TrainError::BadConfig("overlapping or out-of-range split".into()));
            }
            seen[i] = true;
        }
        Ok(())
    }

    pub fn pair(&self, idx: usize) -> (Signal, Signal) {
        (self.inputs[idx].clone(), self.targets[idx].clone())
    }
}

/// `n_select` approximately equally spaced ranks over `0..pool`, duplicates
/// advanced to the next unused rank.
fn spaced_ranks(pool: usize, n_select: usize) -> Result<Vec<usize>, TrainError> {
    if n_select == 0 || n_select > pool {
        return Err(TrainError::PoolTooSmall {
            pool,
            select: n_select,
        });
    }
    let mut used = vec![false; pool];
    let mut ranks = Vec::with_capacity(n_select);
    for j in 0..n_select {
        let ideal = if n_select == 1 {
            0
        } else {
            ((j as f64) * ((pool - 1) as f64) / ((n_select - 1) as f64)).round() as usize
        };
        let mut r = ideal.min(pool - 1);
        while used[r] {
            r += 1;
        }
        used[r] = true;
        ranks.push(r);
    }
    Ok(ranks)
}

/// Every 5th selected pair goes to validation, the rest to training.
fn split_every_fifth(n_select: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for j in 0..n_select {
        if (j + 1) % 5 == 0 {
            val.push(j);
        } else {
            train.push(j);
        }
    }
    (train, val)
}

fn assemble(
    pairs: &[(Signal, Signal)],
    order: &[usize],
    picked: &[usize],
    provenance: String,
) -> Result<Dataset, TrainError> {
    let mut inputs = Vec::with_capacity(picked.len());
    let mut targets = Vec::with_capacity(picked.len());
    for &rank in picked {
        let (u, y) = &pairs[order[rank]];
        inputs.push(u.clone());
        targets.push(y.clone());
    }
    let (train_indices, val_indices) = split_every_fifth(picked.len());
    let data = Dataset {
        inputs,
        targets,
        train_indices,
        val_indices,
        provenance,
    };
    data.validate()?;
    Ok(data)
}

/// Descending sort order of `pairs` by `score`, ties broken by pool index.
fn descending_order(pairs: &[(Signal, Signal)], score: impl Fn(&(Signal, Signal)) -> f64) -> Vec<usize> {
    let scores: Vec<f64> = pairs.iter().map(score).collect();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    order
}

/// Ranks pairs by the peak absolute response, then keeps `n_select`
/// approximately equally spaced ranks.
pub fn build_case1_dataset(
    pairs: &[(Signal, Signal)],
    n_select: usize,
) -> Result<Dataset, TrainError> {
    let order = descending_order(pairs, |(_, y)| {
        y.values().iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    });
    let picked = spaced_ranks(pairs.len(), n_select)?;
    assemble(
        pairs,
        &order,
        &picked,
        format!("case1: pool {} ranked by peak |response|, {} spaced ranks", pairs.len(), n_select),
    )
}

/// Ranks pairs by the sample standard deviation of the excitation, then keeps
/// every `stride`-th rank starting from the largest.
pub fn build_case2_dataset(
    pairs: &[(Signal, Signal)],
    stride: usize,
) -> Result<Dataset, TrainError> {
    if stride == 0 || stride > pairs.len() {
        return Err(TrainError::PoolTooSmall {
            pool: pairs.len(),
            select: stride.max(1),
        });
    }
    let order = descending_order(pairs, |(u, _)| {
        let vals = u.values();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    });
    let picked: Vec<usize> = (0..pairs.len()).step_by(stride).collect();
    assemble(
        pairs,
        &order,
        &picked,
        format!("case2: pool {} ranked by excitation std, stride {}", pairs.len(), stride),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_linf: f64,
    pub val_lr_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose checkpoint the returned model corresponds to, when
    /// selection is by best validation error.
    pub best_epoch: Option<usize>,
    pub diverged: bool,
}

/// Sup-norm and mean |error|^r validation metrics in inference mode.
fn eval_metrics(
    model: &OscillatorModel,
    data: &Dataset,
    indices: &[usize],
    r_power: u32,
) -> Result<(f64, f64), TrainError> {
    let mut linf: f64 = 0.0;
    let mut acc = 0.0;
    let mut terms = 0usize;
    for &idx in indices {
        let (y, _) = oscillator_forward(model, &data.inputs[idx])?;
        let tgt = &data.targets[idx];
        for i in 0..y.len() {
            for (a, b) in y.sample(i).iter().zip(tgt.sample(i)) {
                let d = (a - b).abs();
                linf = linf.max(d);
                acc += d.powi(r_power as i32);
            }
        }
        terms += (y.len() - 1) * y.dim();
    }
    Ok((linf, acc / terms as f64))
}

fn shuffle(indices: &mut [usize], rng: &mut SeededRng) {
    for i in (1..indices.len()).rev() {
        let j = (rng.uniform(0.0, (i + 1) as f64) as usize).min(i);
        indices.swap(i, j);
    }
}

/// Runs the full training loop in place and returns the epoch history. The
/// model left in `model` follows `config.model_selection`; on divergence the
/// last finite checkpoint is restored and the record is marked.
pub fn train(
    model: &mut OscillatorModel,
    data: &Dataset,
    config: &TrainConfig,
) -> Result<TrainRecord, TrainError> {
    config.validate()?;
    data.validate()?;
    model.validate()?;
    if data.train_indices.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let eval_indices: &[usize] = if data.val_indices.is_empty() {
        &data.train_indices
    } else {
        &data.val_indices
    };
    let ng = model.gamma.param_count();
    let mut flat = model.flatten();
    let mut adam = AdamState::new(flat.len());
    let mut record = TrainRecord {
        epochs: Vec::with_capacity(config.epochs),
        best_epoch: None,
        diverged: false,
    };
    let mut best: Option<(f64, usize, OscillatorModel)> = None;
    let mut last_good = model.clone();

    'epochs: for epoch in 0..config.epochs {
        let lr = lr_at(config, epoch);
        let mut order = data.train_indices.to_vec();
        let mut rng = SeededRng::new(config.seed, epoch as u64);
        shuffle(&mut order, &mut rng);

        let mut loss_acc = 0.0;
        let mut loss_weight = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(Signal, Signal)> = chunk.iter().map(|&i| data.pair(i)).collect();
            let step = oscillator_loss_and_grad(model, &batch, config.loss_power, LossMode::Train);
            let (loss, mut grad) = match step {
                Ok(ok) => ok,
                Err(OscError::NonFiniteState { .. }) | Err(OscError::NonFiniteLoss) => {
                    record.diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e.into()),
            };
            if !loss.is_finite() || !grad.is_finite() {
                record.diverged = true;
                break 'epochs;
            }
            loss_acc += loss * chunk.len() as f64;
            loss_weight += chunk.len() as f64;
            clip_slice(&mut grad.0[..ng], config.clip_threshold_gamma);
            clip_slice(&mut grad.0[ng..], config.clip_threshold_pi);
            adam_step(&mut flat, &grad.0, &mut adam, lr, epoch)?;
            model.unflatten(&flat)?;
        }
        let (val_linf, val_lr_loss) =
            match eval_metrics(model, data, eval_indices, config.loss_power) {
                Ok(v) if v.0.is_finite() => v,
                Ok(_)
                | Err(TrainError::Osc(OscError::NonFiniteState { .. }))
                | Err(TrainError::Osc(OscError::NonFiniteLoss)) => {
                    record.diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
        last_good = model.clone();
        record.epochs.push(EpochStats {
            epoch,
            lr,
            train_loss: loss_acc / loss_weight,
            val_linf,
            val_lr_loss,
        });
        if val_linf.is_finite() && best.as_ref().map_or(true, |(b, _, _)| val_linf < *b) {
            best = Some((val_linf, epoch, model.clone()));
        }
    }

    if record.diverged {
        *model = last_good;
    }
    match config.model_selection {
        ModelSelection::BestValLinf => {
            if let Some((_, epoch, checkpoint)) = best {
                record.best_epoch = Some(epoch);
                *model = checkpoint;
            }
        }
        ModelSelection::LastUpdate => {}
    }
    Ok(record)
}
