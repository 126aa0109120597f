//! The neural oscillator: a second-order ODE `x'' = Gamma(x, x', u)` with MLP
//! right-hand side, read out by `y = Pi(x, u(0), t)`, integrated with a
//! fixed-step second-order Runge-Kutta (Heun) scheme from zero initial
//! conditions. Loss gradients are computed by reverse accumulation through the
//! unrolled integrator.

use crate::diffcore::{DiffError, GradientVector, NodeId, Tape};
use crate::nets::{Activation, MlpParams, NetsError};
use crate::signal::Signal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OscError {
    #[error("model widths are inconsistent: {0}")]
    BadWidths(String),
    #[error(transparent)]
    Nets(#[from] NetsError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("input signal has {got} channels, model expects {expected}")]
    InputDim { expected: usize, got: usize },
    #[error("target signal has {got} channels, model expects {expected}")]
    TargetDim { expected: usize, got: usize },
    #[error("signal needs at least 2 time points, got {0}")]
    TooShort(usize),
    #[error("non-finite state at integration step {step}")]
    NonFiniteState { step: usize },
    #[error("signals in batch do not share a common time grid")]
    GridMismatch,
    #[error("loss is non-finite")]
    NonFiniteLoss,
    #[error("empty batch")]
    EmptyBatch,
    #[error("loss power must be >= 1")]
    BadLossPower,
}

/// The oscillator of Eq.-style state-space form: state `z = [z1; z2]` with
/// `z1' = z2`, `z2' = Gamma(z1, z2, u)`, output `y = Pi(z1, u(0), t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorModel {
    pub gamma: MlpParams,
    pub pi: MlpParams,
    /// State dimension of x (so z has dimension 2r).
    pub r: usize,
    /// Input channels.
    pub p: usize,
    /// Output channels.
    pub q: usize,
}

impl OscillatorModel {
    pub fn validate(&self) -> Result<(), OscError> {
        self.gamma.validate()?;
        self.pi.validate()?;
        if self.gamma.in_width() != 2 * self.r + self.p || self.gamma.out_width() != self.r {
            return Err(OscError::BadWidths(format!(
                "gamma must map {} -> {}, maps {} -> {}",
                2 * self.r + self.p,
                self.r,
                self.gamma.in_width(),
                self.gamma.out_width()
            )));
        }
        if self.pi.in_width() != self.r + self.p + 1 || self.pi.out_width() != self.q {
            return Err(OscError::BadWidths(format!(
                "pi must map {} -> {}, maps {} -> {}",
                self.r + self.p + 1,
                self.q,
                self.pi.in_width(),
                self.pi.out_width()
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.gamma.param_count() + self.pi.param_count()
    }

    /// Flat parameters: all of Gamma, then all of Pi, each in layer-major
    /// order with weights before biases and PReLU slope plus batch-norm
    /// gamma/beta appended per layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.gamma.flatten();
        out.extend(self.pi.flatten());
        out
    }

    pub fn unflatten(&mut self, flat: &[f64]) -> Result<(), OscError> {
        let ng = self.gamma.param_count();
        if flat.len() != ng + self.pi.param_count() {
            return Err(OscError::Nets(NetsError::ParamLength {
                expected: ng + self.pi.param_count(),
                got: flat.len(),
            }));
        }
        self.gamma.unflatten(&flat[..ng])?;
        self.pi.unflatten(&flat[ng..])?;
        Ok(())
    }
}

/// Intermediate values of one forward pass, sufficient to replay it exactly.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// z(t_i) for i = 0..=I, each of length 2r.
    pub z: Vec<Vec<f64>>,
    /// Stage values per step, each of length 2r.
    pub k1: Vec<Vec<f64>>,
    pub k2: Vec<Vec<f64>>,
    /// Readout inputs [z1, u(0), t_i] per grid point.
    pub pi_inputs: Vec<Vec<f64>>,
}

fn check_input(model: &OscillatorModel, u: &Signal) -> Result<(), OscError> {
    if u.dim() != model.p {
        return Err(OscError::InputDim {
            expected: model.p,
            got: u.dim(),
        });
    }
    if u.len() < 2 {
        return Err(OscError::TooShort(u.len()));
    }
    Ok(())
}

/// Simulates the oscillator over the grid of `u` in inference mode.
pub fn oscillator_forward(
    model: &OscillatorModel,
    u: &Signal,
) -> Result<(Signal, ForwardCache), OscError> {
    model.validate()?;
    check_input(model, u)?;
    let (r, p) = (model.r, model.p);
    let dt = u.dt();
    let steps = u.len() - 1;
    let u0 = u.sample(0).to_vec();

    let gamma_eval = |z1: &[f64], z2: &[f64], ui: &[f64]| -> Vec<f64> {
        let mut input = Vec::with_capacity(2 * r + p);
        input.extend_from_slice(z1);
        input.extend_from_slice(z2);
        input.extend_from_slice(ui);
        model.gamma.forward_inference(&input).expect("validated widths")
    };

    let mut z = vec![0.0; 2 * r];
    let mut cache = ForwardCache {
        z: Vec::with_capacity(steps + 1),
        k1: Vec::with_capacity(steps),
        k2: Vec::with_capacity(steps),
        pi_inputs: Vec::with_capacity(steps + 1),
    };
    let mut y_values = Vec::with_capacity((steps + 1) * model.q);

    for i in 0..=steps {
        cache.z.push(z.clone());
        let mut pi_in = Vec::with_capacity(r + p + 1);
        pi_in.extend_from_slice(&z[..r]);
        pi_in.extend_from_slice(&u0);
        pi_in.push(i as f64 * dt);
        let y = model.pi.forward_inference(&pi_in)?;
        cache.pi_inputs.push(pi_in);
        y_values.extend_from_slice(&y);

        if i == steps {
            break;
        }
        let (z1, z2) = z.split_at(r);
        let g1 = gamma_eval(z1, z2, u.sample(i));
        let mut k1 = Vec::with_capacity(2 * r);
        k1.extend_from_slice(z2);
        k1.extend_from_slice(&g1);

        let z1_mid: Vec<f64> = z1.iter().zip(z2).map(|(a, b)| a + dt * b).collect();
        let z2_mid: Vec<f64> = z2.iter().zip(&g1).map(|(a, b)| a + dt * b).collect();
        let g2 = gamma_eval(&z1_mid, &z2_mid, u.sample(i + 1));
        let mut k2 = Vec::with_capacity(2 * r);
        k2.extend_from_slice(&z2_mid);
        k2.extend_from_slice(&g2);

        let mut z_next = vec![0.0; 2 * r];
        for j in 0..2 * r {
            z_next[j] = z[j] + 0.5 * dt * (k1[j] + k2[j]);
        }
        if !z_next.iter().all(|v| v.is_finite()) {
            return Err(OscError::NonFiniteState { step: i + 1 });
        }
        cache.k1.push(k1);
        cache.k2.push(k2);
        z = z_next;
    }

    let y = Signal::new(model.q, dt, y_values).map_err(|_| OscError::NonFiniteLoss)?;
    Ok((y, cache))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// Batch-norm layers use batch statistics and update running statistics.
    Train,
    /// Batch-norm layers use running statistics.
    Inference,
}

struct TapeLayerIds {
    w: NodeId,
    rows: usize,
    cols: usize,
    b: NodeId,
    alpha: Option<NodeId>,
    bn_gamma: Option<NodeId>,
    bn_beta: Option<NodeId>,
}

/// Registers the trainable parameters of one MLP on the tape, in the same
/// order as [`MlpParams::flatten`].
fn register_mlp(tape: &mut Tape, mlp: &MlpParams) -> Vec<TapeLayerIds> {
    mlp.layers
        .iter()
        .map(|layer| TapeLayerIds {
            w: tape.param(layer.weight.data()),
            rows: layer.weight.rows(),
            cols: layer.weight.cols(),
            b: tape.param(&layer.bias),
            alpha: layer.prelu_alpha.map(|a| tape.param(&[a])),
            bn_gamma: layer.batch_norm.as_ref().map(|bn| tape.param(&bn.gamma)),
            bn_beta: layer.batch_norm.as_ref().map(|bn| tape.param(&bn.beta)),
        })
        .collect()
}

fn tape_activation(
    tape: &mut Tape,
    pre: NodeId,
    activation: Activation,
    alpha: Option<NodeId>,
) -> NodeId {
    match activation {
        Activation::Linear => pre,
        Activation::Relu => tape.relu(pre),
        Activation::Prelu => tape.prelu(pre, alpha.expect("validated: prelu slope present")),
    }
}

/// Forward pass of one MLP on the tape with batch-norm layers in inference
/// mode (running statistics folded in as constants).
fn tape_mlp_forward(
    tape: &mut Tape,
    mlp: &MlpParams,
    ids: &[TapeLayerIds],
    input: NodeId,
) -> NodeId {
    let mut x = input;
    for (layer, id) in mlp.layers.iter().zip(ids) {
        let mut pre = tape.affine(id.w, id.rows, id.cols, x, id.b);
        if let Some(bn) = &layer.batch_norm {
            let neg_mean: Vec<f64> = bn.running_mean.iter().map(|m| -m).collect();
            let inv_std: Vec<f64> = bn
                .running_var
                .iter()
                .map(|v| 1.0 / (v + bn.epsilon).sqrt())
                .collect();
            let nm = tape.constant(&neg_mean);
            let is = tape.constant(&inv_std);
            let centered = tape.add(pre, nm);
            let xhat = tape.mul(centered, is);
            let scaled = tape.mul(xhat, id.bn_gamma.expect("bn params registered"));
            pre = tape.add(scaled, id.bn_beta.expect("bn params registered"));
        }
        x = tape_activation(tape, pre, layer.activation, layer.prelu_alpha.map(|_| id.alpha.unwrap()));
    }
    x
}

/// Batch statistics of one batch-norm layer, captured for the running-stat
/// update after the backward pass.
struct BnBatchStats {
    layer: usize,
    mean: Vec<f64>,
    var: Vec<f64>,
}

/// Forward pass of one MLP over many inputs jointly, with batch-norm layers
/// normalizing by the statistics of the whole input collection.
fn tape_mlp_forward_batch_train(
    tape: &mut Tape,
    mlp: &MlpParams,
    ids: &[TapeLayerIds],
    inputs: &[NodeId],
) -> (Vec<NodeId>, Vec<BnBatchStats>) {
    let mut xs = inputs.to_vec();
    let mut stats = Vec::new();
    for (li, (layer, id)) in mlp.layers.iter().zip(ids).enumerate() {
        let mut pres: Vec<NodeId> = xs
            .iter()
            .map(|&x| tape.affine(id.w, id.rows, id.cols, x, id.b))
            .collect();
        if let Some(bn) = &layer.batch_norm {
            let mean = tape.mean_many(&pres);
            let centered: Vec<NodeId> = pres.iter().map(|&p| tape.sub(p, mean)).collect();
            let squares: Vec<NodeId> = centered.iter().map(|&c| tape.mul(c, c)).collect();
            let var = tape.mean_many(&squares);
            stats.push(BnBatchStats {
                layer: li,
                mean: tape.value(mean).to_vec(),
                var: tape.value(var).to_vec(),
            });
            let stabilized = tape.offset(var, bn.epsilon);
            let std = tape.sqrt(stabilized);
            pres = centered
                .iter()
                .map(|&c| {
                    let xhat = tape.div(c, std);
                    let scaled = tape.mul(xhat, id.bn_gamma.expect("bn params registered"));
                    tape.add(scaled, id.bn_beta.expect("bn params registered"))
                })
                .collect();
        }
        xs = pres
            .into_iter()
            .map(|p| tape_activation(tape, p, layer.activation, layer.prelu_alpha.map(|_| id.alpha.unwrap())))
            .collect();
    }
    (xs, stats)
}

/// Unrolls the RK2 loop for one sample on the tape; returns the readout
/// inputs [z1, u(0), t_i] per grid point.
fn tape_rollout(
    tape: &mut Tape,
    model: &OscillatorModel,
    gamma_ids: &[TapeLayerIds],
    u: &Signal,
) -> Result<Vec<NodeId>, OscError> {
    let (r, p) = (model.r, model.p);
    let dt = u.dt();
    let steps = u.len() - 1;
    let u0 = tape.constant(u.sample(0));

    let mut z1 = tape.constant(&vec![0.0; r]);
    let mut z2 = tape.constant(&vec![0.0; r]);
    let mut pi_inputs = Vec::with_capacity(steps + 1);
    let _ = p;

    for i in 0..=steps {
        let t = tape.constant(&[i as f64 * dt]);
        pi_inputs.push(tape.concat3(z1, u0, t));
        if i == steps {
            break;
        }
        let ui = tape.constant(u.sample(i));
        let uj = tape.constant(u.sample(i + 1));

        let gin1 = tape.concat3(z1, z2, ui);
        let g1 = tape_mlp_forward(tape, &model.gamma, gamma_ids, gin1);
        let z1_mid = tape.add_scaled(z1, z2, dt);
        let z2_mid = tape.add_scaled(z2, g1, dt);
        let gin2 = tape.concat3(z1_mid, z2_mid, uj);
        let g2 = tape_mlp_forward(tape, &model.gamma, gamma_ids, gin2);

        let s1 = tape.add(z2, z2_mid);
        let z1_next = tape.add_scaled(z1, s1, 0.5 * dt);
        let s2 = tape.add(g1, g2);
        let z2_next = tape.add_scaled(z2, s2, 0.5 * dt);
        if !tape.value(z1_next).iter().all(|v| v.is_finite())
            || !tape.value(z2_next).iter().all(|v| v.is_finite())
        {
            return Err(OscError::NonFiniteState { step: i + 1 });
        }
        z1 = z1_next;
        z2 = z2_next;
    }
    Ok(pi_inputs)
}

fn check_batch(model: &OscillatorModel, batch: &[(Signal, Signal)]) -> Result<(), OscError> {
    if batch.is_empty() {
        return Err(OscError::EmptyBatch);
    }
    let (u0, _) = &batch[0];
    check_input(model, u0)?;
    for (u, y) in batch {
        if y.dim() != model.q {
            return Err(OscError::TargetDim {
                expected: model.q,
                got: y.dim(),
            });
        }
        if u.dt() != u0.dt() || u.len() != u0.len() || y.dt() != u0.dt() || y.len() != u0.len() {
            return Err(OscError::GridMismatch);
        }
        if u.dim() != model.p {
            return Err(OscError::InputDim {
                expected: model.p,
                got: u.dim(),
            });
        }
    }
    Ok(())
}

/// Mean r-th power loss over a batch and its gradient with respect to all
/// model parameters, by backpropagation through the unrolled integrator.
///
/// The loss is `(1/(L*I*q)) * sum_{l,i,j} |y - target|^r` over `L` samples,
/// grid points `i = 0..=I` where `I` is the number of integration intervals,
/// and `q` output channels. In [`LossMode::Train`], batch-norm layers of `Pi`
/// normalize by batch statistics over the flattened sample-by-time dimension
/// and their running statistics are updated in place.
pub fn oscillator_loss_and_grad(
    model: &mut OscillatorModel,
    batch: &[(Signal, Signal)],
    r_power: u32,
    mode: LossMode,
) -> Result<(f64, GradientVector), OscError> {
    model.validate()?;
    check_batch(model, batch)?;
    if r_power < 1 {
        return Err(OscError::BadLossPower);
    }
    let intervals = batch[0].0.len() - 1;
    let norm = 1.0 / (batch.len() as f64 * intervals as f64 * model.q as f64);
    let has_bn = model
        .pi
        .layers
        .iter()
        .chain(&model.gamma.layers)
        .any(|l| l.batch_norm.is_some());

    if mode == LossMode::Train && has_bn {
        joint_loss_and_grad(model, batch, r_power, norm)
    } else {
        per_sample_loss_and_grad(model, batch, r_power, norm)
    }
}

/// Appends per-grid-point loss terms `sum_j |y_ij - target_ij|^r` and returns
/// the accumulated sum node.
fn accumulate_loss(
    tape: &mut Tape,
    outputs: &[NodeId],
    target: &Signal,
    r_power: u32,
    mut acc: Option<NodeId>,
) -> Option<NodeId> {
    for (i, &y) in outputs.iter().enumerate() {
        let tgt = tape.constant(target.sample(i));
        let diff = tape.sub(y, tgt);
        let pw = tape.pow_abs(diff, r_power as f64);
        let s = tape.sum_all(pw);
        acc = Some(match acc {
            None => s,
            Some(a) => tape.add(a, s),
        });
    }
    acc
}

fn per_sample_loss_and_grad(
    model: &OscillatorModel,
    batch: &[(Signal, Signal)],
    r_power: u32,
    norm: f64,
) -> Result<(f64, GradientVector), OscError> {
    let mut tape = Tape::new();
    let mut total = 0.0;
    let mut grad = GradientVector::zeros(model.param_count());
    for (u, target) in batch {
        tape.reset();
        let gamma_ids = register_mlp(&mut tape, &model.gamma);
        let pi_ids = register_mlp(&mut tape, &model.pi);
        let pi_inputs = tape_rollout(&mut tape, model, &gamma_ids, u)?;
        let outputs: Vec<NodeId> = pi_inputs
            .iter()
            .map(|&x| tape_mlp_forward(&mut tape, &model.pi, &pi_ids, x))
            .collect();
        let acc = accumulate_loss(&mut tape, &outputs, target, r_power, None)
            .expect("non-empty grid");
        total += tape.value(acc)[0];
        let g = tape.backward_seeded(acc, norm)?;
        grad.add_scaled(&g, 1.0);
    }
    let loss = total * norm;
    if !loss.is_finite() {
        return Err(OscError::NonFiniteLoss);
    }
    if !grad.is_finite() {
        return Err(OscError::NonFiniteLoss);
    }
    Ok((loss, grad))
}

fn joint_loss_and_grad(
    model: &mut OscillatorModel,
    batch: &[(Signal, Signal)],
    r_power: u32,
    norm: f64,
) -> Result<(f64, GradientVector), OscError> {
    let mut tape = Tape::new();
    let gamma_ids = register_mlp(&mut tape, &model.gamma);
    let pi_ids = register_mlp(&mut tape, &model.pi);

    let mut all_pi_inputs = Vec::new();
    let mut counts = Vec::with_capacity(batch.len());
    for (u, _) in batch {
        let pi_inputs = tape_rollout(&mut tape, model, &gamma_ids, u)?;
        counts.push(pi_inputs.len());
        all_pi_inputs.extend(pi_inputs);
    }
    let (outputs, stats) =
        tape_mlp_forward_batch_train(&mut tape, &model.pi, &pi_ids, &all_pi_inputs);

    let mut acc = None;
    let mut offset = 0;
    for ((_, target), &n) in batch.iter().zip(&counts) {
        acc = accumulate_loss(&mut tape, &outputs[offset..offset + n], target, r_power, acc);
        offset += n;
    }
    let acc = acc.expect("non-empty batch");
    let loss = tape.value(acc)[0] * norm;
    if !loss.is_finite() {
        return Err(OscError::NonFiniteLoss);
    }
    let grad = tape.backward_seeded(acc, norm)?;
    if !grad.is_finite() {
        return Err(OscError::NonFiniteLoss);
    }

    // Running statistics update, outside the differentiated graph. The
    // running variance uses the unbiased estimate.
    let n_batch = all_pi_inputs.len() as f64;
    let unbias = n_batch / (n_batch - 1.0);
    for st in stats {
        let bn = model.pi.layers[st.layer]
            .batch_norm
            .as_mut()
            .expect("stats only recorded for batch-norm layers");
        for j in 0..bn.gamma.len() {
            bn.running_mean[j] = (1.0 - bn.momentum) * bn.running_mean[j] + bn.momentum * st.mean[j];
            bn.running_var[j] =
                (1.0 - bn.momentum) * bn.running_var[j] + bn.momentum * st.var[j] * unbias;
        }
    }
    Ok((loss, grad))
}
