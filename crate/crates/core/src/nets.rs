//! MLP building blocks: layers, activations, batch normalization,
//! fan-in-scaled initialization, and identity deepening for warm starts.

use crate::diffcore::{affine, DenseMatrix};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BATCHNORM_EPSILON: f64 = 1e-5;
pub const BATCHNORM_MOMENTUM: f64 = 0.1;
pub const PRELU_INIT_SLOPE: f64 = 0.25;

#[derive(Debug, Error)]
pub enum NetsError {
    #[error("input length {got} does not match layer input width {expected}")]
    InputWidth { expected: usize, got: usize },
    #[error("batch normalization in train mode requires batch size >= 2, got {0}")]
    BatchTooSmall(usize),
    #[error("layer widths are inconsistent at layer {layer}")]
    InconsistentWidths { layer: usize },
    #[error("mlp requires at least one layer")]
    NoLayers,
    #[error("prelu layer missing slope parameter at layer {layer}")]
    MissingSlope { layer: usize },
    #[error("parameter vector length {got} does not match parameter count {expected}")]
    ParamLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Prelu,
    Linear,
}

/// Per-unit batch normalization state for one hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNorm {
    pub fn identity(width: usize) -> Self {
        BatchNorm {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
            momentum: BATCHNORM_MOMENTUM,
            epsilon: BATCHNORM_EPSILON,
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    TrainBatch,
    Inference,
}

/// One affine layer with optional batch normalization (applied between the
/// affine map and the activation) and optional PReLU slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
    pub prelu_alpha: Option<f64>,
    pub batch_norm: Option<BatchNorm>,
}

impl Layer {
    pub fn in_width(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_width(&self) -> usize {
        self.weight.rows()
    }

    /// Trainable parameters: weights, bias, PReLU slope, batch-norm gamma and
    /// beta. Running statistics are state, not parameters.
    pub fn param_count(&self) -> usize {
        let mut n = self.weight.rows() * self.weight.cols() + self.bias.len();
        if self.prelu_alpha.is_some() {
            n += 1;
        }
        if let Some(bn) = &self.batch_norm {
            n += bn.gamma.len() + bn.beta.len();
        }
        n
    }
}

/// A multilayer perceptron. The final layer is conventionally linear.
///
/// The flat parameter order is layer-major: for each layer, weights
/// (row-major), bias, PReLU slope if present, then batch-norm gamma and beta
/// if present. This order is shared by checkpoints and gradient vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    pub fn validate(&self) -> Result<(), NetsError> {
        if self.layers.is_empty() {
            return Err(NetsError::NoLayers);
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.bias.len() != layer.out_width() {
                return Err(NetsError::InconsistentWidths { layer: i });
            }
            if i > 0 && layer.in_width() != self.layers[i - 1].out_width() {
                return Err(NetsError::InconsistentWidths { layer: i });
            }
            if layer.activation == Activation::Prelu && layer.prelu_alpha.is_none() {
                return Err(NetsError::MissingSlope { layer: i });
            }
            if let Some(bn) = &layer.batch_norm {
                if bn.width() != layer.out_width()
                    || bn.beta.len() != bn.width()
                    || bn.running_mean.len() != bn.width()
                    || bn.running_var.len() != bn.width()
                {
                    return Err(NetsError::InconsistentWidths { layer: i });
                }
            }
        }
        Ok(())
    }

    pub fn in_width(&self) -> usize {
        self.layers[0].in_width()
    }

    pub fn out_width(&self) -> usize {
        self.layers.last().unwrap().out_width()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Flattens trainable parameters in the documented order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(layer.weight.data());
            out.extend_from_slice(&layer.bias);
            if let Some(a) = layer.prelu_alpha {
                out.push(a);
            }
            if let Some(bn) = &layer.batch_norm {
                out.extend_from_slice(&bn.gamma);
                out.extend_from_slice(&bn.beta);
            }
        }
        out
    }

    /// Writes a flat parameter vector back, preserving shapes and running
    /// statistics.
    pub fn unflatten(&mut self, flat: &[f64]) -> Result<(), NetsError> {
        if flat.len() != self.param_count() {
            return Err(NetsError::ParamLength {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut pos = 0;
        for layer in &mut self.layers {
            let (rows, cols) = (layer.weight.rows(), layer.weight.cols());
            let nw = rows * cols;
            layer.weight =
                DenseMatrix::new(rows, cols, flat[pos..pos + nw].to_vec()).expect("shape preserved");
            pos += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&flat[pos..pos + nb]);
            pos += nb;
            if layer.prelu_alpha.is_some() {
                layer.prelu_alpha = Some(flat[pos]);
                pos += 1;
            }
            if let Some(bn) = &mut layer.batch_norm {
                let w = bn.width();
                bn.gamma.copy_from_slice(&flat[pos..pos + w]);
                pos += w;
                bn.beta.copy_from_slice(&flat[pos..pos + w]);
                pos += w;
            }
        }
        debug_assert_eq!(pos, flat.len());
        Ok(())
    }

    /// Single-sample forward pass in inference mode (batch-norm layers use
    /// running statistics).
    pub fn forward_inference(&self, input: &[f64]) -> Result<Vec<f64>, NetsError> {
        if input.len() != self.in_width() {
            return Err(NetsError::InputWidth {
                expected: self.in_width(),
                got: input.len(),
            });
        }
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut pre = affine(&layer.weight, &x, &layer.bias).expect("validated shapes");
            if let Some(bn) = &layer.batch_norm {
                for (j, v) in pre.iter_mut().enumerate() {
                    let xhat = (*v - bn.running_mean[j]) / (bn.running_var[j] + bn.epsilon).sqrt();
                    *v = bn.gamma[j] * xhat + bn.beta[j];
                }
            }
            x = activate(&pre, layer.activation, layer.prelu_alpha);
        }
        Ok(x)
    }

    /// Batched forward pass in train mode: batch-norm layers normalize by
    /// batch statistics and update running statistics in place.
    pub fn forward_batch_train(&mut self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NetsError> {
        let has_bn = self.layers.iter().any(|l| l.batch_norm.is_some());
        if has_bn && inputs.len() < 2 {
            return Err(NetsError::BatchTooSmall(inputs.len()));
        }
        for input in inputs {
            if input.len() != self.in_width() {
                return Err(NetsError::InputWidth {
                    expected: self.in_width(),
                    got: input.len(),
                });
            }
        }
        let mut batch: Vec<Vec<f64>> = inputs.to_vec();
        for layer in &mut self.layers {
            for x in &mut batch {
                *x = affine(&layer.weight, x, &layer.bias).expect("validated shapes");
            }
            if let Some(bn) = &mut layer.batch_norm {
                batch = batchnorm_forward(bn, &batch, ForwardMode::TrainBatch)?;
            }
            for x in &mut batch {
                *x = activate(x, layer.activation, layer.prelu_alpha);
            }
        }
        Ok(batch)
    }
}

pub fn prelu(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        alpha * x
    }
}

fn activate(pre: &[f64], activation: Activation, alpha: Option<f64>) -> Vec<f64> {
    match activation {
        Activation::Linear => pre.to_vec(),
        Activation::Relu => pre.iter().map(|&v| v.max(0.0)).collect(),
        Activation::Prelu => {
            let a = alpha.expect("validated: prelu slope present");
            pre.iter().map(|&v| prelu(v, a)).collect()
        }
    }
}

/// Normalizes a batch of pre-activations per unit. Train mode uses batch
/// statistics (biased variance) and updates running statistics with momentum;
/// the running variance update uses the unbiased estimate. Inference mode
/// normalizes by running statistics and leaves the block unchanged.
pub fn batchnorm_forward(
    bn: &mut BatchNorm,
    batch: &[Vec<f64>],
    mode: ForwardMode,
) -> Result<Vec<Vec<f64>>, NetsError> {
    let w = bn.width();
    match mode {
        ForwardMode::Inference => Ok(batch
            .iter()
            .map(|x| {
                (0..w)
                    .map(|j| {
                        bn.gamma[j] * (x[j] - bn.running_mean[j])
                            / (bn.running_var[j] + bn.epsilon).sqrt()
                            + bn.beta[j]
                    })
                    .collect()
            })
            .collect()),
        ForwardMode::TrainBatch => {
            let n = batch.len();
            if n < 2 {
                return Err(NetsError::BatchTooSmall(n));
            }
            let nf = n as f64;
            let mut mean = vec![0.0; w];
            for x in batch {
                for j in 0..w {
                    mean[j] += x[j];
                }
            }
            for m in &mut mean {
                *m /= nf;
            }
            let mut var = vec![0.0; w];
            for x in batch {
                for j in 0..w {
                    let d = x[j] - mean[j];
                    var[j] += d * d;
                }
            }
            for v in &mut var {
                *v /= nf;
            }
            let out = batch
                .iter()
                .map(|x| {
                    (0..w)
                        .map(|j| {
                            bn.gamma[j] * (x[j] - mean[j]) / (var[j] + bn.epsilon).sqrt()
                                + bn.beta[j]
                        })
                        .collect()
                })
                .collect();
            let unbias = nf / (nf - 1.0);
            for j in 0..w {
                bn.running_mean[j] = (1.0 - bn.momentum) * bn.running_mean[j] + bn.momentum * mean[j];
                bn.running_var[j] =
                    (1.0 - bn.momentum) * bn.running_var[j] + bn.momentum * var[j] * unbias;
            }
            Ok(out)
        }
    }
}

/// Builds an MLP with the given widths. Hidden layers use `hidden_activation`
/// (PReLU slopes initialized to 0.25) and, if requested, fresh identity
/// batch-norm blocks; the output layer is linear. Weights are sampled
/// uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases start at zero.
pub fn init_mlp(
    widths: &[usize],
    hidden_activation: Activation,
    batch_norm: bool,
    seed: u64,
) -> MlpParams {
    assert!(widths.len() >= 2, "need at least input and output widths");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for i in 0..widths.len() - 1 {
        let (fan_in, fan_out) = (widths[i], widths[i + 1]);
        let bound = 1.0 / (fan_in as f64).sqrt();
        let data: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        let last = i == widths.len() - 2;
        let activation = if last { Activation::Linear } else { hidden_activation };
        layers.push(Layer {
            weight: DenseMatrix::new(fan_out, fan_in, data).expect("finite init"),
            bias: vec![0.0; fan_out],
            activation,
            prelu_alpha: (activation == Activation::Prelu).then_some(PRELU_INIT_SLOPE),
            batch_norm: (!last && batch_norm).then(|| BatchNorm::identity(fan_out)),
        });
    }
    let mlp = MlpParams { layers };
    mlp.validate().expect("construction is consistent");
    mlp
}

/// Inserts a new hidden layer directly before the output layer that computes
/// the identity map: identity weights, zero bias, PReLU slope 1, and (if the
/// net uses batch norm) gamma=1, beta=0 with running statistics chosen so the
/// normalization is exactly the identity. Inference outputs are unchanged.
pub fn deepen_identity(mlp: &mut MlpParams) {
    let pos = mlp.layers.len() - 1;
    let width = mlp.layers[pos].in_width();
    let uses_bn = mlp.layers[..pos].iter().any(|l| l.batch_norm.is_some());
    let batch_norm = uses_bn.then(|| {
        let mut bn = BatchNorm::identity(width);
        // sqrt(running_var + epsilon) must equal 1 exactly.
        bn.running_var = vec![1.0 - bn.epsilon; width];
        bn
    });
    mlp.layers.insert(
        pos,
        Layer {
            weight: DenseMatrix::identity(width),
            bias: vec![0.0; width],
            activation: Activation::Prelu,
            prelu_alpha: Some(1.0),
            batch_norm,
        },
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn relu_pair_identity() {
        // x = relu(x) - relu(-x) for all x
        for &x in &[-2.5, -0.1, 0.0, 0.3, 7.0] {
            assert_eq!(x, f64::max(x, 0.0) - f64::max(-x, 0.0));
        }
    }

    #[test]
    fn batchnorm_centers_constant_batch() {
        let mut bn = BatchNorm::identity(1);
        let out = batchnorm_forward(&mut bn, &[vec![3.0], vec![3.0]], ForwardMode::TrainBatch)
            .unwrap();
        assert_relative_eq!(out[0][0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(out[1][0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn batchnorm_affine_on_standardized_batch() {
        let mut bn = BatchNorm::identity(1);
        bn.gamma = vec![2.0];
        bn.beta = vec![1.0];
        // Batch {-1, 1} has mean 0, biased variance 1.
        let out = batchnorm_forward(&mut bn, &[vec![-1.0], vec![1.0]], ForwardMode::TrainBatch)
            .unwrap();
        let xhat = 1.0 / (1.0 + bn.epsilon).sqrt();
        assert_relative_eq!(out[0][0], 2.0 * -xhat + 1.0, epsilon = 1e-12);
        assert_relative_eq!(out[1][0], 2.0 * xhat + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn batchnorm_rejects_singleton_train_batch() {
        let mut bn = BatchNorm::identity(1);
        assert!(matches!(
            batchnorm_forward(&mut bn, &[vec![1.0]], ForwardMode::TrainBatch),
            Err(NetsError::BatchTooSmall(1))
        ));
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_mlp(&[3, 5, 2], Activation::Prelu, true, 7);
        let b = init_mlp(&[3, 5, 2], Activation::Prelu, true, 7);
        assert_eq!(a, b);
        let c = init_mlp(&[3, 5, 2], Activation::Prelu, true, 8);
        assert_ne!(a, c);
        let bound = 1.0 / 3.0_f64.sqrt();
        assert!(a.layers[0].weight.data().iter().all(|w| w.abs() < bound));
        assert!(a.layers[0].bias.iter().all(|&b| b == 0.0));
        assert_eq!(a.layers[0].prelu_alpha, Some(PRELU_INIT_SLOPE));
        assert_eq!(a.layers[1].activation, Activation::Linear);
        assert!(a.layers[1].batch_norm.is_none());
    }

    #[test]
    fn flatten_roundtrip() {
        let mut mlp = init_mlp(&[2, 4, 1], Activation::Prelu, true, 3);
        let flat = mlp.flatten();
        assert_eq!(flat.len(), mlp.param_count());
        let mut perturbed: Vec<f64> = flat.iter().map(|v| v + 0.5).collect();
        mlp.unflatten(&perturbed).unwrap();
        assert_eq!(mlp.flatten(), perturbed);
        perturbed.push(0.0);
        assert!(mlp.unflatten(&perturbed).is_err());
    }

    #[test]
    fn deepen_identity_preserves_inference_output() {
        let mut mlp = init_mlp(&[3, 6, 2], Activation::Prelu, true, 11);
        // Move running stats off the init values so the test is not trivially
        // about fresh identity blocks.
        mlp.forward_batch_train(&[vec![0.3, -0.2, 0.9], vec![-1.0, 0.4, 0.1]])
            .unwrap();
        let input = vec![0.5, -0.7, 0.2];
        let before = mlp.forward_inference(&input).unwrap();
        deepen_identity(&mut mlp);
        mlp.validate().unwrap();
        assert_eq!(mlp.layers.len(), 3);
        let after = mlp.forward_inference(&input).unwrap();
        for (b, a) in before.iter().zip(&after) {
            assert!((b - a).abs() < 1e-12, "identity deepening drifted: {b} vs {a}");
        }
    }

    #[test]
    fn inference_linear_layer_is_affine() {
        let mlp = MlpParams {
            layers: vec![Layer {
                weight: DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
                bias: vec![1.0, 0.0],
                activation: Activation::Linear,
                prelu_alpha: None,
                batch_norm: None,
            }],
        };
        assert_eq!(mlp.forward_inference(&[1.0, 1.0]).unwrap(), vec![4.0, 7.0]);
    }

    #[test]
    fn batchnorm_running_stats_update() {
        let mut bn = BatchNorm::identity(1);
        batchnorm_forward(&mut bn, &[vec![-1.0], vec![1.0], vec![3.0]], ForwardMode::TrainBatch)
            .unwrap();
        // mean 1, biased var 8/3, unbiased var 4
        assert_relative_eq!(bn.running_mean[0], 0.9 * 0.0 + 0.1 * 1.0, epsilon = 1e-12);
        assert_relative_eq!(bn.running_var[0], 0.9 * 1.0 + 0.1 * 4.0, epsilon = 1e-12);
    }
}
