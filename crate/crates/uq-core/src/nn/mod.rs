//! Feed-forward networks with reverse-mode gradients.
//!
//! The model type here is intentionally small: dense layers, tanh or
//! relu activations, inverted dropout on the hidden layers, and a
//! linear head of one or two outputs. Training support comes from the
//! [`graph`] tape (automatic differentiation) and the [`adam`]
//! optimizer; everything runs in `f64`.
//!
//! Determinism is a hard requirement throughout: weight init, dropout
//! masks, and batch order are all driven by explicit seeds, so a run
//! with the same seed reproduces the same trajectory bit for bit.

pub mod adam;
pub mod graph;
pub mod matrix;

pub use adam::{AdamConfig, AdamState, Gradients, LayerGrads};
pub use graph::{Graph, NodeId};
pub use matrix::Matrix;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Errors from model construction, the tape, the optimizer, and
/// checkpoint I/O.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("input has width {got} but the network expects {expected}")]
    InputDimMismatch { expected: usize, got: usize },
    #[error("backward requires a scalar loss node, got a {rows}x{cols} value")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("non-finite gradient at parameter {index} (layer {layer}); aborting the update")]
    NonFiniteGradient { layer: usize, index: usize },
    #[error("checkpoint I/O failed: {0}")]
    CheckpointIo(#[from] std::io::Error),
    #[error("checkpoint is not valid JSON: {0}")]
    CheckpointFormat(#[from] serde_json::Error),
    #[error("checkpoint version {got} is not supported (expected {expected})")]
    CheckpointVersion { expected: u32, got: u32 },
    #[error("checkpoint holds {got} parameters but the spec implies {expected}")]
    CheckpointShape { expected: usize, got: usize },
}

/// Hidden-layer activation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }
}

/// Architecture of a small dense network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    /// 1 for a point head, 2 for a mean + log-variance head.
    pub output_dim: usize,
    /// Probability of zeroing a hidden unit during a dropout-active
    /// forward pass. Survivors are scaled by `1 / (1 - rate)` so the
    /// expected activation is unchanged.
    pub dropout_rate: f64,
    pub activation: Activation,
}

impl MlpSpec {
    /// The default desk-scale architecture: hidden layers `[64, 32]`,
    /// dropout 0.15, tanh.
    pub fn standard(input_dim: usize, output_dim: usize) -> Self {
        MlpSpec {
            input_dim,
            hidden_sizes: vec![64, 32],
            output_dim,
            dropout_rate: 0.15,
            activation: Activation::Tanh,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_dim == 0 {
            return Err(NnError::InvalidSpec("input_dim must be at least 1".into()));
        }
        if let Some(&h) = self.hidden_sizes.iter().find(|&&h| h == 0) {
            return Err(NnError::InvalidSpec(format!("hidden layer of size {h} is not allowed")));
        }
        if self.output_dim != 1 && self.output_dim != 2 {
            return Err(NnError::InvalidSpec(format!(
                "output_dim must be 1 or 2, got {}",
                self.output_dim
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) || !self.dropout_rate.is_finite() {
            return Err(NnError::InvalidSpec(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Layer widths from input to output, e.g. `[8, 64, 32, 2]`.
    pub fn layer_widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_sizes.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden_sizes);
        w.push(self.output_dim);
        w
    }

    /// Total number of scalar parameters (weights and biases).
    pub fn param_count(&self) -> usize {
        self.layer_widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// One dense layer: `weights` is `in x out`, `bias` is `1 x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Matrix,
}

/// How a forward pass treats dropout.
#[derive(Clone, Copy, Debug)]
pub enum DropoutMode {
    /// Deterministic pass; masks are skipped entirely.
    Inactive,
    /// Stochastic pass with masks drawn from the given seed. The same
    /// seed always produces the same masks.
    Active { seed: u64 },
}

/// A dense feed-forward network.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Layer>,
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    spec: MlpSpec,
    /// All parameters flattened layer by layer: weights row-major,
    /// then bias.
    params: Vec<f64>,
}

impl Mlp {
    /// Initialize with uniform weights in `±sqrt(6 / (fan_in + fan_out))`
    /// and zero biases. The same seed yields identical weights.
    pub fn init(spec: MlpSpec, seed: u64) -> Result<Self, NnError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = spec.layer_widths();
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)).collect();
            layers.push(Layer {
                weights: Matrix::from_vec(fan_in, fan_out, data),
                bias: Matrix::zeros(1, fan_out),
            });
        }
        Ok(Mlp { spec, layers })
    }

    /// All-zero parameters. Useful as a fixed point in tests.
    pub fn zeros(spec: MlpSpec) -> Result<Self, NnError> {
        spec.validate()?;
        let widths = spec.layer_widths();
        let layers = widths
            .windows(2)
            .map(|w| Layer { weights: Matrix::zeros(w[0], w[1]), bias: Matrix::zeros(1, w[1]) })
            .collect();
        Ok(Mlp { spec, layers })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Dropout masks for a batch of `rows` examples, one matrix per
    /// hidden layer. Entries are `0` (dropped) or `1 / (1 - rate)`.
    /// With rate 0 every entry is exactly `1`.
    fn dropout_masks(&self, rows: usize, seed: u64) -> Vec<Matrix> {
        let rate = self.spec.dropout_rate;
        let scale = 1.0 / (1.0 - rate);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.spec
            .hidden_sizes
            .iter()
            .map(|&h| {
                let data = (0..rows * h)
                    .map(|_| if rate > 0.0 && rng.gen::<f64>() < rate { 0.0 } else { scale })
                    .collect();
                Matrix::from_vec(rows, h, data)
            })
            .collect()
    }

    /// Plain forward pass; no tape, no gradients. Rows of `input` are
    /// independent examples.
    pub fn forward(&self, input: &Matrix, mode: DropoutMode) -> Result<Matrix, NnError> {
        if input.cols() != self.spec.input_dim {
            return Err(NnError::InputDimMismatch { expected: self.spec.input_dim, got: input.cols() });
        }
        let masks = match mode {
            DropoutMode::Inactive => None,
            DropoutMode::Active { seed } => Some(self.dropout_masks(input.rows(), seed)),
        };
        let last = self.layers.len() - 1;
        let mut h = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = h.matmul(&layer.weights).add_row_broadcast(&layer.bias);
            if i < last {
                h = h.map(|x| self.spec.activation.apply(x));
                if let Some(masks) = &masks {
                    h = h.zip(&masks[i], |a, m| a * m);
                }
            }
        }
        Ok(h)
    }

    /// Forward pass recorded on a tape, for training. Returns the
    /// output node and the parameter nodes in checkpoint order
    /// (`w0, b0, w1, b1, ...`). Uses the exact same mask derivation as
    /// [`Mlp::forward`], so both paths agree bit for bit.
    pub fn forward_graph(
        &self,
        g: &mut Graph,
        input: &Matrix,
        mode: DropoutMode,
    ) -> Result<(NodeId, Vec<NodeId>), NnError> {
        if input.cols() != self.spec.input_dim {
            return Err(NnError::InputDimMismatch { expected: self.spec.input_dim, got: input.cols() });
        }
        let masks = match mode {
            DropoutMode::Inactive => None,
            DropoutMode::Active { seed } => Some(self.dropout_masks(input.rows(), seed)),
        };
        let last = self.layers.len() - 1;
        let mut params = Vec::with_capacity(self.layers.len() * 2);
        let mut h = g.constant(input.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let w = g.param(layer.weights.clone());
            let b = g.param(layer.bias.clone());
            params.push(w);
            params.push(b);
            let z = g.matmul(h, w);
            h = g.add_row(z, b);
            if i < last {
                h = match self.spec.activation {
                    Activation::Tanh => g.tanh(h),
                    Activation::Relu => g.relu(h),
                };
                if let Some(masks) = &masks {
                    let m = g.constant(masks[i].clone());
                    h = g.mul(h, m);
                }
            }
        }
        Ok((h, params))
    }

    /// Collect gradients for the parameter nodes returned by
    /// [`Mlp::forward_graph`], in layer order.
    pub fn collect_gradients(&self, g: &Graph, params: &[NodeId]) -> Gradients {
        assert_eq!(params.len(), self.layers.len() * 2, "parameter node list out of sync");
        let layers = params
            .chunks(2)
            .map(|pair| LayerGrads { weights: g.grad(pair[0]).clone(), bias: g.grad(pair[1]).clone() })
            .collect();
        Gradients { layers }
    }

    /// All parameters flattened in checkpoint order.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.spec.param_count());
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.data());
            out.extend_from_slice(layer.bias.data());
        }
        out
    }

    /// Overwrite all parameters from a flat buffer in checkpoint order.
    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<(), NnError> {
        if flat.len() != self.spec.param_count() {
            return Err(NnError::CheckpointShape { expected: self.spec.param_count(), got: flat.len() });
        }
        let mut off = 0;
        for layer in &mut self.layers {
            let wn = layer.weights.data().len();
            layer.weights.data_mut().copy_from_slice(&flat[off..off + wn]);
            off += wn;
            let bn = layer.bias.data().len();
            layer.bias.data_mut().copy_from_slice(&flat[off..off + bn]);
            off += bn;
        }
        Ok(())
    }

    /// Write spec and parameters as JSON. `f64` values survive the trip
    /// exactly — JSON numbers are printed with enough digits to
    /// round-trip.
    pub fn save_checkpoint(&self, path: &Path) -> Result<(), NnError> {
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            spec: self.spec.clone(),
            params: self.params_flat(),
        };
        let json = serde_json::to_string(&file)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    /// Load a checkpoint written by [`Mlp::save_checkpoint`].
    pub fn load_checkpoint(path: &Path) -> Result<Self, NnError> {
        let raw = std::fs::read_to_string(path)?;
        let file: CheckpointFile = serde_json::from_str(&raw)?;
        if file.version != CHECKPOINT_VERSION {
            return Err(NnError::CheckpointVersion { expected: CHECKPOINT_VERSION, got: file.version });
        }
        let mut model = Mlp::zeros(file.spec)?;
        model.set_params_flat(&file.params)?;
        Ok(model)
    }
}

/// Derive an independent RNG stream from a base seed and a stream
/// index (ensemble member, sampling pass, batch step, ...). SplitMix64
/// finalization keeps nearby indices statistically unrelated.
pub fn derive_stream(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
