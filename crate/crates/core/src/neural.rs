//! From-scratch feed-forward network: log-sigmoid hidden layers, softmax
//! output, mean-squared-error loss, exact backpropagation, and full-batch
//! BFGS training.

use std::io::{Read, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bfgs::{self, BfgsConfig, LineSearch};
use crate::dataset::{DataRecord, Scaler};
use crate::kinetics::GasComposition;
use crate::par;

pub const INPUT_DIM: usize = 5;
pub const OUTPUT_DIM: usize = 4;
const MODEL_SCHEMA_VERSION: u32 = 1;

/// Search ranges advertised for the learning rate; values outside are
/// accepted with a warning.
pub const LEARNING_RATE_RANGE: (f64, f64) = (1e-4, 1e-1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Hidden layer widths, e.g. `[6, 8, 6]`.
    pub hidden_sizes: Vec<usize>,
    /// Initial line-search trial step of the quasi-Newton trainer.
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Consecutive validation-loss increases tolerated before stopping;
    /// `None` disables validation-based stopping.
    pub patience: Option<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden_sizes: vec![6, 8, 6],
            learning_rate: 0.001,
            max_epochs: 20_000,
            seed: 42,
            patience: None,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.iter().any(|&s| s == 0) {
            return Err(NeuralError::InvalidConfig(format!(
                "hidden sizes must be nonempty positive integers, got {:?}",
                self.hidden_sizes
            )));
        }
        if self.max_epochs == 0 {
            return Err(NeuralError::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.learning_rate < LEARNING_RATE_RANGE.0 || self.learning_rate > LEARNING_RATE_RANGE.1 {
            log::warn!(
                "learning rate {} outside the usual search range [{}, {}]",
                self.learning_rate,
                LEARNING_RATE_RANGE.0,
                LEARNING_RATE_RANGE.1
            );
        }
        Ok(())
    }
}

/// Dense layer; `weights[i * output_size + j]` connects input `i` to unit `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub input_size: usize,
    pub output_size: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Feed-forward network with the input scaler baked in at save time.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub hidden_sizes: Vec<usize>,
    pub layers: Vec<Layer>,
    pub scaler: Scaler,
    pub seed: u64,
    pub train_epochs: usize,
}

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("dataset is empty")]
    EmptyData,
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("model file schema version {found}, this build reads version {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("model file malformed: {0}")]
    ModelFormat(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Seeded Glorot-uniform initialization: every weight and bias of a layer is
/// drawn from `±sqrt(6/(fan_in + fan_out))`.
pub fn init(config: &NetworkConfig, scaler: Scaler) -> Result<Network, NeuralError> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut sizes = vec![INPUT_DIM];
    sizes.extend(&config.hidden_sizes);
    sizes.push(OUTPUT_DIM);

    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for pair in sizes.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut draw = || rng.random_range(-bound..bound);
        let weights = (0..fan_in * fan_out).map(|_| draw()).collect();
        let biases = (0..fan_out).map(|_| draw()).collect();
        layers.push(Layer {
            input_size: fan_in,
            output_size: fan_out,
            weights,
            biases,
        });
    }
    Ok(Network {
        hidden_sizes: config.hidden_sizes.clone(),
        layers,
        scaler,
        seed: config.seed,
        train_epochs: 0,
    })
}

fn logsig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Numerically stable softmax (max subtraction) with a final renormalization
/// so the outputs sum to one exactly up to rounding.
fn softmax(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
    let total: f64 = z.iter().sum();
    for v in z.iter_mut() {
        *v /= total;
    }
}

/// Per-thread workspace: activation and delta buffers plus the gradient
/// accumulator, sized once per chunk.
struct Scratch {
    activations: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    grad: Vec<f64>,
    sse: f64,
}

impl Scratch {
    fn new(net: &Network) -> Scratch {
        let mut activations = vec![vec![0.0; INPUT_DIM]];
        for layer in &net.layers {
            activations.push(vec![0.0; layer.output_size]);
        }
        let deltas = net.layers.iter().map(|l| vec![0.0; l.output_size]).collect();
        Scratch {
            activations,
            deltas,
            grad: vec![0.0; param_count(net)],
            sse: 0.0,
        }
    }
}

/// One normalized training sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub inputs: [f64; INPUT_DIM],
    pub target: [f64; OUTPUT_DIM],
}

/// Normalize records through `scaler` into training samples.
pub fn samples_from_records(records: &[DataRecord], scaler: &Scaler) -> Vec<Sample> {
    records
        .iter()
        .map(|r| Sample {
            inputs: scaler.apply(r.inputs()),
            target: r.target.as_array(),
        })
        .collect()
}

fn forward_into(net: &Network, inputs: &[f64], activations: &mut [Vec<f64>]) {
    activations[0].copy_from_slice(inputs);
    let n_layers = net.layers.len();
    for (l, layer) in net.layers.iter().enumerate() {
        let (lower, upper) = activations.split_at_mut(l + 1);
        let input = &lower[l];
        let output = &mut upper[0];
        for (j, out) in output.iter_mut().enumerate() {
            let mut z = layer.biases[j];
            for (i, &a) in input.iter().enumerate() {
                z += a * layer.weights[i * layer.output_size + j];
            }
            *out = z;
        }
        if l + 1 < n_layers {
            for v in output.iter_mut() {
                *v = logsig(*v);
            }
        } else {
            softmax(output);
        }
    }
}

/// Network output for normalized inputs in `[0, 1]`.
pub fn forward(net: &Network, inputs: &[f64; INPUT_DIM]) -> [f64; OUTPUT_DIM] {
    let mut activations: Vec<Vec<f64>> = Vec::with_capacity(net.layers.len() + 1);
    activations.push(vec![0.0; INPUT_DIM]);
    for layer in &net.layers {
        activations.push(vec![0.0; layer.output_size]);
    }
    forward_into(net, inputs, &mut activations);
    let last = activations.last().unwrap();
    [last[0], last[1], last[2], last[3]]
}

/// Prediction from raw (unnormalized) inputs via the embedded scaler.
/// Returns the composition and whether the point was inside the training
/// hull.
pub fn predict_raw(net: &Network, raw: [f64; INPUT_DIM]) -> (GasComposition, bool) {
    let in_hull = net.scaler.contains(raw);
    let outputs = forward(net, &net.scaler.apply(raw));
    (GasComposition::from_array(outputs), in_hull)
}

/// Accumulate one record's squared error and raw gradient into the scratch.
fn accumulate_record(net: &Network, sample: &Sample, scratch: &mut Scratch) {
    forward_into(net, &sample.inputs, &mut scratch.activations);
    let n_layers = net.layers.len();
    let outputs = &scratch.activations[n_layers];

    // d(SSE)/dy and the softmax Jacobian product in one pass.
    let mut g = [0.0; OUTPUT_DIM];
    let mut weighted = 0.0;
    for k in 0..OUTPUT_DIM {
        let diff = outputs[k] - sample.target[k];
        scratch.sse += diff * diff;
        g[k] = 2.0 * diff;
        weighted += g[k] * outputs[k];
    }
    for j in 0..OUTPUT_DIM {
        scratch.deltas[n_layers - 1][j] = outputs[j] * (g[j] - weighted);
    }

    // Backwards through the hidden layers.
    for l in (0..n_layers - 1).rev() {
        let layer_above = &net.layers[l + 1];
        let (lower, upper) = scratch.deltas.split_at_mut(l + 1);
        let delta_here = &mut lower[l];
        let delta_above = &upper[0];
        let activation = &scratch.activations[l + 1];
        for i in 0..layer_above.input_size {
            let mut sum = 0.0;
            for (j, d) in delta_above.iter().enumerate() {
                sum += layer_above.weights[i * layer_above.output_size + j] * d;
            }
            let a = activation[i];
            delta_here[i] = sum * a * (1.0 - a);
        }
    }

    // Parameter gradient, laid out to match `flatten`.
    let mut offset = 0;
    for (l, layer) in net.layers.iter().enumerate() {
        let input = &scratch.activations[l];
        let delta = &scratch.deltas[l];
        for (i, &a) in input.iter().enumerate() {
            let row = offset + i * layer.output_size;
            for (j, &d) in delta.iter().enumerate() {
                scratch.grad[row + j] += a * d;
            }
        }
        offset += layer.weights.len();
        for (j, &d) in delta.iter().enumerate() {
            scratch.grad[offset + j] += d;
        }
        offset += layer.biases.len();
    }
}

fn reduce_scratch(net: &Network, samples: &[Sample], sequential: bool) -> (f64, Vec<f64>) {
    let make = || Scratch::new(net);
    let fold = |acc: &mut Scratch, sample: &Sample| accumulate_record(net, sample, acc);
    let combine = |acc: &mut Scratch, part: Scratch| {
        acc.sse += part.sse;
        for (a, p) in acc.grad.iter_mut().zip(&part.grad) {
            *a += *p;
        }
    };
    let total = if sequential {
        par::fold_chunks_seq(samples, make, fold, combine)
    } else {
        par::fold_chunks(samples, make, fold, combine)
    };
    let scale = 1.0 / (OUTPUT_DIM * samples.len()) as f64;
    let mut grad = total.grad;
    for g in &mut grad {
        *g *= scale;
    }
    (total.sse * scale, grad)
}

/// Mean squared error over records and output components.
pub fn loss(net: &Network, samples: &[Sample]) -> Result<f64, NeuralError> {
    if samples.is_empty() {
        return Err(NeuralError::EmptyData);
    }
    Ok(reduce_scratch(net, samples, false).0)
}

/// Exact analytic gradient of [`loss`], flattened per [`flatten`].
pub fn gradient(net: &Network, samples: &[Sample]) -> Result<Vec<f64>, NeuralError> {
    if samples.is_empty() {
        return Err(NeuralError::EmptyData);
    }
    Ok(reduce_scratch(net, samples, false).1)
}

/// Loss and gradient in one pass (what the trainer evaluates).
pub fn loss_and_gradient(net: &Network, samples: &[Sample]) -> Result<(f64, Vec<f64>), NeuralError> {
    if samples.is_empty() {
        return Err(NeuralError::EmptyData);
    }
    Ok(reduce_scratch(net, samples, false))
}

/// Sequential twin of [`loss_and_gradient`] (identical bits); benchmark
/// baseline.
pub fn loss_and_gradient_seq(net: &Network, samples: &[Sample]) -> Result<(f64, Vec<f64>), NeuralError> {
    if samples.is_empty() {
        return Err(NeuralError::EmptyData);
    }
    Ok(reduce_scratch(net, samples, true))
}

pub fn param_count(net: &Network) -> usize {
    net.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
}

/// Flatten parameters: per layer, weights row-major then biases.
pub fn flatten(net: &Network) -> Vec<f64> {
    let mut out = Vec::with_capacity(param_count(net));
    for layer in &net.layers {
        out.extend_from_slice(&layer.weights);
        out.extend_from_slice(&layer.biases);
    }
    out
}

/// Inverse of [`flatten`].
pub fn unflatten_into(net: &mut Network, params: &[f64]) {
    debug_assert_eq!(params.len(), param_count(net));
    let mut offset = 0;
    for layer in &mut net.layers {
        let w = layer.weights.len();
        layer.weights.copy_from_slice(&params[offset..offset + w]);
        offset += w;
        let b = layer.biases.len();
        layer.biases.copy_from_slice(&params[offset..offset + b]);
        offset += b;
    }
}

/// Why training stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainStop {
    MaxEpochs,
    Patience,
    LineSearchFailure,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Accepted training loss per epoch (one epoch = one accepted
    /// quasi-Newton update).
    pub train_loss: Vec<f64>,
    /// Validation loss per epoch; empty when no validation set was given.
    pub val_loss: Vec<f64>,
    pub stop: TrainStop,
    pub epochs: usize,
    pub wall_time: Duration,
}

/// Full-batch BFGS training.
///
/// The inverse-Hessian approximation starts at the identity; the strong-Wolfe
/// line search (c1 = 1e-4, c2 = 0.9) takes `learning_rate` as its first trial
/// step and unit steps afterwards. Stops at `max_epochs`, after `patience`
/// consecutive validation-loss increases (when enabled), or when the line
/// search cannot make progress.
pub fn train_bfgs(
    net: Network,
    train: &[Sample],
    val: &[Sample],
    config: &NetworkConfig,
) -> Result<(Network, TrainReport), NeuralError> {
    config.validate()?;
    if train.is_empty() {
        return Err(NeuralError::EmptyData);
    }
    let start = Instant::now();
    let mut scratch_net = net.clone();
    let objective = |params: &[f64]| -> (f64, Vec<f64>) {
        unflatten_into(&mut scratch_net, params);
        loss_and_gradient(&scratch_net, train).expect("train set verified nonempty")
    };

    let mut val_net = net.clone();
    let mut train_loss = Vec::new();
    let mut val_loss = Vec::new();
    let mut rising_streak = 0usize;
    let mut stop = TrainStop::MaxEpochs;

    let bfgs_config = BfgsConfig {
        max_iterations: config.max_epochs,
        initial_step: config.learning_rate,
        c1: 1e-4,
        c2: 0.9,
        curvature_tol: 1e-10,
    };
    let outcome = bfgs::minimize(
        objective,
        flatten(&net),
        &bfgs_config,
        LineSearch::StrongWolfe,
        |_, value, params| {
            train_loss.push(value);
            if !val.is_empty() {
                unflatten_into(&mut val_net, params);
                let v = loss(&val_net, val).expect("validation set nonempty");
                let prev = val_loss.last().copied();
                val_loss.push(v);
                if let (Some(limit), Some(prev)) = (config.patience, prev) {
                    if v > prev {
                        rising_streak += 1;
                        if rising_streak >= limit {
                            stop = TrainStop::Patience;
                            return false;
                        }
                    } else {
                        rising_streak = 0;
                    }
                }
            }
            true
        },
    );

    match outcome.stop {
        bfgs::StopReason::NonFinite => {
            return Err(NeuralError::NonFiniteLoss {
                epoch: outcome.iterations,
            })
        }
        bfgs::StopReason::LineSearchFailure => stop = TrainStop::LineSearchFailure,
        bfgs::StopReason::MaxIterations => stop = TrainStop::MaxEpochs,
        bfgs::StopReason::Callback => {} // patience already recorded
    }

    let mut trained = net;
    unflatten_into(&mut trained, &outcome.x);
    trained.train_epochs = outcome.iterations;
    Ok((
        trained,
        TrainReport {
            train_loss,
            val_loss,
            stop,
            epochs: outcome.iterations,
            wall_time: start.elapsed(),
        },
    ))
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    hidden_sizes: Vec<usize>,
    scaler: Scaler,
    layers: Vec<LayerFile>,
    seed: u64,
    train_epochs: usize,
}

/// Serialize the network as a structured text document (JSON). Floats use
/// shortest round-trip formatting, so save/load is bit-exact on parameters.
pub fn save_model<W: Write>(net: &Network, out: &mut W) -> Result<(), NeuralError> {
    let file = ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        hidden_sizes: net.hidden_sizes.clone(),
        scaler: net.scaler.clone(),
        layers: net
            .layers
            .iter()
            .map(|l| LayerFile {
                weights: l.weights.clone(),
                biases: l.biases.clone(),
            })
            .collect(),
        seed: net.seed,
        train_epochs: net.train_epochs,
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| NeuralError::ModelFormat(e.to_string()))?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn save_model_to_path(net: &Network, path: &Path) -> Result<(), NeuralError> {
    let mut file = std::fs::File::create(path)?;
    save_model(net, &mut file)
}

pub fn load_model<R: Read>(input: &mut R) -> Result<Network, NeuralError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    // Surface a version mismatch as such even if the rest of the schema
    // evolved, before full deserialization.
    let probe: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| NeuralError::ModelFormat(e.to_string()))?;
    let found = probe
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| NeuralError::ModelFormat("missing schema_version".into()))? as u32;
    if found != MODEL_SCHEMA_VERSION {
        return Err(NeuralError::SchemaVersion {
            found,
            expected: MODEL_SCHEMA_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| NeuralError::ModelFormat(e.to_string()))?;

    let mut sizes = vec![INPUT_DIM];
    sizes.extend(&file.hidden_sizes);
    sizes.push(OUTPUT_DIM);
    if file.layers.len() + 1 != sizes.len() {
        return Err(NeuralError::ModelFormat(format!(
            "expected {} layers for hidden sizes {:?}, found {}",
            sizes.len() - 1,
            file.hidden_sizes,
            file.layers.len()
        )));
    }
    let mut layers = Vec::with_capacity(file.layers.len());
    for (idx, (pair, layer)) in sizes.windows(2).zip(file.layers).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        if layer.weights.len() != fan_in * fan_out || layer.biases.len() != fan_out {
            return Err(NeuralError::ModelFormat(format!(
                "layer {idx} shape mismatch: expected {fan_in}x{fan_out}"
            )));
        }
        if layer.weights.iter().chain(&layer.biases).any(|v| !v.is_finite()) {
            return Err(NeuralError::ModelFormat(format!("layer {idx} has non-finite parameters")));
        }
        layers.push(Layer {
            input_size: fan_in,
            output_size: fan_out,
            weights: layer.weights,
            biases: layer.biases,
        });
    }
    Ok(Network {
        hidden_sizes: file.hidden_sizes,
        layers,
        scaler: file.scaler,
        seed: file.seed,
        train_epochs: file.train_epochs,
    })
}

pub fn load_model_from_path(path: &Path) -> Result<Network, NeuralError> {
    let mut file = std::fs::File::open(path)?;
    load_model(&mut file)
}
