//! Forward-only inference for the acoustic network: a strided 2-D
//! convolution over the spectrogram, a stack of unidirectional gated
//! recurrent layers, and an affine projection with a per-frame softmax over
//! the alphabet.
//!
//! The whole-utterance and incremental paths share one step kernel, so
//! chunked evaluation reproduces batch evaluation exactly. Arithmetic is
//! 32-bit floats throughout, matching the weight storage; posterior rows
//! are widened to f64 on output.

pub mod io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::alphabet::{Alphabet, AlphabetError};
use crate::features::Spectrogram;
use crate::posterior::{PosteriorError, PosteriorMatrix};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("tensor {name} has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("unexpected tensor {0}")]
    UnexpectedTensor(String),
    #[error("input has {got} frames, need at least {need} for one convolution window")]
    TooFewFrames { got: usize, need: usize },
    #[error("input has {got} frequency bins, model expects {expected}")]
    BinCountMismatch { got: usize, expected: usize },
    #[error("recurrent state does not belong to this model")]
    StateMismatch,
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated model file while reading {0}")]
    Truncated(&'static str),
    #[error("malformed model header: {0}")]
    HeaderSyntax(String),
    #[error("malformed alphabet: {0}")]
    Alphabet(#[from] AlphabetError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Architecture hyperparameters. Defaults follow the deployed topology:
/// an 11x32 convolution with 32 filters and stride 3 on both axes, three
/// recurrent layers of 256 units, 129 spectrogram bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub conv_filter_time: usize,
    pub conv_filter_freq: usize,
    pub conv_filters: usize,
    pub conv_stride_time: usize,
    pub conv_stride_freq: usize,
    pub num_recurrent_layers: usize,
    pub hidden_size: usize,
    pub input_bins: usize,
    pub alphabet: Alphabet,
}

impl ModelConfig {
    pub fn with_alphabet(alphabet: Alphabet) -> Self {
        ModelConfig {
            conv_filter_time: 11,
            conv_filter_freq: 32,
            conv_filters: 32,
            conv_stride_time: 3,
            conv_stride_freq: 3,
            num_recurrent_layers: 3,
            hidden_size: 256,
            input_bins: 129,
            alphabet,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("conv_filter_time", self.conv_filter_time),
            ("conv_filter_freq", self.conv_filter_freq),
            ("conv_filters", self.conv_filters),
            ("conv_stride_time", self.conv_stride_time),
            ("conv_stride_freq", self.conv_stride_freq),
            ("num_recurrent_layers", self.num_recurrent_layers),
            ("hidden_size", self.hidden_size),
            ("input_bins", self.input_bins),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if self.input_bins < self.conv_filter_freq {
            return Err(ModelError::InvalidConfig(format!(
                "input_bins {} smaller than conv_filter_freq {}",
                self.input_bins, self.conv_filter_freq
            )));
        }
        Ok(())
    }

    /// Frequency extent after the valid convolution.
    pub fn conv_output_bins(&self) -> usize {
        (self.input_bins - self.conv_filter_freq) / self.conv_stride_freq + 1
    }

    /// Width of each recurrent input frame: filters x output bins.
    pub fn recurrent_input_size(&self) -> usize {
        self.conv_filters * self.conv_output_bins()
    }

    /// Output frames for an input of `frames` spectrogram frames:
    /// `floor((frames - filter_time) / stride_time) + 1`.
    pub fn conv_output_frames(&self, frames: usize) -> usize {
        if frames < self.conv_filter_time {
            0
        } else {
            (frames - self.conv_filter_time) / self.conv_stride_time + 1
        }
    }

    fn recurrent_input_size_at(&self, layer: usize) -> usize {
        if layer == 0 {
            self.recurrent_input_size()
        } else {
            self.hidden_size
        }
    }
}

/// Dense row-major tensor of 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Tensor {
            dims,
            data: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// One gated recurrent layer: input, recurrent and bias tensors for the
/// update gate, reset gate and candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayerWeights {
    pub w_update: Tensor,
    pub u_update: Tensor,
    pub b_update: Tensor,
    pub w_reset: Tensor,
    pub u_reset: Tensor,
    pub b_reset: Tensor,
    pub w_cand: Tensor,
    pub u_cand: Tensor,
    pub b_cand: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub conv_kernel: Tensor,
    pub conv_bias: Tensor,
    pub layers: Vec<GruLayerWeights>,
    pub out_weight: Tensor,
    pub out_bias: Tensor,
}

const GATE_NAMES: [&str; 3] = ["update", "reset", "cand"];

/// Canonical tensor manifest for a config: names and shapes, in the order
/// payloads are laid out in the model file.
pub fn tensor_manifest(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    out.push((
        "conv.kernel".to_string(),
        vec![
            config.conv_filters,
            config.conv_filter_time,
            config.conv_filter_freq,
        ],
    ));
    out.push(("conv.bias".to_string(), vec![config.conv_filters]));
    for layer in 0..config.num_recurrent_layers {
        let input = config.recurrent_input_size_at(layer);
        for gate in GATE_NAMES {
            out.push((
                format!("gru{layer}.w_{gate}"),
                vec![config.hidden_size, input],
            ));
            out.push((
                format!("gru{layer}.u_{gate}"),
                vec![config.hidden_size, config.hidden_size],
            ));
            out.push((format!("gru{layer}.b_{gate}"), vec![config.hidden_size]));
        }
    }
    out.push((
        "out.weight".to_string(),
        vec![config.alphabet.len(), config.hidden_size],
    ));
    out.push(("out.bias".to_string(), vec![config.alphabet.len()]));
    out
}

impl ModelWeights {
    /// Weights in canonical manifest order.
    pub fn tensor_entries(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        out.push(("conv.kernel".to_string(), &self.conv_kernel));
        out.push(("conv.bias".to_string(), &self.conv_bias));
        for (i, layer) in self.layers.iter().enumerate() {
            for (gate, w, u, b) in [
                ("update", &layer.w_update, &layer.u_update, &layer.b_update),
                ("reset", &layer.w_reset, &layer.u_reset, &layer.b_reset),
                ("cand", &layer.w_cand, &layer.u_cand, &layer.b_cand),
            ] {
                out.push((format!("gru{i}.w_{gate}"), w));
                out.push((format!("gru{i}.u_{gate}"), u));
                out.push((format!("gru{i}.b_{gate}"), b));
            }
        }
        out.push(("out.weight".to_string(), &self.out_weight));
        out.push(("out.bias".to_string(), &self.out_bias));
        out
    }

    /// Assembles weights from named tensors, validating against the
    /// config's manifest: wrong shapes, missing tensors and extras are all
    /// distinct errors.
    pub fn from_named(
        config: &ModelConfig,
        mut named: Vec<(String, Tensor)>,
    ) -> Result<Self, ModelError> {
        let manifest = tensor_manifest(config);
        let mut take = |name: &str, expected: &[usize]| -> Result<Tensor, ModelError> {
            let pos = named
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| ModelError::MissingTensor(name.to_string()))?;
            let (_, tensor) = named.swap_remove(pos);
            if tensor.dims != expected {
                return Err(ModelError::ShapeMismatch {
                    name: name.to_string(),
                    expected: expected.to_vec(),
                    got: tensor.dims,
                });
            }
            Ok(tensor)
        };

        let mut by_name = std::collections::HashMap::new();
        for (name, dims) in &manifest {
            by_name.insert(name.clone(), dims.clone());
        }

        let conv_kernel = take("conv.kernel", &by_name["conv.kernel"])?;
        let conv_bias = take("conv.bias", &by_name["conv.bias"])?;
        let mut layers = Vec::with_capacity(config.num_recurrent_layers);
        for i in 0..config.num_recurrent_layers {
            let g = |gate: &str, kind: &str| format!("gru{i}.{kind}_{gate}");
            layers.push(GruLayerWeights {
                w_update: take(&g("update", "w"), &by_name[&g("update", "w")])?,
                u_update: take(&g("update", "u"), &by_name[&g("update", "u")])?,
                b_update: take(&g("update", "b"), &by_name[&g("update", "b")])?,
                w_reset: take(&g("reset", "w"), &by_name[&g("reset", "w")])?,
                u_reset: take(&g("reset", "u"), &by_name[&g("reset", "u")])?,
                b_reset: take(&g("reset", "b"), &by_name[&g("reset", "b")])?,
                w_cand: take(&g("cand", "w"), &by_name[&g("cand", "w")])?,
                u_cand: take(&g("cand", "u"), &by_name[&g("cand", "u")])?,
                b_cand: take(&g("cand", "b"), &by_name[&g("cand", "b")])?,
            });
        }
        let out_weight = take("out.weight", &by_name["out.weight"])?;
        let out_bias = take("out.bias", &by_name["out.bias"])?;

        if let Some((name, _)) = named.first() {
            return Err(ModelError::UnexpectedTensor(name.clone()));
        }
        Ok(ModelWeights {
            conv_kernel,
            conv_bias,
            layers,
            out_weight,
            out_bias,
        })
    }
}

/// Exact number of scalar parameters the config implies.
pub fn param_count(config: &ModelConfig) -> usize {
    tensor_manifest(config)
        .iter()
        .map(|(_, dims)| dims.iter().product::<usize>())
        .sum()
}

/// Deterministic uniform weights in [-0.1, 0.1] for fixtures and tests.
pub fn init_random_model(config: &ModelConfig, seed: u64) -> ModelWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let named: Vec<(String, Tensor)> = tensor_manifest(config)
        .into_iter()
        .map(|(name, dims)| {
            let len = dims.iter().product();
            let data = (0..len).map(|_| rng.gen_range(-0.1f32..0.1)).collect();
            (name, Tensor { dims, data })
        })
        .collect();
    ModelWeights::from_named(config, named).expect("manifest tensors are well-formed")
}

/// Streaming carry-over: per-layer hidden vectors plus the spectrogram
/// frames that do not yet cover a full convolution window.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    hidden: Vec<Vec<f32>>,
    pending: Vec<f32>,
    /// Frames still owed to the stride when it exceeds the filter length:
    /// they are discarded as they arrive.
    skip_frames: usize,
    fingerprint: StateFingerprint,
}

#[derive(Debug, Clone, PartialEq)]
struct StateFingerprint {
    input_bins: usize,
    hidden_size: usize,
    num_layers: usize,
    conv_filter_time: usize,
    conv_stride_time: usize,
}

impl StateFingerprint {
    fn of(config: &ModelConfig) -> Self {
        StateFingerprint {
            input_bins: config.input_bins,
            hidden_size: config.hidden_size,
            num_layers: config.num_recurrent_layers,
            conv_filter_time: config.conv_filter_time,
            conv_stride_time: config.conv_stride_time,
        }
    }
}

impl RecurrentState {
    pub fn new(config: &ModelConfig) -> Self {
        RecurrentState {
            hidden: vec![vec![0.0; config.hidden_size]; config.num_recurrent_layers],
            pending: Vec::new(),
            skip_frames: 0,
            fingerprint: StateFingerprint::of(config),
        }
    }

    /// Spectrogram frames buffered but not yet consumed by a convolution
    /// window.
    pub fn pending_frames(&self) -> usize {
        self.pending.len() / self.fingerprint.input_bins
    }

    pub fn hidden(&self) -> &[Vec<f32>] {
        &self.hidden
    }
}

/// A validated config/weights pair ready for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticModel {
    config: ModelConfig,
    weights: ModelWeights,
}

impl AcousticModel {
    pub fn new(config: ModelConfig, weights: ModelWeights) -> Result<Self, ModelError> {
        config.validate()?;
        // Re-validate shapes through the manifest path.
        for ((name, dims), (ename, entry)) in tensor_manifest(&config)
            .iter()
            .zip(weights.tensor_entries())
        {
            if *name != ename {
                return Err(ModelError::MissingTensor(name.clone()));
            }
            if entry.dims != *dims {
                return Err(ModelError::ShapeMismatch {
                    name: name.clone(),
                    expected: dims.clone(),
                    got: entry.dims.clone(),
                });
            }
        }
        Ok(AcousticModel { config, weights })
    }

    pub fn random(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let weights = init_random_model(&config, seed);
        AcousticModel::new(config, weights)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn weights(&self) -> &ModelWeights {
        &self.weights
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.config.alphabet
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.config)
    }

    pub fn new_state(&self) -> RecurrentState {
        RecurrentState::new(&self.config)
    }

    /// Posterior frame period: spectrogram hop times the conv time stride.
    pub fn posterior_frame_duration(&self, spectrogram_hop: f64) -> f64 {
        spectrogram_hop * self.config.conv_stride_time as f64
    }

    /// Runs the whole spectrogram and returns softmax posteriors, one row
    /// per convolution output frame.
    pub fn forward_full(&self, spectrogram: &Spectrogram) -> Result<PosteriorMatrix, ModelError> {
        if spectrogram.num_bins() != self.config.input_bins {
            return Err(ModelError::BinCountMismatch {
                got: spectrogram.num_bins(),
                expected: self.config.input_bins,
            });
        }
        if spectrogram.num_frames() < self.config.conv_filter_time {
            return Err(ModelError::TooFewFrames {
                got: spectrogram.num_frames(),
                need: self.config.conv_filter_time,
            });
        }
        let mut state = self.new_state();
        let rows = self.forward_step(spectrogram.data(), &mut state)?;
        let num_rows = rows.len() / self.config.alphabet.len();
        debug_assert_eq!(
            num_rows,
            self.config.conv_output_frames(spectrogram.num_frames())
        );
        Ok(PosteriorMatrix::from_flat(
            self.config.alphabet.clone(),
            rows,
            num_rows,
            self.posterior_frame_duration(spectrogram.frame_hop()),
        )?)
    }

    /// Consumes a chunk of spectrogram frames (flat, row-major, any number
    /// of whole frames including zero) and returns the posterior rows they
    /// complete, flat row-major. Concatenating the outputs over any
    /// chunking of an input reproduces [`AcousticModel::forward_full`].
    pub fn forward_step(
        &self,
        frames: &[f32],
        state: &mut RecurrentState,
    ) -> Result<Vec<f64>, ModelError> {
        if state.fingerprint != StateFingerprint::of(&self.config) {
            return Err(ModelError::StateMismatch);
        }
        let bins = self.config.input_bins;
        if !frames.len().is_multiple_of(bins) {
            return Err(ModelError::BinCountMismatch {
                got: frames.len() % bins,
                expected: bins,
            });
        }
        state.pending.extend_from_slice(frames);
        if state.skip_frames > 0 {
            let drop = (state.skip_frames * bins).min(state.pending.len());
            state.pending.drain(..drop);
            state.skip_frames -= drop / bins;
            if state.skip_frames > 0 {
                return Ok(Vec::new());
            }
        }

        let window = self.config.conv_filter_time * bins;
        let advance = self.config.conv_stride_time * bins;
        let mut out = Vec::new();
        let mut offset = 0;
        while state.pending.len() >= offset + window {
            let conv_row = self.conv_frame(&state.pending[offset..offset + window]);
            let mut x = conv_row;
            for (layer, hidden) in self.weights.layers.iter().zip(state.hidden.iter_mut()) {
                x = gru_step(layer, hidden, &x);
                hidden.copy_from_slice(&x);
            }
            self.append_softmax_row(&x, &mut out);
            offset += advance;
        }
        let drop = offset.min(state.pending.len());
        state.pending.drain(..drop);
        state.skip_frames = (offset - drop) / bins;
        Ok(out)
    }

    /// One convolution output frame from `conv_filter_time` input frames,
    /// with ReLU.
    fn conv_frame(&self, window: &[f32]) -> Vec<f32> {
        let cfg = &self.config;
        let bins = cfg.input_bins;
        let out_bins = cfg.conv_output_bins();
        let mut out = vec![0.0f32; cfg.conv_filters * out_bins];
        for filter in 0..cfg.conv_filters {
            let kernel = &self.weights.conv_kernel.data
                [filter * cfg.conv_filter_time * cfg.conv_filter_freq..];
            for ob in 0..out_bins {
                let f0 = ob * cfg.conv_stride_freq;
                let mut acc = self.weights.conv_bias.data[filter];
                for dt in 0..cfg.conv_filter_time {
                    let input_row = &window[dt * bins + f0..dt * bins + f0 + cfg.conv_filter_freq];
                    let kernel_row =
                        &kernel[dt * cfg.conv_filter_freq..(dt + 1) * cfg.conv_filter_freq];
                    for (i, k) in input_row.iter().zip(kernel_row) {
                        acc += i * k;
                    }
                }
                out[filter * out_bins + ob] = acc.max(0.0);
            }
        }
        out
    }

    fn append_softmax_row(&self, hidden: &[f32], out: &mut Vec<f64>) {
        let n = self.config.alphabet.len();
        let mut logits = vec![0.0f32; n];
        for (a, logit) in logits.iter_mut().enumerate() {
            let row = &self.weights.out_weight.data[a * self.config.hidden_size..];
            let mut acc = self.weights.out_bias.data[a];
            for (h, w) in hidden.iter().zip(row) {
                acc += h * w;
            }
            *logit = acc;
        }
        let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut exps = vec![0.0f32; n];
        let mut sum = 0.0f32;
        for (e, &l) in exps.iter_mut().zip(&logits) {
            *e = (l - max).exp();
            sum += *e;
        }
        out.extend(exps.iter().map(|&e| f64::from(e / sum)));
    }
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Standard two-gate recurrent cell with a reset-before-matmul candidate:
///   z = sigmoid(Wz x + Uz h + bz)
///   r = sigmoid(Wr x + Ur h + br)
///   c = tanh(Wc x + Uc (r * h) + bc)
///   h' = z * h + (1 - z) * c
fn gru_step(layer: &GruLayerWeights, hidden: &[f32], x: &[f32]) -> Vec<f32> {
    let n = hidden.len();
    let z = gate(
        &layer.w_update,
        &layer.u_update,
        &layer.b_update,
        x,
        hidden,
        sigmoid,
    );
    let r = gate(
        &layer.w_reset,
        &layer.u_reset,
        &layer.b_reset,
        x,
        hidden,
        sigmoid,
    );
    let gated: Vec<f32> = r.iter().zip(hidden).map(|(r, h)| r * h).collect();
    let c = gate(
        &layer.w_cand,
        &layer.u_cand,
        &layer.b_cand,
        x,
        &gated,
        f32::tanh,
    );
    let mut out = vec![0.0f32; n];
    for i in 0..n {
        out[i] = z[i] * hidden[i] + (1.0 - z[i]) * c[i];
    }
    out
}

fn gate(
    w: &Tensor,
    u: &Tensor,
    b: &Tensor,
    x: &[f32],
    h: &[f32],
    activation: impl Fn(f32) -> f32,
) -> Vec<f32> {
    let n = b.data.len();
    let mut out = vec![0.0f32; n];
    for (j, slot) in out.iter_mut().enumerate() {
        let mut acc = b.data[j];
        let w_row = &w.data[j * x.len()..(j + 1) * x.len()];
        for (xi, wi) in x.iter().zip(w_row) {
            acc += xi * wi;
        }
        let u_row = &u.data[j * h.len()..(j + 1) * h.len()];
        for (hi, ui) in h.iter().zip(u_row) {
            acc += hi * ui;
        }
        *slot = activation(acc);
    }
    out
}
