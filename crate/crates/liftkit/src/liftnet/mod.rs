//! Binary lift classifier: a single LSTM layer feeding a small dense head,
//! trained from scratch with Adam over backpropagation through time.
//!
//! Parameters live in one flat `f64` vector with a layout derived from the
//! config, which keeps the optimizer, finite-difference checks, and the
//! freeze mask for fine-tuning trivial.

mod io;
mod lstm;
mod train;

pub use io::{load_model, save_model};
pub use lstm::{forward, forward_logit, gradients, input_gradient, GradientTarget};
pub use train::{fine_tune, score_recording, train, Adam, FineTuneOptions};

use crate::windowing::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LiftnetError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("class {0:?} missing from dataset")]
    ClassMissing(Label),
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("dataset error: {0}")]
    Data(#[from] crate::windowing::WindowingError),
    #[error("model io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, LiftnetError>;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub window_len: usize,
    pub n_channels: usize,
    pub lstm_hidden: usize,
    pub dense_widths: Vec<usize>,
    pub seed: u64,
    /// Channel names of the dataset the model was built for; used to reject
    /// mismatched layouts when loading a persisted model.
    #[serde(default)]
    pub channel_layout: Vec<String>,
}

impl ModelConfig {
    pub fn new(window_len: usize, n_channels: usize, seed: u64) -> Self {
        ModelConfig {
            window_len,
            n_channels,
            lstm_hidden: 128,
            dense_widths: vec![5, 5],
            seed,
            channel_layout: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.window_len == 0 || self.n_channels == 0 || self.lstm_hidden == 0 {
            return Err(LiftnetError::Shape("all model dimensions must be >= 1".into()));
        }
        if self.dense_widths.iter().any(|&w| w == 0) {
            return Err(LiftnetError::Shape("dense widths must be >= 1".into()));
        }
        if !self.channel_layout.is_empty() && self.channel_layout.len() != self.n_channels {
            return Err(LiftnetError::Shape(format!(
                "channel layout has {} names for {} channels",
                self.channel_layout.len(),
                self.n_channels
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_split: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 30,
            validation_split: 0.2,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Offset/shape bookkeeping for one matrix in the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Tensor {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Tensor {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }
}

/// Gate order inside the stacked LSTM matrices: input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ParamLayout {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub b: Tensor,
    /// Dense head, hidden layers then the width-1 output layer.
    pub dense: Vec<(Tensor, Tensor)>, // (weights, bias) per layer
    pub total: usize,
    /// Parameters below this offset belong to the LSTM (freeze boundary).
    pub lstm_end: usize,
}

impl ParamLayout {
    pub(crate) fn from_config(cfg: &ModelConfig) -> ParamLayout {
        let h = cfg.lstm_hidden;
        let mut offset = 0;
        fn tensor(offset: &mut usize, rows: usize, cols: usize) -> Tensor {
            let t = Tensor { offset: *offset, rows, cols };
            *offset += rows * cols;
            t
        }
        let w_ih = tensor(&mut offset, 4 * h, cfg.n_channels);
        let w_hh = tensor(&mut offset, 4 * h, h);
        let b = tensor(&mut offset, 4 * h, 1);
        let lstm_end = offset;
        let mut dense = Vec::new();
        let mut in_dim = h;
        for &width in cfg.dense_widths.iter().chain(std::iter::once(&1)) {
            let w = tensor(&mut offset, width, in_dim);
            let bias = tensor(&mut offset, width, 1);
            dense.push((w, bias));
            in_dim = width;
        }
        ParamLayout { w_ih, w_hh, b, dense, total: offset, lstm_end }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub(crate) layout: ParamLayout,
    pub(crate) theta: Vec<f64>,
}

impl Model {
    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    /// Mutable parameter access, for finite-difference checks and external
    /// optimizers. The layout is fixed by the config; only values may change.
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub(crate) fn lstm_params(&self) -> &[f64] {
        &self.theta[..self.layout.lstm_end]
    }

    pub(crate) fn check_window(&self, data: &[f64]) -> Result<()> {
        let expected = self.config.window_len * self.config.n_channels;
        if data.len() != expected {
            return Err(LiftnetError::Shape(format!(
                "window has {} values, model expects {expected}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LiftnetError::Input("window contains non-finite value".into()));
        }
        Ok(())
    }
}

/// Builds a model with seeded uniform(−1/√fan_in, +1/√fan_in) weights, zero
/// biases, and the forget-gate bias set to 1.0.
pub fn init_model(cfg: &ModelConfig) -> Result<Model> {
    cfg.validate()?;
    let layout = ParamLayout::from_config(cfg);
    let mut theta = vec![0.0; layout.total];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut fill = |t: &Tensor, theta: &mut Vec<f64>| {
        let bound = 1.0 / (t.cols as f64).sqrt();
        for v in &mut theta[t.offset..t.offset + t.len()] {
            *v = rng.gen_range(-bound..bound);
        }
    };
    fill(&layout.w_ih, &mut theta);
    fill(&layout.w_hh, &mut theta);
    let h = cfg.lstm_hidden;
    for v in &mut theta[layout.b.offset + h..layout.b.offset + 2 * h] {
        *v = 1.0; // forget gate
    }
    let dense = layout.dense.clone();
    for (w, _) in &dense {
        fill(w, &mut theta);
    }
    Ok(Model { config: cfg.clone(), layout, theta })
}

/// Binary cross-entropy with the probability clamped to [1e-7, 1−1e-7], so
/// the loss is finite on the whole closed interval [0, 1].
pub fn loss(prob: f64, label: Label) -> f64 {
    let p = prob.clamp(1e-7, 1.0 - 1e-7);
    match label {
        Label::Lift => -p.ln(),
        Label::NonLift => -(1.0 - p).ln(),
    }
}

/// Per-epoch training curves.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}
