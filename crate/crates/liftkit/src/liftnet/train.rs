//! Mini-batch Adam training, transfer-style fine-tuning, and recording-wide
//! sliding-window scoring.

use super::lstm::{forward, gradients};
use super::{loss, LiftnetError, Model, Result, TrainConfig, TrainHistory};
use crate::imu_core::Recording;
use crate::windowing::{split, Dataset, Label, Window};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Adam optimizer state over the flat parameter vector.
/// β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(lr: f64, n_params: usize) -> Self {
        assert!(lr >= 0.0, "learning rate must be non-negative");
        Adam { lr, m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0 }
    }

    pub fn update(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.step as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.step as i32);
        for j in 0..theta.len() {
            self.m[j] = Self::BETA1 * self.m[j] + (1.0 - Self::BETA1) * grad[j];
            self.v[j] = Self::BETA2 * self.v[j] + (1.0 - Self::BETA2) * grad[j] * grad[j];
            let m_hat = self.m[j] / bc1;
            let v_hat = self.v[j] / bc2;
            theta[j] -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

fn require_both_classes(windows: &[Window]) -> Result<()> {
    for label in [Label::Lift, Label::NonLift] {
        if !windows.iter().any(|w| w.label == label) {
            return Err(LiftnetError::ClassMissing(label));
        }
    }
    Ok(())
}

fn mean_loss(model: &Model, windows: &[Window]) -> Result<f64> {
    let mut acc = 0.0;
    for w in windows {
        acc += loss(forward(model, &w.data)?, w.label);
    }
    Ok(acc / windows.len() as f64)
}

fn accuracy(model: &Model, windows: &[Window]) -> Result<f64> {
    let mut correct = 0usize;
    for w in windows {
        let predicted = forward(model, &w.data)? >= 0.5;
        if predicted == (w.label == Label::Lift) {
            correct += 1;
        }
    }
    Ok(correct as f64 / windows.len() as f64)
}

/// Trains a model on the dataset: seeded validation split, per-epoch seeded
/// shuffling, mini-batch gradients, Adam updates. Fully deterministic per
/// (seed, config, data).
pub fn train(model: &Model, data: &Dataset, tc: &TrainConfig) -> Result<(Model, TrainHistory)> {
    assert!(tc.batch_size >= 1 && tc.epochs >= 1, "batch_size and epochs must be >= 1");
    require_both_classes(&data.windows)?;
    if data.window_len != model.config.window_len || data.n_channels() != model.config.n_channels
    {
        return Err(LiftnetError::Shape(format!(
            "dataset is {}×{}, model expects {}×{}",
            data.window_len,
            data.n_channels(),
            model.config.window_len,
            model.config.n_channels
        )));
    }
    let (train_set, val_set) = split(data, tc.validation_split, tc.seed)?;

    let mut model = model.clone();
    let mut optimizer = Adam::new(tc.learning_rate, model.n_params());
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x5eed);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_set.windows.len()).collect();

    for epoch in 0..tc.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(tc.batch_size) {
            let batch: Vec<Window> =
                chunk.iter().map(|&i| train_set.windows[i].clone()).collect();
            let grad = gradients(&model, &batch)?;
            optimizer.update(&mut model.theta, &grad);
            epoch_loss += mean_loss(&model, &batch)?;
            n_batches += 1;
        }
        let train_loss = epoch_loss / n_batches as f64;
        let val_loss = mean_loss(&model, &val_set.windows)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(LiftnetError::Divergence { epoch });
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.val_accuracy.push(accuracy(&model, &val_set.windows)?);
    }
    Ok((model, history))
}

#[derive(Debug, Clone, Copy)]
pub struct FineTuneOptions {
    /// Leave all LSTM parameters untouched; only the dense head adapts.
    pub freeze_lstm: bool,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl FineTuneOptions {
    /// Default fine-tuning rate: one tenth of the training default.
    pub fn new(epochs: usize, seed: u64) -> Self {
        FineTuneOptions { freeze_lstm: false, learning_rate: 1e-4, epochs, seed }
    }
}

/// Continues training on a small target-domain sample, full-batch.
pub fn fine_tune(model: &Model, small_data: &Dataset, options: &FineTuneOptions) -> Result<Model> {
    if options.epochs == 0 {
        return Ok(model.clone());
    }
    require_both_classes(&small_data.windows)?;
    let mut model = model.clone();
    let mut optimizer = Adam::new(options.learning_rate, model.n_params());
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut order: Vec<usize> = (0..small_data.windows.len()).collect();
    for epoch in 0..options.epochs {
        order.shuffle(&mut rng);
        let batch: Vec<Window> =
            order.iter().map(|&i| small_data.windows[i].clone()).collect();
        let mut grad = gradients(&model, &batch)?;
        if options.freeze_lstm {
            grad[..model.layout.lstm_end].fill(0.0);
        }
        let frozen: Vec<f64> = model.lstm_params().to_vec();
        optimizer.update(&mut model.theta, &grad);
        if options.freeze_lstm {
            // Adam's epsilon term can still drift zero-gradient parameters;
            // restore the exact bits
            model.theta[..model.layout.lstm_end].copy_from_slice(&frozen);
        }
        if !mean_loss(&model, &batch)?.is_finite() {
            return Err(LiftnetError::Divergence { epoch });
        }
    }
    Ok(model)
}

/// Slides the model over a recording and returns one probability per frame.
/// Each window's probability lands on its start frame; frames between window
/// starts carry the nearest previous score.
pub fn score_recording(model: &Model, recording: &Recording, stride: usize) -> Result<Vec<f64>> {
    assert!(stride >= 1, "stride must be at least 1");
    let window_len = model.config.window_len;
    let len = recording.len();
    if len < window_len {
        return Err(LiftnetError::Shape(format!(
            "recording of {len} frames is shorter than the {window_len}-frame window"
        )));
    }
    let n_channels = recording.n_channels();
    if n_channels != model.config.n_channels {
        return Err(LiftnetError::Shape(format!(
            "recording has {n_channels} channels, model expects {}",
            model.config.n_channels
        )));
    }
    let mut scores = vec![0.0; len];
    let mut last = 0.0;
    let mut next_start = 0;
    for frame in 0..len {
        if frame == next_start && frame + window_len <= len {
            let mut data = Vec::with_capacity(window_len * n_channels);
            for f in &recording.frames[frame..frame + window_len] {
                data.extend_from_slice(&f.channels);
            }
            last = forward(model, &data)?;
            next_start += stride;
        }
        scores[frame] = last;
    }
    Ok(scores)
}
