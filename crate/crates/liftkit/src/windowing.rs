//! Fixed-length window extraction, overlap-based labeling, class balancing,
//! and stratified train/validation splits.

use crate::imu_core::{round_half_up, LabeledRecording, LiftInterval};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WindowingError {
    #[error("window length {window_len} exceeds recording length {len}")]
    EmptyDataset { window_len: usize, len: usize },
    #[error("class {0:?} missing from dataset")]
    ClassMissing(Label),
    #[error("split error: {0}")]
    Split(String),
    #[error("shape error: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, WindowingError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Label {
    Lift,
    NonLift,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Lift => 1.0,
            Label::NonLift => 0.0,
        }
    }
}

/// One classifier input: `window_len × n_channels` values, row-major by time.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub trial_id: String,
    pub start_frame: usize,
    pub data: Vec<f64>,
    pub label: Label,
}

/// Window-extraction parameters. Default lift core (1.2 s) is the average
/// duration of the core lifting motion; a window counts as Lift when it
/// overlaps a core by at least `overlap_fraction` of its own length.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SliceConfig {
    pub window_len: usize,
    pub stride: usize,
    pub lift_core_s: f64,
    pub overlap_fraction: f64,
    /// When set, windows that touch a lift core but fall below the overlap
    /// threshold are discarded instead of labeled NonLift.
    pub discard_ambiguous: bool,
}

impl SliceConfig {
    pub fn new(window_len: usize, stride: usize) -> Self {
        SliceConfig {
            window_len,
            stride,
            lift_core_s: 1.2,
            overlap_fraction: 0.5,
            discard_ambiguous: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    pub balance_seed: Option<u64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub windows: Vec<Window>,
    pub window_len: usize,
    pub channel_layout: Vec<String>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(windows: Vec<Window>, window_len: usize, channel_layout: Vec<String>) -> Result<Self> {
        let ds = Dataset { windows, window_len, channel_layout, provenance: Provenance::default() };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n_channels(&self) -> usize {
        self.channel_layout.len()
    }

    pub fn class_count(&self, label: Label) -> usize {
        self.windows.iter().filter(|w| w.label == label).count()
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.window_len * self.n_channels();
        for w in &self.windows {
            if w.data.len() != expected {
                return Err(WindowingError::Shape(format!(
                    "window at {}:{} has {} values, expected {expected}",
                    w.trial_id,
                    w.start_frame,
                    w.data.len()
                )));
            }
            if w.data.iter().any(|v| !v.is_finite()) {
                return Err(WindowingError::Shape(format!(
                    "window at {}:{} has non-finite value",
                    w.trial_id, w.start_frame
                )));
            }
        }
        Ok(())
    }
}

/// Frame count of the lift core starting at `bol`.
pub fn lift_core_len(lift_core_s: f64, rate: f64) -> usize {
    round_half_up(lift_core_s * rate) as usize
}

/// Labels the window `[start, start + window_len)` against the lift cores.
/// Invariant to lift order and to intervals that do not touch the window.
/// Returns `None` only in ambiguous-discard mode.
pub fn label_window(
    start: usize,
    window_len: usize,
    lifts: &[LiftInterval],
    cfg: &SliceConfig,
    rate: f64,
) -> Option<Label> {
    let core_len = lift_core_len(cfg.lift_core_s, rate);
    let end = start + window_len;
    let mut best_overlap = 0usize;
    for lift in lifts {
        let core_start = lift.bol_frame;
        let core_end = lift.bol_frame + core_len;
        let overlap = core_end.min(end).saturating_sub(core_start.max(start));
        best_overlap = best_overlap.max(overlap);
    }
    let threshold = cfg.overlap_fraction * window_len as f64;
    if best_overlap as f64 >= threshold {
        Some(Label::Lift)
    } else if best_overlap > 0 && cfg.discard_ambiguous {
        None
    } else {
        Some(Label::NonLift)
    }
}

/// Slides a window of `cfg.window_len` frames at `cfg.stride` over the
/// recording. Start frames are 0, stride, 2·stride, … up to len − window_len;
/// the count is floor((len − window_len)/stride) + 1.
pub fn slice_windows(lr: &LabeledRecording, cfg: &SliceConfig) -> Result<Vec<Window>> {
    assert!(cfg.stride >= 1, "stride must be at least 1");
    assert!(cfg.window_len >= 1, "window_len must be at least 1");
    let len = lr.recording.len();
    if cfg.window_len > len {
        return Err(WindowingError::EmptyDataset { window_len: cfg.window_len, len });
    }
    let n_channels = lr.recording.n_channels();
    let rate = lr.recording.sample_rate_hz;
    let mut out = Vec::with_capacity((len - cfg.window_len) / cfg.stride + 1);
    let mut start = 0;
    while start + cfg.window_len <= len {
        if let Some(label) = label_window(start, cfg.window_len, &lr.lifts, cfg, rate) {
            let mut data = Vec::with_capacity(cfg.window_len * n_channels);
            for frame in &lr.recording.frames[start..start + cfg.window_len] {
                data.extend_from_slice(&frame.channels);
            }
            out.push(Window {
                trial_id: lr.recording.trial_id.clone(),
                start_frame: start,
                data,
                label,
            });
        }
        start += cfg.stride;
    }
    Ok(out)
}

/// Down-samples the majority class uniformly at random (seeded) to the
/// minority count and shuffles the result. The minority class is kept whole.
pub fn balance(
    windows: Vec<Window>,
    window_len: usize,
    channel_layout: Vec<String>,
    seed: u64,
) -> Result<Dataset> {
    let lifts: Vec<Window> = windows.iter().filter(|w| w.label == Label::Lift).cloned().collect();
    let non_lifts: Vec<Window> =
        windows.into_iter().filter(|w| w.label == Label::NonLift).collect();
    if lifts.is_empty() {
        return Err(WindowingError::ClassMissing(Label::Lift));
    }
    if non_lifts.is_empty() {
        return Err(WindowingError::ClassMissing(Label::NonLift));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = lifts.len().min(non_lifts.len());
    let downsample = |mut class: Vec<Window>, rng: &mut ChaCha8Rng| {
        if class.len() > target {
            class.shuffle(rng);
            class.truncate(target);
        }
        class
    };
    let mut kept = downsample(lifts, &mut rng);
    kept.extend(downsample(non_lifts, &mut rng));
    kept.shuffle(&mut rng);

    let mut ds = Dataset::new(kept, window_len, channel_layout)?;
    ds.provenance =
        Provenance { balance_seed: Some(seed), note: format!("balanced to {target}+{target}") };
    Ok(ds)
}

/// Stratified split: each class contributes round(fraction × class count)
/// windows to the validation side; the split is seeded and exhaustive.
pub fn split(ds: &Dataset, validation_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    assert!(
        validation_fraction > 0.0 && validation_fraction < 1.0,
        "validation fraction must be in (0, 1)"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for label in [Label::Lift, Label::NonLift] {
        let mut class: Vec<Window> =
            ds.windows.iter().filter(|w| w.label == label).cloned().collect();
        class.shuffle(&mut rng);
        let n_val = round_half_up(validation_fraction * class.len() as f64) as usize;
        let rest = class.split_off(n_val.min(class.len()));
        val.extend(class);
        train.extend(rest);
    }
    if train.is_empty() || val.is_empty() {
        return Err(WindowingError::Split(format!(
            "fraction {validation_fraction} leaves a side empty ({} train, {} val)",
            train.len(),
            val.len()
        )));
    }
    let mk = |windows: Vec<Window>| Dataset {
        windows,
        window_len: ds.window_len,
        channel_layout: ds.channel_layout.clone(),
        provenance: ds.provenance.clone(),
    };
    Ok((mk(train), mk(val)))
}

/// Dataset file: header lines, then one row per window with the values in
/// row-major time × channel order.
pub fn serialize_dataset(ds: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(&format!("#window_len={}\n", ds.window_len));
    out.push_str(&format!("#channels={}\n", ds.channel_layout.join(",")));
    out.push_str(&format!(
        "#balance_seed={}\n",
        ds.provenance.balance_seed.map_or("none".to_string(), |s| s.to_string())
    ));
    for w in &ds.windows {
        let label = match w.label {
            Label::Lift => "lift",
            Label::NonLift => "nonlift",
        };
        let values: Vec<String> = w.data.iter().map(|v| format!("{v:.8e}")).collect();
        out.push_str(&format!("{},{},{},{}\n", w.trial_id, w.start_frame, label, values.join(",")));
    }
    out
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut window_len = None;
    let mut channels: Option<Vec<String>> = None;
    let mut balance_seed = None;
    let mut windows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            match rest.split_once('=') {
                Some(("window_len", v)) => {
                    window_len =
                        Some(v.parse().map_err(|_| WindowingError::Shape("bad window_len".into()))?)
                }
                Some(("channels", v)) => {
                    channels = Some(v.split(',').map(str::to_string).collect())
                }
                Some(("balance_seed", v)) => {
                    balance_seed = if v == "none" { None } else { v.parse().ok() }
                }
                _ => return Err(WindowingError::Shape(format!("unknown header '{rest}'"))),
            }
            continue;
        }
        let mut fields = line.splitn(4, ',');
        let (Some(trial), Some(start), Some(label), Some(values)) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(WindowingError::Shape("short dataset row".into()));
        };
        let label = match label {
            "lift" => Label::Lift,
            "nonlift" => Label::NonLift,
            other => return Err(WindowingError::Shape(format!("unknown label '{other}'"))),
        };
        let data: std::result::Result<Vec<f64>, _> =
            values.split(',').map(|v| v.trim().parse::<f64>()).collect();
        windows.push(Window {
            trial_id: trial.to_string(),
            start_frame: start
                .parse()
                .map_err(|_| WindowingError::Shape("bad start_frame".into()))?,
            data: data.map_err(|_| WindowingError::Shape("non-numeric window value".into()))?,
            label,
        });
    }
    let mut ds = Dataset::new(
        windows,
        window_len.ok_or_else(|| WindowingError::Shape("missing window_len header".into()))?,
        channels.ok_or_else(|| WindowingError::Shape("missing channels header".into()))?,
    )?;
    ds.provenance.balance_seed = balance_seed;
    Ok(ds)
}
