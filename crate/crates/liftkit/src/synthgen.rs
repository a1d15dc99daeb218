//! Synthetic fixture corpus: multi-sensor recordings with embedded,
//! parameterized lift signatures and exact ground-truth labels. Stands in
//! for the private field dataset; makes no claim of biomechanical realism.
//!
//! The distractor mechanism deliberately plants a confound: a pulse on a
//! chosen sensor set that coincides with lifts in train-like data but also
//! fires between lifts in field-like data, so a model that latches onto the
//! distractor fails at evaluation time.

use crate::imu_core::{
    round_half_up, Frame, LabelSource, LabeledRecording, LiftInterval, RawLabel, Recording,
    SensorId, CHANNELS_PER_SENSOR,
};
use crate::{derive_seed, GRAVITY};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, SynthError>;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LiftSpec {
    pub bol_s: f64,
    pub amplitude: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DistractorMode {
    /// The distractor coincides with lifts only in train-like data; field-like
    /// corpora fire it between lifts too, breaking the correlation.
    TrainOnly,
    /// The distractor coincides with lifts in every corpus mode.
    Always,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DistractorRule {
    pub sensors: Vec<SensorId>,
    pub mode: DistractorMode,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MotionSpec {
    pub subject_id: String,
    pub trial_id: String,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub lifts: Vec<LiftSpec>,
    pub accel_noise_sigma: f64,
    pub gyro_noise_sigma: f64,
    pub informative_sensors: Vec<SensorId>,
    pub distractor: Option<DistractorRule>,
    pub seed: u64,
}

impl MotionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !(self.sample_rate_hz > 0.0) {
            return Err(SynthError::Spec("duration and sample rate must be positive".into()));
        }
        if self.accel_noise_sigma < 0.0 || self.gyro_noise_sigma < 0.0 {
            return Err(SynthError::Spec("noise sigma must be non-negative".into()));
        }
        if self.informative_sensors.is_empty() {
            return Err(SynthError::Spec("need at least one informative sensor".into()));
        }
        let mut last_end = f64::NEG_INFINITY;
        for lift in &self.lifts {
            if lift.bol_s < 0.0 || lift.duration_s <= 0.0 {
                return Err(SynthError::Spec("lift times must be non-negative".into()));
            }
            if lift.bol_s < last_end {
                return Err(SynthError::Spec("lifts overlap".into()));
            }
            if lift.bol_s + lift.duration_s > self.duration_s {
                return Err(SynthError::Spec("lift extends past recording end".into()));
            }
            last_end = lift.bol_s + lift.duration_s;
        }
        Ok(())
    }

    pub fn n_frames(&self) -> usize {
        round_half_up(self.duration_s * self.sample_rate_hz) as usize
    }
}

/// A default train-like template: 60 s trials, four lifts, wrist sensors
/// informative, upper-arm gyro distractor coinciding with lifts.
pub fn default_template() -> MotionSpec {
    MotionSpec {
        subject_id: "synth".into(),
        trial_id: "trial".into(),
        duration_s: 60.0,
        sample_rate_hz: 25.0,
        lifts: (0..4)
            .map(|i| LiftSpec { bol_s: 6.0 + i as f64 * 14.0, amplitude: 2.0, duration_s: 1.2 })
            .collect(),
        accel_noise_sigma: 0.4,
        gyro_noise_sigma: 0.1,
        informative_sensors: vec![SensorId::LeftWrist, SensorId::RightWrist],
        distractor: Some(DistractorRule {
            sensors: vec![SensorId::RightUpperArm],
            mode: DistractorMode::TrainOnly,
            amplitude: 8.0,
        }),
        seed: 0,
    }
}

/// Half-sine pulse value, strictly positive over the whole span.
fn pulse(i: usize, n: usize, amplitude: f64) -> f64 {
    amplitude * (std::f64::consts::PI * (i as f64 + 0.5) / n as f64).sin()
}

struct PulseSpan {
    start: usize,
    len: usize,
    amplitude: f64,
    sensors: Vec<SensorId>,
    /// informative pulses hit accel z and gyro x; distractors hit gyro y
    distractor: bool,
}

fn render(
    spec: &MotionSpec,
    spans: &[PulseSpan],
    lifts: Vec<LiftInterval>,
) -> Result<LabeledRecording> {
    let n_frames = spec.n_frames();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let accel_noise = Normal::new(0.0, spec.accel_noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| SynthError::Spec(e.to_string()))?;
    let gyro_noise = Normal::new(0.0, spec.gyro_noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| SynthError::Spec(e.to_string()))?;

    let sensors = SensorId::ALL.to_vec();
    let mut frames: Vec<Frame> = (0..n_frames)
        .map(|_| {
            let mut channels = vec![0.0; sensors.len() * CHANNELS_PER_SENSOR];
            for slot in 0..sensors.len() {
                let base = slot * CHANNELS_PER_SENSOR;
                channels[base + 2] = GRAVITY;
                for k in 0..CHANNELS_PER_SENSOR {
                    let noisy = if spec.accel_noise_sigma > 0.0 && k < 3 {
                        accel_noise.sample(&mut rng)
                    } else if spec.gyro_noise_sigma > 0.0 && k >= 3 {
                        gyro_noise.sample(&mut rng)
                    } else {
                        0.0
                    };
                    channels[base + k] += noisy;
                }
            }
            Frame { channels }
        })
        .collect();

    for span in spans {
        for i in 0..span.len {
            let frame = span.start + i;
            if frame >= n_frames {
                break;
            }
            let v = pulse(i, span.len, span.amplitude);
            for &sensor in &span.sensors {
                let slot = sensors.iter().position(|&s| s == sensor).unwrap();
                let base = slot * CHANNELS_PER_SENSOR;
                if span.distractor {
                    frames[frame].channels[base + 4] += v; // gyro y
                } else {
                    frames[frame].channels[base + 2] += v; // accel z
                    frames[frame].channels[base + 3] += 0.5 * v; // gyro x
                }
            }
        }
    }

    let recording = Recording {
        subject_id: spec.subject_id.clone(),
        trial_id: spec.trial_id.clone(),
        start_epoch_ms: 1_700_000_000_000,
        sample_rate_hz: spec.sample_rate_hz,
        active_sensors: sensors,
        frames,
    };
    LabeledRecording::new(recording, lifts).map_err(|e| SynthError::Spec(e.to_string()))
}

fn lift_spans(spec: &MotionSpec) -> (Vec<PulseSpan>, Vec<LiftInterval>) {
    let rate = spec.sample_rate_hz;
    let mut spans = Vec::new();
    let mut lifts = Vec::new();
    for lift in &spec.lifts {
        let start = round_half_up(lift.bol_s * rate) as usize;
        let len = round_half_up(lift.duration_s * rate) as usize;
        lifts.push(LiftInterval { bol_frame: start, eol_frame: start + len });
        spans.push(PulseSpan {
            start,
            len,
            amplitude: lift.amplitude,
            sensors: spec.informative_sensors.clone(),
            distractor: false,
        });
        if let Some(rule) = &spec.distractor {
            spans.push(PulseSpan {
                start,
                len,
                amplitude: rule.amplitude,
                sensors: rule.sensors.clone(),
                distractor: true,
            });
        }
    }
    (spans, lifts)
}

/// Generates one recording with its exact frame-level labels. Fully
/// deterministic per spec (including the seed).
pub fn generate_recording(spec: &MotionSpec) -> Result<LabeledRecording> {
    spec.validate()?;
    let (spans, lifts) = lift_spans(spec);
    render(spec, &spans, lifts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CorpusMode {
    /// Lab-style data: distractors (if any) coincide with lifts.
    TrainLike,
    /// Field-style data: TrainOnly distractors also fire between lifts,
    /// mimicking complex non-lifting motion.
    FieldLike,
}

impl CorpusMode {
    pub fn parse(s: &str) -> Option<CorpusMode> {
        match s {
            "trainlike" => Some(CorpusMode::TrainLike),
            "fieldlike" => Some(CorpusMode::FieldLike),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorpusMode::TrainLike => "trainlike",
            CorpusMode::FieldLike => "fieldlike",
        }
    }
}

/// Spacing of the extra out-of-lift distractor pulses in field-like data.
const FIELD_DISTRACTOR_PERIOD_S: f64 = 6.0;

/// Generates `n_trials` recordings from the template with per-trial derived
/// seeds. In [`CorpusMode::FieldLike`], a [`DistractorMode::TrainOnly`]
/// distractor additionally pulses on a fixed grid between lifts.
pub fn generate_corpus(
    template: &MotionSpec,
    n_trials: usize,
    base_seed: u64,
    mode: CorpusMode,
) -> Result<Vec<LabeledRecording>> {
    if n_trials == 0 {
        return Err(SynthError::Spec("need at least one trial".into()));
    }
    template.validate()?;
    let mut out = Vec::with_capacity(n_trials);
    for trial in 0..n_trials {
        let mut spec = template.clone();
        spec.seed = derive_seed(base_seed, trial as u64);
        spec.trial_id = format!("{}_{trial:03}", template.trial_id);
        let (mut spans, lifts) = lift_spans(&spec);
        if mode == CorpusMode::FieldLike {
            if let Some(rule) = &spec.distractor {
                if rule.mode == DistractorMode::TrainOnly {
                    let rate = spec.sample_rate_hz;
                    let len = round_half_up(1.2 * rate) as usize;
                    let mut t = FIELD_DISTRACTOR_PERIOD_S / 2.0;
                    while t + 1.2 < spec.duration_s {
                        let start = round_half_up(t * rate) as usize;
                        let clear = lifts.iter().all(|l| {
                            start + len <= l.bol_frame || start >= l.eol_frame
                        });
                        if clear {
                            spans.push(PulseSpan {
                                start,
                                len,
                                amplitude: rule.amplitude,
                                sensors: rule.sensors.clone(),
                                distractor: true,
                            });
                        }
                        t += FIELD_DISTRACTOR_PERIOD_S;
                    }
                }
            }
        }
        out.push(render(&spec, &spans, lifts)?);
    }
    Ok(out)
}

/// Wall-clock labels matching the embedded lift intervals, for emitting the
/// standard label file alongside generated recordings.
pub fn raw_labels(lr: &LabeledRecording) -> Vec<RawLabel> {
    let rec = &lr.recording;
    let start = rec.start_ms_of_day();
    lr.lifts
        .iter()
        .map(|lift| {
            let to_ms =
                |frame: usize| start + (frame as f64 / rec.sample_rate_hz * 1000.0).round() as i64;
            RawLabel {
                trial_id: rec.trial_id.clone(),
                bol_ms_of_day: to_ms(lift.bol_frame),
                eol_ms_of_day: Some(to_ms(lift.eol_frame)),
                source: LabelSource::MoCap,
            }
        })
        .collect()
}
