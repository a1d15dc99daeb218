//! Recording/label data model, wall-clock label synchronization, and the
//! time-offset / sensor-placement repair operations.

mod format;
mod repair;

pub use format::{parse_labels, parse_recording, serialize_labels, serialize_recording};
pub use repair::{
    apply_placement_fix, apply_time_offset, axis_aligned_rotations, detect_placement_anomaly,
    estimate_time_offset, restrict_sensors, PlacementFix, DEFAULT_ANOMALY_THRESHOLD_DEG,
};

use thiserror::Error;

/// Frames of lead between the beginning of lift and the derived end of lift,
/// in seconds. Chosen as the average duration of the core lifting motion.
pub const EOL_ADJUST_S: f64 = 1.52;

pub const MS_PER_DAY: i64 = 86_400_000;

#[derive(Debug, Error)]
pub enum ImuError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("parse error at line {line}: {msg}")]
    ParseAt { line: usize, msg: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("event at {event_ms} ms-of-day precedes recording start at {start_ms} ms-of-day")]
    TimeOrder { event_ms: i64, start_ms: i64 },
    #[error("frame {frame} out of range for recording of length {len}")]
    OutOfRange { frame: i64, len: usize },
    #[error("lift intervals overlap: [{0}, {1}) and [{2}, {3})")]
    LabelConflict(usize, usize, usize, usize),
    #[error("degenerate signal: {0}")]
    DegenerateSignal(&'static str),
    #[error("sensor {0} not active in recording")]
    SensorMissing(SensorId),
    #[error("subject not still: mean accel magnitude {0:.3} m/s² below 0.5 g")]
    NotStill(f64),
}

pub type Result<T> = std::result::Result<T, ImuError>;

/// The six body placements, in fixed channel order. The 36-channel layout of
/// a full recording is this order × (ax, ay, az, gx, gy, gz).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum SensorId {
    LeftWrist,
    RightWrist,
    RightThigh,
    UpperBack,
    RightUpperArm,
    Waist,
}

impl SensorId {
    pub const ALL: [SensorId; 6] = [
        SensorId::LeftWrist,
        SensorId::RightWrist,
        SensorId::RightThigh,
        SensorId::UpperBack,
        SensorId::RightUpperArm,
        SensorId::Waist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SensorId::LeftWrist => "left_wrist",
            SensorId::RightWrist => "right_wrist",
            SensorId::RightThigh => "right_thigh",
            SensorId::UpperBack => "upper_back",
            SensorId::RightUpperArm => "right_upper_arm",
            SensorId::Waist => "waist",
        }
    }

    pub fn parse(s: &str) -> Option<SensorId> {
        SensorId::ALL.iter().copied().find(|id| id.name() == s)
    }
}

impl std::fmt::Display for SensorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub const CHANNELS_PER_SENSOR: usize = 6;
pub const CHANNEL_SUFFIXES: [&str; CHANNELS_PER_SENSOR] = ["ax", "ay", "az", "gx", "gy", "gz"];

/// One sample: 6 channels per active sensor, accel in m/s², gyro in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub channels: Vec<f64>,
}

impl Frame {
    pub fn accel(&self, sensor_slot: usize) -> [f64; 3] {
        let base = sensor_slot * CHANNELS_PER_SENSOR;
        [self.channels[base], self.channels[base + 1], self.channels[base + 2]]
    }

    pub fn gyro(&self, sensor_slot: usize) -> [f64; 3] {
        let base = sensor_slot * CHANNELS_PER_SENSOR + 3;
        [self.channels[base], self.channels[base + 1], self.channels[base + 2]]
    }
}

/// A timestamped multi-sensor frame sequence at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub trial_id: String,
    pub start_epoch_ms: i64,
    pub sample_rate_hz: f64,
    pub active_sensors: Vec<SensorId>,
    pub frames: Vec<Frame>,
}

impl Recording {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.active_sensors.len() * CHANNELS_PER_SENSOR
    }

    /// Position of `sensor` in the channel layout, if active.
    pub fn sensor_slot(&self, sensor: SensorId) -> Option<usize> {
        self.active_sensors.iter().position(|&s| s == sensor)
    }

    /// Channel names in layout order, e.g. `left_wrist_ax`.
    pub fn channel_names(&self) -> Vec<String> {
        channel_names(&self.active_sensors)
    }

    /// Milliseconds-of-day of the first frame.
    pub fn start_ms_of_day(&self) -> i64 {
        self.start_epoch_ms.rem_euclid(MS_PER_DAY)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(ImuError::Parse("no frames".into()));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(ImuError::Schema("sample rate must be positive".into()));
        }
        let n = self.n_channels();
        for (i, f) in self.frames.iter().enumerate() {
            if f.channels.len() != n {
                return Err(ImuError::Schema(format!(
                    "frame {i} has {} channels, expected {n}",
                    f.channels.len()
                )));
            }
            if f.channels.iter().any(|v| !v.is_finite()) {
                return Err(ImuError::Schema(format!("frame {i} has non-finite channel")));
            }
        }
        Ok(())
    }
}

pub fn channel_names(sensors: &[SensorId]) -> Vec<String> {
    sensors
        .iter()
        .flat_map(|s| CHANNEL_SUFFIXES.iter().map(move |c| format!("{}_{}", s.name(), c)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LabelSource {
    MoCap,
    Video,
}

/// A ground-truth lift time as recorded: wall-clock time of day.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLabel {
    pub trial_id: String,
    /// Beginning of lift, milliseconds since midnight.
    pub bol_ms_of_day: i64,
    /// End of lift, milliseconds since midnight; absent when only the
    /// beginning was labeled.
    pub eol_ms_of_day: Option<i64>,
    pub source: LabelSource,
}

/// A lift span in frame indices: [bol_frame, eol_frame).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiftInterval {
    pub bol_frame: usize,
    pub eol_frame: usize,
}

impl LiftInterval {
    pub fn new(bol_frame: usize, eol_frame: usize) -> Result<Self> {
        if bol_frame >= eol_frame {
            return Err(ImuError::Schema(format!(
                "lift interval must have bol < eol, got [{bol_frame}, {eol_frame})"
            )));
        }
        Ok(LiftInterval { bol_frame, eol_frame })
    }

    pub fn len(&self) -> usize {
        self.eol_frame - self.bol_frame
    }

    pub fn contains(&self, frame: usize) -> bool {
        frame >= self.bol_frame && frame < self.eol_frame
    }
}

/// A recording together with its synchronized lift intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecording {
    pub recording: Recording,
    pub lifts: Vec<LiftInterval>,
    /// Net time-offset repair applied so far, in frames (bookkeeping).
    pub applied_offset_frames: i64,
}

impl LabeledRecording {
    pub fn new(recording: Recording, lifts: Vec<LiftInterval>) -> Result<Self> {
        validate_intervals(&lifts, recording.len())?;
        Ok(LabeledRecording { recording, lifts, applied_offset_frames: 0 })
    }

    /// Unlabeled recording, e.g. a whole-file non-lift trial.
    pub fn all_nonlift(recording: Recording) -> Self {
        LabeledRecording { recording, lifts: Vec::new(), applied_offset_frames: 0 }
    }

    /// Per-frame 0/1 lift indicator, length = recording length.
    pub fn indicator(&self) -> Vec<f64> {
        let mut ind = vec![0.0; self.recording.len()];
        for lift in &self.lifts {
            for v in &mut ind[lift.bol_frame..lift.eol_frame] {
                *v = 1.0;
            }
        }
        ind
    }
}

fn validate_intervals(lifts: &[LiftInterval], len: usize) -> Result<()> {
    for pair in lifts.windows(2) {
        if pair[1].bol_frame < pair[0].bol_frame {
            return Err(ImuError::Schema("lift intervals not sorted".into()));
        }
        if pair[1].bol_frame < pair[0].eol_frame {
            return Err(ImuError::LabelConflict(
                pair[0].bol_frame,
                pair[0].eol_frame,
                pair[1].bol_frame,
                pair[1].eol_frame,
            ));
        }
    }
    if let Some(last) = lifts.last() {
        if last.eol_frame > len {
            return Err(ImuError::OutOfRange { frame: last.eol_frame as i64, len });
        }
    }
    Ok(())
}

/// Round-half-up: 1.5 → 2, 2.5 → 3. Used for every time→frame conversion so
/// results are deterministic across platforms.
pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Maps a wall-clock event to a frame index. Recordings and labels are
/// assumed same-day; an event earlier in the day than the recording start is
/// rejected rather than wrapped across midnight.
pub fn epoch_to_frame(event_ms_of_day: i64, recording: &Recording) -> Result<usize> {
    let frame = epoch_to_frame_unchecked(event_ms_of_day, recording)?;
    if frame >= recording.len() as i64 {
        return Err(ImuError::OutOfRange { frame, len: recording.len() });
    }
    Ok(frame as usize)
}

/// As [`epoch_to_frame`], but clamps an out-of-range result to the last
/// frame. Explicit opt-in for callers that tolerate truncated trailing labels.
pub fn epoch_to_frame_clamped(event_ms_of_day: i64, recording: &Recording) -> Result<usize> {
    let frame = epoch_to_frame_unchecked(event_ms_of_day, recording)?;
    Ok((frame as usize).min(recording.len() - 1))
}

fn epoch_to_frame_unchecked(event_ms_of_day: i64, recording: &Recording) -> Result<i64> {
    let start_ms = recording.start_ms_of_day();
    if event_ms_of_day < start_ms {
        return Err(ImuError::TimeOrder { event_ms: event_ms_of_day, start_ms });
    }
    let dt_s = (event_ms_of_day - start_ms) as f64 / 1000.0;
    Ok(round_half_up(dt_s * recording.sample_rate_hz))
}

/// Derives the end-of-lift frame as a fixed 1.52 s after the beginning.
pub fn adjust_eol(bol_frame: usize, sample_rate_hz: f64) -> usize {
    bol_frame + round_half_up(EOL_ADJUST_S * sample_rate_hz) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EolPolicy {
    /// Use the label's own end time; labels without one are rejected.
    UseProvided,
    /// Ignore any provided end time and derive it via [`adjust_eol`].
    DeriveFromBol,
}

/// Synchronizes wall-clock labels to frame indices.
pub fn align_labels(
    recording: &Recording,
    labels: &[RawLabel],
    eol_policy: EolPolicy,
) -> Result<LabeledRecording> {
    let mut lifts = Vec::with_capacity(labels.len());
    for label in labels {
        if label.trial_id != recording.trial_id {
            return Err(ImuError::Schema(format!(
                "label for trial '{}' does not match recording trial '{}'",
                label.trial_id, recording.trial_id
            )));
        }
        let bol = epoch_to_frame(label.bol_ms_of_day, recording)?;
        let eol = match eol_policy {
            EolPolicy::DeriveFromBol => adjust_eol(bol, recording.sample_rate_hz),
            EolPolicy::UseProvided => match label.eol_ms_of_day {
                Some(eol_ms) => epoch_to_frame(eol_ms, recording)?,
                None => {
                    return Err(ImuError::Schema(format!(
                        "label at {} ms has no end time but policy is UseProvided",
                        label.bol_ms_of_day
                    )))
                }
            },
        };
        if eol > recording.len() {
            return Err(ImuError::OutOfRange { frame: eol as i64, len: recording.len() });
        }
        lifts.push(LiftInterval::new(bol, eol)?);
    }
    lifts.sort_by_key(|l| l.bol_frame);
    LabeledRecording::new(recording.clone(), lifts)
}
