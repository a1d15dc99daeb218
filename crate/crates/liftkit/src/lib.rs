//! Lift-detection pipeline for wearable IMU recordings.
//!
//! The crate covers the full lab-to-field workflow: recording ingestion and
//! label synchronization ([`imu_core`]), window extraction and class balancing
//! ([`windowing`]), quaternion attitude filtering ([`fusion_filters`]), an
//! LSTM lift classifier trained from scratch ([`liftnet`]), gradient saliency
//! maps ([`attribution`]), metric and sweep harnesses ([`evalkit`]), and a
//! synthetic fixture corpus generator ([`synthgen`]).
//!
//! Every operation is a pure function over immutable values and is
//! deterministic per seed; see the `examples/` directory for one runnable
//! program per capability, or the `liftkit` binary for the scripted pipeline.

pub mod attribution;
pub mod evalkit;
pub mod fusion_filters;
pub mod imu_core;
pub mod liftnet;
pub mod pipeline;
pub mod synthgen;
pub mod windowing;

pub use imu_core::{LabeledRecording, LiftInterval, RawLabel, Recording, SensorId};
pub use liftnet::{Model, ModelConfig, TrainConfig};
pub use windowing::{Dataset, Label, Window};

/// Gravity magnitude, m/s². World convention: z up, a stationary
/// accelerometer reads (0, 0, +9.81).
pub const GRAVITY: f64 = 9.81;

/// splitmix64 step, used to derive decorrelated seeds from (base, index).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add(index.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
