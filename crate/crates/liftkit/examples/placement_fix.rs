//! Detect a sensor mounted in the wrong orientation and undo it.
//!
//! A sensor strapped on sideways shows a gravity direction that disagrees
//! with a trusted reference sensor during a still period. The detector
//! searches the 24 axis-aligned rotations for the one that best realigns it.
//!
//! Run with: cargo run --example placement_fix

use liftkit::imu_core::{
    apply_placement_fix, detect_placement_anomaly, PlacementFix, SensorId,
    DEFAULT_ANOMALY_THRESHOLD_DEG,
};
use liftkit::synthgen::{default_template, generate_corpus, CorpusMode};
use nalgebra::Matrix3;

fn main() {
    let mut template = default_template();
    template.accel_noise_sigma = 0.05;
    let rec = generate_corpus(&template, 1, 3, CorpusMode::TrainLike).unwrap().remove(0).recording;

    // mount the right upper arm sensor rotated 90 degrees about x
    let mishap = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
    let scramble = PlacementFix::new(SensorId::RightUpperArm, mishap).unwrap();
    let bad = apply_placement_fix(&rec, &scramble).unwrap();

    // frames 0..50 are before the first lift, so the subject is still
    let fix = detect_placement_anomaly(
        &bad,
        SensorId::RightUpperArm,
        SensorId::UpperBack,
        0..50,
        DEFAULT_ANOMALY_THRESHOLD_DEG,
    )
    .unwrap()
    .expect("anomaly detected");
    println!("detected misplacement on {}", fix.sensor.name());

    let fixed = apply_placement_fix(&bad, &fix).unwrap();
    let worst: f64 = fixed
        .frames
        .iter()
        .zip(&rec.frames)
        .flat_map(|(a, b)| a.channels.iter().zip(&b.channels).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    println!("worst channel error after fix: {worst:.2e}");

    // the unaffected sensors were never touched
    let untouched = detect_placement_anomaly(
        &fixed,
        SensorId::RightUpperArm,
        SensorId::UpperBack,
        0..50,
        DEFAULT_ANOMALY_THRESHOLD_DEG,
    )
    .unwrap();
    assert!(untouched.is_none());
    println!("re-check after repair: no anomaly");
}
