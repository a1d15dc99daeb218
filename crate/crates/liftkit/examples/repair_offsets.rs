//! Recover a constant label-clock lag by cross-correlating lift scores
//! against the label indicator, then re-align the labels.
//!
//! Run with: cargo run --example repair_offsets

use liftkit::imu_core::{apply_time_offset, estimate_time_offset};
use liftkit::synthgen::{default_template, generate_corpus, CorpusMode};

fn main() {
    let mut template = default_template();
    template.accel_noise_sigma = 0.05;
    template.gyro_noise_sigma = 0.02;
    let lr = generate_corpus(&template, 1, 11, CorpusMode::TrainLike).unwrap().remove(0);

    // stand-in for model scores: the true per-frame lift indicator
    let scores = lr.indicator();

    for injected in [-18i64, -3, 7, 25] {
        let skewed = apply_time_offset(&lr, injected).unwrap();
        let estimated = estimate_time_offset(&scores, &skewed, 25).unwrap();
        let repaired = apply_time_offset(&skewed, estimated).unwrap();
        let ok = repaired.indicator() == lr.indicator();
        println!("injected lag {injected:>4} frames -> estimated correction {estimated:>4}, realigned: {ok}");
        assert!(ok);
    }
}
