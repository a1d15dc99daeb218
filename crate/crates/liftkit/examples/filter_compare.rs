//! Compare classifier quality with no attitude filtering, a Mahony filter,
//! and an EKF applied to every sensor before windowing.
//!
//! Run with: cargo run --release --example filter_compare

use liftkit::evalkit::{filter_compare, summarize, DataSources, SweepConfig};
use liftkit::fusion_filters::FilterKind;
use liftkit::synthgen::{default_template, generate_corpus, CorpusMode};
use liftkit::TrainConfig;

fn main() {
    let template = default_template();
    let train = generate_corpus(&template, 6, 31, CorpusMode::TrainLike).unwrap();
    let eval = generate_corpus(&template, 3, 32, CorpusMode::TrainLike).unwrap();
    let sources = DataSources { train: &train, eval: &eval };

    let kinds = vec![FilterKind::None, FilterKind::mahony_default(), FilterKind::ekf_default()];
    let cfg = SweepConfig {
        lstm_hidden: 8,
        dense_widths: vec![4],
        train: TrainConfig { epochs: 8, ..TrainConfig::default() },
        seeds: vec![0, 1],
        ..SweepConfig::default()
    };

    let rows = filter_compare(&sources, &kinds, &cfg).unwrap();
    for s in summarize(&rows) {
        println!(
            "{:<8} median f1 {:.4}, max f1 {:.4} over {} runs",
            s.group, s.median_f1, s.max_f1, s.n
        );
    }
}
