//! Cross a small hyperparameter grid and print the resulting catalog.
//! Every row carries its own derived seed, so the whole sweep reruns
//! byte-identically.
//!
//! Run with: cargo run --release --example grid_search

use liftkit::evalkit::{catalog_csv, grid_search, summarize, summary_csv, DataSources, GridAxes, SweepConfig};
use liftkit::synthgen::{default_template, generate_corpus, CorpusMode};
use liftkit::TrainConfig;

fn main() {
    let template = default_template();
    let train = generate_corpus(&template, 6, 21, CorpusMode::TrainLike).unwrap();
    let eval = generate_corpus(&template, 3, 22, CorpusMode::TrainLike).unwrap();
    let sources = DataSources { train: &train, eval: &eval };

    let axes = GridAxes {
        batch_size: vec![16, 32],
        window_len: vec![10, 25],
        epochs: vec![6],
        validation_split: vec![0.2],
    };
    let cfg = SweepConfig {
        lstm_hidden: 8,
        dense_widths: vec![4],
        train: TrainConfig::default(),
        ..SweepConfig::default()
    };

    let rows = grid_search(&sources, &axes, &cfg).unwrap();
    print!("{}", catalog_csv(&rows));

    let best = rows
        .iter()
        .filter_map(|r| r.eval_metrics.map(|m| (m.f1, r)))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    println!("\nbest combination: {} (eval f1 {:.4})", best.1.id, best.0);

    print!("\n{}", summary_csv(&summarize(&rows)));
}
