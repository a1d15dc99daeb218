//! Train a quick model, then ask it which input channels its lift
//! predictions depend on. Writes a PGM heatmap next to the binary output.
//!
//! Run with: cargo run --release --example saliency_heatmap

use liftkit::attribution::{aggregate_saliency, render_heatmap, saliency, Normalization, SaliencyMap};
use liftkit::liftnet::{init_model, train};
use liftkit::synthgen::{default_template, generate_corpus, CorpusMode};
use liftkit::windowing::{balance, slice_windows, Label, SliceConfig};
use liftkit::{ModelConfig, TrainConfig};

fn main() {
    let corpus = generate_corpus(&default_template(), 8, 5, CorpusMode::TrainLike).unwrap();
    let cfg = SliceConfig::new(25, 10);
    let mut windows = Vec::new();
    for lr in &corpus {
        windows.extend(slice_windows(lr, &cfg).unwrap());
    }
    let layout = corpus[0].recording.channel_names();
    let ds = balance(windows, 25, layout.clone(), 1).unwrap();

    let mut mc = ModelConfig::new(25, ds.n_channels(), 9);
    mc.lstm_hidden = 16;
    let model = init_model(&mc).unwrap();
    let (trained, _) = train(&model, &ds, &TrainConfig { epochs: 10, ..TrainConfig::default() }).unwrap();

    let maps: Vec<SaliencyMap> = ds
        .windows
        .iter()
        .filter(|w| w.label == Label::Lift)
        .map(|w| saliency(&trained, &w.data).unwrap())
        .collect();
    println!("aggregated saliency over {} lift windows", maps.len());

    let ranking = aggregate_saliency(&maps).unwrap();
    for (rank, channel) in ranking.top(6).into_iter().enumerate() {
        println!(
            "  {:>2}. {:<22} {:5.1}% of total saliency",
            rank + 1,
            layout[channel],
            100.0 * ranking.share_of(channel)
        );
    }

    // one representative window rendered as a portable graymap
    let mut mean = maps[0].clone();
    for map in &maps[1..] {
        for (m, v) in mean.values.iter_mut().zip(&map.values) {
            *m += v;
        }
    }
    for v in &mut mean.values {
        *v /= maps.len() as f64;
    }
    mean.normalization = Normalization::Raw;
    let heatmap = render_heatmap(&mean, &layout).unwrap();
    std::fs::write("saliency_heatmap.pgm", &heatmap.pgm).unwrap();
    println!("wrote saliency_heatmap.pgm ({} x {})", mean.window_len, mean.n_channels);
}
