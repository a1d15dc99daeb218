//! The core pipeline in one file: synthesize a corpus, slice and balance
//! windows, train the classifier, and score a held-out corpus.
//!
//! Run with: cargo run --release --example train_and_eval

use liftkit::evalkit::evaluate;
use liftkit::liftnet::{init_model, train};
use liftkit::synthgen::{default_template, generate_corpus, CorpusMode};
use liftkit::windowing::{balance, slice_windows, SliceConfig};
use liftkit::{LabeledRecording, ModelConfig, TrainConfig};

fn dataset(recs: &[LabeledRecording], seed: u64) -> liftkit::Dataset {
    let cfg = SliceConfig::new(10, 3);
    let mut windows = Vec::new();
    for lr in recs {
        windows.extend(slice_windows(lr, &cfg).unwrap());
    }
    let layout = recs[0].recording.channel_names();
    balance(windows, cfg.window_len, layout, seed).unwrap()
}

fn main() {
    let template = default_template();
    let train_ds = dataset(&generate_corpus(&template, 12, 1, CorpusMode::TrainLike).unwrap(), 10);
    let eval_ds = dataset(&generate_corpus(&template, 4, 2, CorpusMode::TrainLike).unwrap(), 20);
    println!(
        "train: {} windows, eval: {} windows, {} channels",
        train_ds.windows.len(),
        eval_ds.windows.len(),
        train_ds.n_channels()
    );

    let mut mc = ModelConfig::new(10, train_ds.n_channels(), 7);
    mc.lstm_hidden = 16;
    mc.channel_layout = train_ds.channel_layout.clone();
    let model = init_model(&mc).unwrap();

    let tc = TrainConfig { epochs: 12, ..TrainConfig::default() };
    let (trained, history) = train(&model, &train_ds, &tc).unwrap();
    for (epoch, (loss, acc)) in
        history.train_loss.iter().zip(&history.val_accuracy).enumerate().step_by(3)
    {
        println!("epoch {epoch:>2}: train loss {loss:.4}, val accuracy {acc:.3}");
    }

    let (metrics, cm) = evaluate(&trained, &eval_ds, 0.5).unwrap();
    println!(
        "\nheld-out: f1 {:.4}, precision {:.4}, recall {:.4} (tp {}, fp {}, tn {}, fn {})",
        metrics.f1, metrics.precision, metrics.recall, cm.tp, cm.fp, cm.tn, cm.fn_
    );
}
