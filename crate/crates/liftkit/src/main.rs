//! Thin CLI over [`liftkit::pipeline`]. Flag values override the `--config`
//! file, which overrides built-in defaults. Exit codes: 0 success, 1 usage
//! error, 2 data/validation error, 3 internal error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use liftkit::pipeline::commands as cmd;
use liftkit::pipeline::PipelineConfig;

#[derive(Parser)]
#[command(name = "liftkit", version, about = "IMU lift-detection pipeline")]
struct Cli {
    /// TOML pipeline configuration; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker pool size for sweeps; defaults to available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct WindowOpts {
    /// Window length in frames.
    #[arg(long)]
    window_len: Option<usize>,
    /// Stride between window starts, in frames.
    #[arg(long)]
    stride: Option<usize>,
    /// Balance classes by downsampling the majority (true/false).
    #[arg(long)]
    balance: Option<bool>,
    /// Seed for balancing and derived sweep seeds.
    #[arg(long)]
    seed: Option<u64>,
}

impl WindowOpts {
    fn into_flags(self) -> cmd::WindowFlags {
        cmd::WindowFlags {
            window_len: self.window_len,
            stride: self.stride,
            balance: self.balance,
            seed: self.seed,
        }
    }
}

#[derive(Args, Default)]
struct SweepOpts {
    /// Directory of training recordings (*.rec with *.labels).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Directory of evaluation recordings; defaults to the training data.
    #[arg(long)]
    eval_data: Option<PathBuf>,
    /// Output directory for catalogs and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training seeds, one catalog row per seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Decision threshold on the lift probability.
    #[arg(long)]
    threshold: Option<f64>,
    #[command(flatten)]
    window: WindowOpts,
    /// LSTM hidden width.
    #[arg(long)]
    lstm_hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// End-of-lift policy for label files: derive|provided.
    #[arg(long)]
    eol: Option<String>,
}

impl SweepOpts {
    fn into_args(self) -> cmd::SweepArgs {
        cmd::SweepArgs {
            data: self.data,
            eval_data: self.eval_data,
            out: self.out,
            seeds: self.seeds,
            threshold: self.threshold,
            window: self.window.into_flags(),
            lstm_hidden: self.lstm_hidden,
            epochs: self.epochs,
            batch_size: self.batch_size,
            eol: self.eol,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        /// trainlike|fieldlike
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Trial duration in seconds.
        #[arg(long)]
        duration_s: Option<f64>,
    },
    /// Parse and invariant-check a corpus directory.
    Validate {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        eol: Option<String>,
    },
    /// Align wall-clock labels to frame indices and report them.
    Sync {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        eol: Option<String>,
    },
    /// Apply a known label time offset, or estimate one with a model.
    FixOffset {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Offset to apply, in frames (positive shifts labels later).
        #[arg(long, allow_hyphen_values = true)]
        offset: Option<i64>,
        /// Model used to score recordings when estimating the offset.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        max_lag: Option<usize>,
        #[arg(long)]
        eol: Option<String>,
    },
    /// Detect (and optionally repair) a misoriented sensor mount.
    FixPlacement {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sensor suspected of misplacement.
        #[arg(long)]
        suspect: Option<String>,
        /// Correctly mounted reference sensor.
        #[arg(long)]
        reference: Option<String>,
        /// Length of the still period at the start, in frames.
        #[arg(long)]
        still_frames: Option<usize>,
        #[arg(long)]
        threshold_deg: Option<f64>,
        /// Write corrected recordings instead of only reporting.
        #[arg(long)]
        apply: bool,
    },
    /// Slice a corpus into a labeled, balanced window dataset.
    Window {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        window: WindowOpts,
        /// Attitude filter applied before slicing: none|mahony|ekf.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        eol: Option<String>,
    },
    /// Train the LSTM classifier on a corpus directory or dataset file.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        window: WindowOpts,
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        eol: Option<String>,
        #[arg(long)]
        lstm_hidden: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        validation_split: Option<f64>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Evaluate a saved model; writes metrics and a one-row catalog.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        window: WindowOpts,
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        eol: Option<String>,
    },
    /// Hyperparameter grid search; writes catalog and summary CSVs.
    Grid {
        #[command(flatten)]
        sweep: SweepOpts,
        #[arg(long, value_delimiter = ',')]
        batch_sizes: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        window_lens: Option<Vec<usize>>,
        #[arg(long = "epochs-axis", value_delimiter = ',')]
        epochs_axis: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        validation_splits: Option<Vec<f64>>,
    },
    /// Sensor-subset ablation sweep.
    Ablate {
        #[command(flatten)]
        sweep: SweepOpts,
        /// Subsets as "+"-joined sensor names, comma-separated.
        #[arg(long, value_delimiter = ',')]
        subsets: Option<Vec<String>>,
    },
    /// Train and evaluate under each attitude filter.
    FilterCompare {
        #[command(flatten)]
        sweep: SweepOpts,
        /// Filters to compare, comma-separated: none,mahony,ekf.
        #[arg(long, value_delimiter = ',')]
        filters: Option<Vec<String>>,
    },
    /// Gradient saliency ranking and heatmap for a saved model.
    Saliency {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        window: WindowOpts,
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        eol: Option<String>,
    },
    /// Re-summarize catalog CSVs into a report summary.
    Report {
        #[arg(long = "catalog", required = true)]
        catalogs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> liftkit::pipeline::Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Synth { out, trials, mode, seed, duration_s } => {
            cmd::run_synth(&cmd::SynthArgs { out, trials, mode, seed, duration_s }, &cfg)
        }
        Command::Validate { data, out, eol } => {
            cmd::run_validate(&cmd::ValidateArgs { data, out, eol }, &cfg)
        }
        Command::Sync { data, out, eol } => cmd::run_sync(&cmd::SyncArgs { data, out, eol }, &cfg),
        Command::FixOffset { data, out, offset, model, max_lag, eol } => cmd::run_fix_offset(
            &cmd::FixOffsetArgs { data, out, offset, model, max_lag, eol },
            &cfg,
        ),
        Command::FixPlacement {
            data,
            out,
            suspect,
            reference,
            still_frames,
            threshold_deg,
            apply,
        } => cmd::run_fix_placement(
            &cmd::FixPlacementArgs {
                data,
                out,
                suspect,
                reference,
                still_frames,
                threshold_deg,
                apply,
            },
            &cfg,
        ),
        Command::Window { data, out, window, filter, eol } => cmd::run_window(
            &cmd::WindowArgs { data, out, window: window.into_flags(), filter, eol },
            &cfg,
        ),
        Command::Train {
            data,
            out,
            window,
            filter,
            eol,
            lstm_hidden,
            batch_size,
            epochs,
            validation_split,
            learning_rate,
        } => {
            let seed = window.seed;
            cmd::run_train(
                &cmd::TrainArgs {
                    data,
                    out,
                    window: window.into_flags(),
                    filter,
                    eol,
                    lstm_hidden,
                    batch_size,
                    epochs,
                    validation_split,
                    learning_rate,
                    seed,
                },
                &cfg,
            )
        }
        Command::Eval { model, data, out, threshold, window, filter, eol } => cmd::run_eval(
            &cmd::EvalArgs {
                model,
                data,
                out,
                threshold,
                window: window.into_flags(),
                filter,
                eol,
            },
            &cfg,
        ),
        Command::Grid { sweep, batch_sizes, window_lens, epochs_axis, validation_splits } => {
            cmd::run_grid(
                &cmd::GridArgs {
                    sweep: sweep.into_args(),
                    batch_sizes,
                    window_lens,
                    epochs_axis,
                    validation_splits,
                },
                &cfg,
            )
        }
        Command::Ablate { sweep, subsets } => {
            cmd::run_ablate(&cmd::AblateArgs { sweep: sweep.into_args(), subsets }, &cfg)
        }
        Command::FilterCompare { sweep, filters } => cmd::run_filter_compare(
            &cmd::FilterCompareArgs { sweep: sweep.into_args(), filters },
            &cfg,
        ),
        Command::Saliency { model, data, out, window, filter, eol } => cmd::run_saliency(
            &cmd::SaliencyArgs { model, data, out, window: window.into_flags(), filter, eol },
            &cfg,
        ),
        Command::Report { catalogs, out } => {
            cmd::run_report(&cmd::ReportArgs { catalogs, out }, &cfg)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too; only real parse errors exit 1
            let is_usage = e.use_stderr();
            let _ = e.print();
            std::process::exit(if is_usage { 1 } else { 0 });
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("liftkit: {e}");
        std::process::exit(e.exit_code());
    }
}
