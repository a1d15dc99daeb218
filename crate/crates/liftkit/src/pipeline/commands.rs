//! One function per CLI subcommand. Each resolves its settings (flag over
//! config over default), does the work, writes its artifacts plus a run
//! manifest into the output directory, and prints a short summary.

use std::path::{Path, PathBuf};

use crate::attribution::{aggregate_saliency, ranking_csv, render_heatmap, saliency, Normalization, SaliencyMap};
use crate::evalkit::{
    ablation_sweep, catalog_csv, default_ablation_subsets, evaluate, filter_compare, grid_search,
    parse_catalog_csv, subset_name, summarize, summary_csv, CatalogRow, DataSources, GridAxes,
    SweepConfig,
};
use crate::fusion_filters::{apply_filter, FilterKind};
use crate::imu_core::{
    align_labels, apply_placement_fix, apply_time_offset, detect_placement_anomaly,
    estimate_time_offset, parse_labels, parse_recording, restrict_sensors, serialize_labels,
    serialize_recording, EolPolicy, LabeledRecording, SensorId, DEFAULT_ANOMALY_THRESHOLD_DEG,
};
use crate::liftnet::{init_model, load_model, save_model, score_recording, train, ModelConfig, TrainConfig};
use crate::synthgen::{default_template, generate_corpus, raw_labels, CorpusMode};
use crate::windowing::{balance, slice_windows, Dataset, Label, SliceConfig};

use super::config::{pick, FilterSection, PipelineConfig, WindowingSection};
use super::manifest::ManifestBuilder;
use super::{data, internal, PipelineError, Result};

const DEFAULT_WINDOW_LEN: usize = 25;
const DEFAULT_STRIDE: usize = 10;
const DEFAULT_MAX_LAG: usize = 25;
const DEFAULT_THRESHOLD: f64 = 0.5;
const DEFAULT_LSTM_HIDDEN: usize = 128;

fn resolve_path(flag: &Option<PathBuf>, config: &Option<String>, what: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| config.as_ref().map(PathBuf::from))
        .ok_or_else(|| PipelineError::Usage(format!("{what} not given (flag or config)")))
}

fn resolve_out(flag: &Option<PathBuf>, config: &Option<String>) -> Result<PathBuf> {
    let dir = flag.clone().or_else(|| config.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)
        .map_err(|e| PipelineError::Internal(format!("creating {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_artifact(mb: &mut ManifestBuilder, path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| PipelineError::Internal(format!("writing {}: {e}", path.display())))?;
    mb.output(path);
    Ok(())
}

fn parse_eol(flag: &Option<String>) -> Result<EolPolicy> {
    match flag.as_deref() {
        None | Some("derive") => Ok(EolPolicy::DeriveFromBol),
        Some("provided") => Ok(EolPolicy::UseProvided),
        Some(other) => Err(PipelineError::Usage(format!(
            "unknown eol policy {other:?} (expected derive|provided)"
        ))),
    }
}

fn parse_sensor(name: &str) -> Result<SensorId> {
    SensorId::parse(name)
        .ok_or_else(|| PipelineError::Usage(format!("unknown sensor {name:?}")))
}

fn parse_subset(spec: &str) -> Result<Vec<SensorId>> {
    spec.split('+').map(|s| parse_sensor(s.trim())).collect()
}

/// Resolves the filter kind and its parameters. A flag names the kind; the
/// `[filter]` config section supplies the kind default and the gains.
fn resolve_filter(flag: &Option<String>, section: &FilterSection) -> Result<FilterKind> {
    let name = flag.clone().or_else(|| section.kind.clone()).unwrap_or_else(|| "none".into());
    let mut kind = FilterKind::parse(&name)
        .ok_or_else(|| PipelineError::Usage(format!("unknown filter {name:?}")))?;
    match &mut kind {
        FilterKind::None => {}
        FilterKind::Mahony { kp, ki } => {
            if let Some(v) = section.kp {
                *kp = v;
            }
            if let Some(v) = section.ki {
                *ki = v;
            }
        }
        FilterKind::Ekf { sigma_g, sigma_a } => {
            if let Some(v) = section.sigma_g {
                *sigma_g = v;
            }
            if let Some(v) = section.sigma_a {
                *sigma_a = v;
            }
        }
    }
    Ok(kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    Required,
    Optional,
}

/// Loads every `*.rec` in `dir` (sorted by file name) with its sibling
/// `*.labels` file when present.
pub fn load_corpus(
    dir: &Path,
    eol: EolPolicy,
    labels: LabelMode,
    mb: &mut ManifestBuilder,
) -> Result<Vec<LabeledRecording>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| PipelineError::Data(format!("reading {}: {e}", dir.display())))?;
    let mut rec_paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |x| x == "rec"))
        .collect();
    rec_paths.sort();
    if rec_paths.is_empty() {
        return Err(PipelineError::Data(format!("no .rec recordings in {}", dir.display())));
    }
    let mut out = Vec::with_capacity(rec_paths.len());
    for path in rec_paths {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PipelineError::Data(format!("reading {}: {e}", path.display())))?;
        mb.input(&path);
        let rec = parse_recording(&text)
            .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
        let label_path = path.with_extension("labels");
        let lr = if label_path.exists() {
            let label_text = std::fs::read_to_string(&label_path)
                .map_err(|e| PipelineError::Data(format!("reading {}: {e}", label_path.display())))?;
            mb.input(&label_path);
            let raw = parse_labels(&label_text)
                .map_err(|e| PipelineError::Data(format!("{}: {e}", label_path.display())))?;
            align_labels(&rec, &raw, eol)
                .map_err(|e| PipelineError::Data(format!("{}: {e}", label_path.display())))?
        } else {
            if labels == LabelMode::Required {
                return Err(PipelineError::Data(format!(
                    "missing label file {}",
                    label_path.display()
                )));
            }
            LabeledRecording::all_nonlift(rec)
        };
        out.push(lr);
    }
    Ok(out)
}

fn filter_corpus(corpus: Vec<LabeledRecording>, kind: FilterKind) -> Result<Vec<LabeledRecording>> {
    if kind == FilterKind::None {
        return Ok(corpus);
    }
    corpus
        .into_iter()
        .map(|lr| {
            Ok(LabeledRecording {
                recording: apply_filter(&lr.recording, kind)?,
                lifts: lr.lifts,
                applied_offset_frames: lr.applied_offset_frames,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct WindowFlags {
    pub window_len: Option<usize>,
    pub stride: Option<usize>,
    pub balance: Option<bool>,
    pub seed: Option<u64>,
}

struct ResolvedWindowing {
    window_len: usize,
    stride: usize,
    balance: bool,
    seed: u64,
    discard_ambiguous: bool,
}

fn resolve_windowing(flags: &WindowFlags, section: &WindowingSection) -> ResolvedWindowing {
    ResolvedWindowing {
        window_len: pick(flags.window_len, section.window_len, DEFAULT_WINDOW_LEN),
        stride: pick(flags.stride, section.stride, DEFAULT_STRIDE),
        balance: pick(flags.balance, section.balance, true),
        seed: pick(flags.seed, section.seed, 0),
        discard_ambiguous: section.discard_ambiguous.unwrap_or(false),
    }
}

fn build_dataset(corpus: &[LabeledRecording], w: &ResolvedWindowing) -> Result<Dataset> {
    let mut cfg = SliceConfig::new(w.window_len, w.stride);
    cfg.discard_ambiguous = w.discard_ambiguous;
    let mut windows = Vec::new();
    let mut layout = Vec::new();
    for lr in corpus {
        layout = lr.recording.channel_names();
        windows.extend(slice_windows(lr, &cfg)?);
    }
    if w.balance {
        Ok(balance(windows, w.window_len, layout, w.seed)?)
    } else {
        Ok(Dataset::new(windows, w.window_len, layout)?)
    }
}

/// `path` may be a corpus directory (windowed on the fly) or a dataset file
/// written by the `window` command.
fn load_dataset_source(
    path: &Path,
    flags: &WindowFlags,
    filter_flag: &Option<String>,
    eol_flag: &Option<String>,
    cfg: &PipelineConfig,
    mb: &mut ManifestBuilder,
) -> Result<Dataset> {
    if path.is_dir() {
        let corpus = load_corpus(path, parse_eol(eol_flag)?, LabelMode::Required, mb)?;
        let corpus = filter_corpus(corpus, resolve_filter(filter_flag, &cfg.filter)?)?;
        build_dataset(&corpus, &resolve_windowing(flags, &cfg.windowing))
    } else {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Data(format!("reading {}: {e}", path.display())))?;
        mb.input(path);
        Ok(crate::windowing::parse_dataset(&text)?)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SynthArgs {
    pub out: Option<PathBuf>,
    pub trials: Option<usize>,
    pub mode: Option<String>,
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
}

pub fn run_synth(a: &SynthArgs, cfg: &PipelineConfig) -> Result<()> {
    let out = resolve_out(&a.out, &cfg.paths.out)?;
    let trials = pick(a.trials, cfg.synth.trials, 20);
    let mode_name = pick(a.mode.clone(), cfg.synth.mode.clone(), "trainlike".into());
    let mode = CorpusMode::parse(&mode_name)
        .ok_or_else(|| PipelineError::Usage(format!("unknown corpus mode {mode_name:?}")))?;
    let seed = pick(a.seed, cfg.synth.seed, 0);
    let mut template = default_template();
    if let Some(d) = a.duration_s.or(cfg.synth.duration_s) {
        template.duration_s = d;
        // a shortened trial keeps only the lifts that still fit
        template.lifts.retain(|l| l.bol_s + l.duration_s < d);
    }
    let mut mb = ManifestBuilder::new("synth", cfg)?;
    mb.seed("base", seed);
    let corpus = generate_corpus(&template, trials, seed, mode)?;
    for (i, lr) in corpus.iter().enumerate() {
        let trial = &lr.recording.trial_id;
        mb.seed(trial, crate::derive_seed(seed, i as u64));
        write_artifact(&mut mb, &out.join(format!("{trial}.rec")), &serialize_recording(&lr.recording))?;
        write_artifact(&mut mb, &out.join(format!("{trial}.labels")), &serialize_labels(&raw_labels(lr)))?;
    }
    mb.write(&out)?;
    println!("synth: wrote {} {} recordings to {}", corpus.len(), mode.name(), out.display());
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct ValidateArgs {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub eol: Option<String>,
}

pub fn run_validate(a: &ValidateArgs, cfg: &PipelineConfig) -> Result<()> {
    let dir = resolve_path(&a.data, &cfg.paths.data, "--data")?;
    let out = resolve_out(&a.out, &cfg.paths.out)?;
    let mut mb = ManifestBuilder::new("validate", cfg)?;
    let corpus = load_corpus(&dir, parse_eol(&a.eol)?, LabelMode::Optional, &mut mb)?;
    for lr in &corpus {
        lr.recording.validate()?;
        println!(
            "{}: {} frames, {} sensors, {} lifts ok",
            lr.recording.trial_id,
            lr.recording.len(),
            lr.recording.active_sensors.len(),
            lr.lifts.len()
        );
    }
    mb.write(&out)?;
    println!("validate: {} recordings ok", corpus.len());
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct SyncArgs {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub eol: Option<String>,
}

pub fn run_sync(a: &SyncArgs, cfg: &PipelineConfig) -> Result<()> {
    let dir = resolve_path(&a.data, &cfg.paths.data, "--data")?;
    let out = resolve_out(&a.out, &cfg.paths.out)?;
    let mut mb = ManifestBuilder::new("sync", cfg)?;
    let corpus = load_corpus(&dir, parse_eol(&a.eol)?, LabelMode::Required, &mut mb)?;
    let mut csv = String::from("trial,lift,bol_frame,eol_frame\n");
    for lr in &corpus {
        for (i, lift) in lr.lifts.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                lr.recording.trial_id, i, lift.bol_frame, lift.eol_frame
            ));
        }
        println!("{}: {} lifts aligned", lr.recording.trial_id, lr.lifts.len());
    }
    write_artifact(&mut mb, &out.join("sync.csv"), &csv)?;
    mb.write(&out)?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct FixOffsetArgs {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub offset: Option<i64>,
    pub model: Option<PathBuf>,
    pub max_lag: Option<usize>,
    pub eol: Option<String>,
}

pub fn run_fix_offset(a: &FixOffsetArgs, cfg: &PipelineConfig) -> Result<()> {
    let dir = resolve_path(&a.data, &cfg.paths.data, "--data")?;
    let out = resolve_out(&a.out, &cfg.paths.out)?;
    if a.offset.is_none() && a.model.is_none() && cfg.paths.model.is_none() {
        return Err(PipelineError::Usage(
            "need either --offset or a model (--model) to estimate one".into(),
        ));
    }
    let mut mb = ManifestBuilder::new("fix-offset", cfg)?;
    let corpus = load_corpus(&dir, parse_eol(&a.eol)?, LabelMode::Required, &mut mb)?;
    let model = match a.offset {
        Some(_) => None,
        None => {
            let path = resolve_path(&a.model, &cfg.paths.model, "--model")?;
            mb.input(&path);
            Some(load_model(&path, None)?)
        }
    };
    let max_lag = a.max_lag.unwrap_or(DEFAULT_MAX_LAG);
    let mut csv = String::from("trial,offset_frames\n");
    for lr in &corpus {
        let offset = match (a.offset, &model) {
            (Some(k), _) => k,
            (None, Some(m)) => {
                let scores = score_recording(m, &lr.recording, 1)?;
                estimate_time_offset(&scores, lr, max_lag)?
            }
            (None, None) => unreachable!(),
        };
        let fixed = apply_time_offset(lr, offset)?;
        csv.push_str(&format!("{},{}\n", lr.recording.trial_id, offset));
        write_artifact(
            &mut mb,
            &out.join(format!("{}.labels", lr.recording.trial_id)),
            &serialize_labels(&raw_labels(&fixed)),
        )?;
        println!("{}: offset {} frames", lr.recording.trial_id, offset);
    }
    write_artifact(&mut mb, &out.join("offsets.csv"), &csv)?;
    mb.write(&out)?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct FixPlacementArgs {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub suspect: Option<String>,
    pub reference: Option<String>,
    pub still_frames: Option<usize>,
    pub threshold_deg: Option<f64>,
    pub apply: bool,
}

pub fn run_fix_placement(a: &FixPlacementArgs, cfg: &PipelineConfig) -> Result<()> {
    let dir = resolve_path(&a.data, &cfg.paths.data, "--data")?;
    let out = resolve_out(&a.out, &cfg.paths.out)?;
    let suspect = parse_sensor(a.suspect.as_deref().unwrap_or("right_upper_arm"))?;
    let reference = parse_sensor(a.reference.as_deref().unwrap_or("upper_back"))?;
    let still = a.still_frames.unwrap_or(50);
    let threshold = a.threshold_deg.unwrap_or(DEFAULT_ANOMALY_THRESHOLD_DEG);
    let mut mb = ManifestBuilder::new("fix-placement", cfg)?;
    let corpus = load_corpus(&dir, EolPolicy::DeriveFromBol, LabelMode::Optional, &mut mb)?;
    let mut csv = String::from("trial,sensor,status\n");
    for lr in &corpus {
        let fix =
            detect_placement_anomaly(&lr.recording, suspect, reference, 0..still, threshold)?;
        let status = match &fix {
            Some(_) if a.apply => "fixed",
            Some(_) => "flagged",
            None => "ok",
        };
        csv.push_str(&format!("{},{},{status}\n", lr.recording.trial_id, suspect.name()));
        println!("{}: {} {status}", lr.recording.trial_id, suspect.name());
        if a.apply {
            let rec = match &fix {
                Some(f) => apply_placement_fix(&lr.recording, f)?,
                None => lr.recording.clone(),
            };
            write_artifact(
                &mut mb,
                &out.join(format!("{}.rec", lr.recording.trial_id)),
                &serialize_recording(&rec),
            )?;
            if !lr.lifts.is_empty() {
                write_artifact(
                    &mut mb,
                    &out.join(format!("{}.labels", lr.recording.trial_id)),
                    &serialize_labels(&raw_labels(lr)),
                )?;
            }
        }
    }
    write_artifact(&mut mb, &out.join("placement_report.csv"), &csv)?;
    mb.write(&out)?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct WindowArgs {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub window: WindowFlags,
    pub filter: Option<String>,
    pub eol: Option<String>,
}

pub fn run_window(a: &WindowArgs, cfg: &PipelineConfig) -> Result<()> {
    let dir = resolve_path(&a.data, &cfg.paths.data, "--data")?;
    let out = resolve_out(&a.out, &cfg.paths.out)?;
    let mut mb = ManifestBuilder::new("window", cfg)?;
    let corpus = load_corpus(&dir, parse_eol(&a.eol)?, LabelMode::Required, &mut mb)?;
    let corpus = filter_corpus(corpus, resolve_filter(&a.filter, &cfg.filter)?)?;
    let w = resolve_windowing(&a.window, &cfg.windowing);
    mb.seed("balance", w.seed);
    let ds = build_dataset(&corpus, &w)?;
    let lifts = ds.class_count(Label::Lift);
    let nonlifts = ds.class_count(Label::NonLift);
    write_artifact(&mut mb, &out.join("dataset.ds"), &crate::windowing::serialize_dataset(&ds))?;
    mb.write(&out)?;
    println!(
        "window: {} windows of {}×{} ({} lift / {} non-lift)",
        ds.windows.len(),
        ds.window_len,
        ds.n_channels(),
        lifts,
        nonlifts
    );
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct TrainArgs {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub window: WindowFlags,
    pub filter: Option<String>,
    pub eol: Option<String>,
    pub lstm_hidden: Option<usize>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub validation_split: Option<f64>,
    pub learning_rate: Option<f64>,
    pub seed: Option<u64>,
}

fn resolve_train_config(a: &TrainArgs, cfg: &PipelineConfig) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        batch_size: pick(a.batch_size, cfg.train.batch_size, d.batch_size),
        epochs: pick(a.epochs, cfg.train.epochs, d.epochs),
        validation_split: pick(a.validation_split, cfg.train.validation_split, d.validation_split),
        learning_rate: pick(a.learning_rate, cfg.train.learning_rate, d.learning_rate),
        seed: pick(a.seed, cfg.train.seed, d.seed),
    }
}

pub fn run_train(a: &TrainArgs, cfg: &PipelineConfig) -> Result<()> {
    let source = resolve_path(&a.data, &cfg.paths.data, "--data")?;
    let out = resolve_out(&a.out, &cfg.paths.out)?;
    let mut mb = ManifestBuilder::new("train", cfg)?;
    let ds = load_dataset_source(&source, &a.window, &a.filter, &a.eol, cfg, &mut mb)?;
    let tc = resolve_train_config(a, cfg);
    let model_cfg = ModelConfig {
        window_len: ds.window_len,
        n_channels: ds.n_channels(),
        lstm_hidden: pick(a.lstm_hidden, cfg.model.lstm_hidden, DEFAULT_LSTM_HIDDEN),
        dense_widths: cfg.model.dense_widths.clone().unwrap_or_else(|| vec![5, 5]),
        seed: pick(a.seed, cfg.model.seed, tc.seed),
        channel_layout: ds.channel_layout.clone(),
    };
    mb.seed("model_init", model_cfg.seed);
    mb.seed("train", tc.seed);
    let model = init_model(&model_cfg)?;
    let (trained, history) = train(&model, &ds, &tc)?;
    let model_path = out.join("model.json");
    save_model(&trained, &model_path)?;
    mb.output(&model_path);
    let mut hist_csv = String::from("epoch,train_loss,val_loss,val_accuracy\n");
    for e in 0..history.train_loss.len() {
        hist_csv.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            e, history.train_loss[e], history.val_loss[e], history.val_accuracy[e]
        ));
    }
    write_artifact(&mut mb, &out.join("history.csv"), &hist_csv)?;
    mb.write(&out)?;
    println!(
        "train: {} epochs, final val accuracy {:.4}",
        history.train_loss.len(),
        history.val_accuracy.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct EvalArgs {
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub window: WindowFlags,
    pub filter: Option<String>,
    pub eol: Option<String>,
}

pub fn run_eval(a: &EvalArgs, cfg: &PipelineConfig) -> Result<()> {
    let model_path = resolve_path(&a.model, &cfg.paths.model, "--model")?;
    let source = resolve_path(&a.data, &cfg.paths.data, "--data")?;
    let out = resolve_out(&a.out, &cfg.paths.out)?;
    let threshold = pick(a.threshold, cfg.sweep.threshold, DEFAULT_THRESHOLD);
    let mut mb = ManifestBuilder::new("eval", cfg)?;
    let ds = load_dataset_source(&source, &a.window, &a.filter, &a.eol, cfg, &mut mb)?;
    mb.input(&model_path);
    let model = load_model(&model_path, Some(&ds.channel_layout))?;
    let (m, cm) = evaluate(&model, &ds, threshold)?;
    let row = CatalogRow {
        id: "eval-0000".into(),
        experiment: "eval".into(),
        group: "eval".into(),
        params: vec![("threshold".into(), format!("{threshold}"))],
        seed: model.config.seed,
        train_metrics: None,
        eval_metrics: Some(m),
        confusion: Some(cm),
        error: None,
    };
    write_artifact(&mut mb, &out.join("eval_catalog.csv"), &catalog_csv(&[row]))?;
    write_artifact(
        &mut mb,
        &out.join("metrics.json"),
        &serde_json::to_string_pretty(&m).map_err(internal)?,
    )?;
    mb.write(&out)?;
    println!(
        "eval: accuracy {:.4}, precision {:.4}, recall {:.4}, f1 {:.4} over {} windows",
        m.accuracy,
        m.precision,
        m.recall,
        m.f1,
        cm.total()
    );
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct SweepArgs {
    pub data: Option<PathBuf>,
    pub eval_data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub threshold: Option<f64>,
    pub window: WindowFlags,
    pub lstm_hidden: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub eol: Option<String>,
}

fn resolve_sweep_config(a: &SweepArgs, cfg: &PipelineConfig) -> SweepConfig {
    let mut sc = SweepConfig::default();
    sc.window_len = pick(a.window.window_len, cfg.windowing.window_len, sc.window_len);
    sc.train_stride = pick(a.window.stride, cfg.windowing.stride, sc.train_stride);
    sc.eval_stride = pick(None, cfg.windowing.eval_stride, sc.eval_stride);
    sc.lstm_hidden = pick(a.lstm_hidden, cfg.model.lstm_hidden, sc.lstm_hidden);
    if let Some(widths) = &cfg.model.dense_widths {
        sc.dense_widths = widths.clone();
    }
    sc.train.batch_size = pick(a.batch_size, cfg.train.batch_size, sc.train.batch_size);
    sc.train.epochs = pick(a.epochs, cfg.train.epochs, sc.train.epochs);
    if let Some(v) = cfg.train.validation_split {
        sc.train.validation_split = v;
    }
    if let Some(v) = cfg.train.learning_rate {
        sc.train.learning_rate = v;
    }
    sc.threshold = pick(a.threshold, cfg.sweep.threshold, sc.threshold);
    sc.base_seed = pick(a.window.seed, cfg.sweep.base_seed, sc.base_seed);
    sc.seeds = a.seeds.clone().or_else(|| cfg.sweep.seeds.clone()).unwrap_or_else(|| vec![0]);
    sc.balanced_eval = cfg.sweep.balanced_eval.unwrap_or(true);
    sc
}

fn load_sweep_sources(
    a: &SweepArgs,
    cfg: &PipelineConfig,
    mb: &mut ManifestBuilder,
) -> Result<(Vec<LabeledRecording>, Vec<LabeledRecording>)> {
    let train_dir = resolve_path(&a.data, &cfg.paths.data, "--data")?;
    let eol = parse_eol(&a.eol)?;
    let train = load_corpus(&train_dir, eol, LabelMode::Required, mb)?;
    let eval = match a.eval_data.clone().or_else(|| cfg.paths.eval_data.as_ref().map(PathBuf::from)) {
        Some(dir) => load_corpus(&dir, eol, LabelMode::Required, mb)?,
        None => train.clone(),
    };
    Ok((train, eval))
}

fn write_sweep_outputs(
    mb: &mut ManifestBuilder,
    out: &Path,
    prefix: &str,
    rows: &[CatalogRow],
) -> Result<()> {
    let summary = summarize(rows);
    write_artifact(mb, &out.join(format!("{prefix}_catalog.csv")), &catalog_csv(rows))?;
    write_artifact(mb, &out.join(format!("{prefix}_summary.csv")), &summary_csv(&summary))?;
    for s in &summary {
        println!(
            "{prefix} {}: median f1 {:.4}, max f1 {:.4} over {} runs ({} failed)",
            s.group, s.median_f1, s.max_f1, s.n, s.n_failed
        );
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct GridArgs {
    pub sweep: SweepArgs,
    pub batch_sizes: Option<Vec<usize>>,
    pub window_lens: Option<Vec<usize>>,
    pub epochs_axis: Option<Vec<usize>>,
    pub validation_splits: Option<Vec<f64>>,
}

pub fn run_grid(a: &GridArgs, cfg: &PipelineConfig) -> Result<()> {
    let out = resolve_out(&a.sweep.out, &cfg.paths.out)?;
    let mut mb = ManifestBuilder::new("grid", cfg)?;
    let (train, eval) = load_sweep_sources(&a.sweep, cfg, &mut mb)?;
    let sc = resolve_sweep_config(&a.sweep, cfg);
    mb.seed("base", sc.base_seed);
    let defaults = GridAxes::default();
    let axes = GridAxes {
        batch_size: a.batch_sizes.clone().or_else(|| cfg.grid.batch_size.clone()).unwrap_or(defaults.batch_size),
        window_len: a.window_lens.clone().or_else(|| cfg.grid.window_len.clone()).unwrap_or(defaults.window_len),
        epochs: a.epochs_axis.clone().or_else(|| cfg.grid.epochs.clone()).unwrap_or(defaults.epochs),
        validation_split: a
            .validation_splits
            .clone()
            .or_else(|| cfg.grid.validation_split.clone())
            .unwrap_or(defaults.validation_split),
    };
    let sources = DataSources { train: &train, eval: &eval };
    let rows = grid_search(&sources, &axes, &sc)?;
    write_sweep_outputs(&mut mb, &out, "grid", &rows)?;
    mb.write(&out)?;
    println!("grid: {} combinations cataloged", rows.len());
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct AblateArgs {
    pub sweep: SweepArgs,
    pub subsets: Option<Vec<String>>,
}

pub fn run_ablate(a: &AblateArgs, cfg: &PipelineConfig) -> Result<()> {
    let out = resolve_out(&a.sweep.out, &cfg.paths.out)?;
    let mut mb = ManifestBuilder::new("ablate", cfg)?;
    let (train, eval) = load_sweep_sources(&a.sweep, cfg, &mut mb)?;
    let sc = resolve_sweep_config(&a.sweep, cfg);
    let subsets = match a.subsets.clone().or_else(|| cfg.sweep.subsets.clone()) {
        Some(specs) => specs.iter().map(|s| parse_subset(s)).collect::<Result<Vec<_>>>()?,
        None => default_ablation_subsets(),
    };
    for (i, subset) in subsets.iter().enumerate() {
        mb.seed(&format!("subset_{i}_{}", subset_name(subset)), sc.base_seed);
        // restrict_sensors rejects unknown/duplicate subsets early
        restrict_sensors(&train[0].recording, subset)?;
    }
    let sources = DataSources { train: &train, eval: &eval };
    let rows = ablation_sweep(&sources, &subsets, &sc)?;
    write_sweep_outputs(&mut mb, &out, "ablation", &rows)?;
    mb.write(&out)?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct FilterCompareArgs {
    pub sweep: SweepArgs,
    pub filters: Option<Vec<String>>,
}

pub fn run_filter_compare(a: &FilterCompareArgs, cfg: &PipelineConfig) -> Result<()> {
    let out = resolve_out(&a.sweep.out, &cfg.paths.out)?;
    let mut mb = ManifestBuilder::new("filter-compare", cfg)?;
    let (train, eval) = load_sweep_sources(&a.sweep, cfg, &mut mb)?;
    let sc = resolve_sweep_config(&a.sweep, cfg);
    let names = a
        .filters
        .clone()
        .unwrap_or_else(|| vec!["none".into(), "mahony".into(), "ekf".into()]);
    let kinds = names
        .iter()
        .map(|n| resolve_filter(&Some(n.clone()), &cfg.filter))
        .collect::<Result<Vec<_>>>()?;
    let sources = DataSources { train: &train, eval: &eval };
    let rows = filter_compare(&sources, &kinds, &sc)?;
    write_sweep_outputs(&mut mb, &out, "filter", &rows)?;
    mb.write(&out)?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct SaliencyArgs {
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub window: WindowFlags,
    pub filter: Option<String>,
    pub eol: Option<String>,
}

pub fn run_saliency(a: &SaliencyArgs, cfg: &PipelineConfig) -> Result<()> {
    let model_path = resolve_path(&a.model, &cfg.paths.model, "--model")?;
    let source = resolve_path(&a.data, &cfg.paths.data, "--data")?;
    let out = resolve_out(&a.out, &cfg.paths.out)?;
    let mut mb = ManifestBuilder::new("saliency", cfg)?;
    let ds = load_dataset_source(&source, &a.window, &a.filter, &a.eol, cfg, &mut mb)?;
    mb.input(&model_path);
    let model = load_model(&model_path, Some(&ds.channel_layout))?;
    let lift_windows: Vec<_> =
        ds.windows.iter().filter(|w| w.label == Label::Lift).collect();
    if lift_windows.is_empty() {
        return Err(PipelineError::Data("no lift windows to attribute".into()));
    }
    let maps = lift_windows
        .iter()
        .map(|w| saliency(&model, &w.data))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let ranking = aggregate_saliency(&maps)?;
    let mut mean = vec![0.0; maps[0].values.len()];
    for map in &maps {
        for (m, v) in mean.iter_mut().zip(&map.values) {
            *m += v / maps.len() as f64;
        }
    }
    let mean_map = SaliencyMap {
        values: mean,
        window_len: maps[0].window_len,
        n_channels: maps[0].n_channels,
        normalization: Normalization::Raw,
    };
    let heatmap = render_heatmap(&mean_map, &ds.channel_layout)?;
    write_artifact(&mut mb, &out.join("saliency_ranking.csv"), &ranking_csv(&ranking, &ds.channel_layout))?;
    write_artifact(&mut mb, &out.join("saliency_heatmap.pgm"), &heatmap.pgm)?;
    write_artifact(&mut mb, &out.join("saliency_heatmap.csv"), &heatmap.csv)?;
    mb.write(&out)?;
    let top: Vec<&str> =
        ranking.top(3).into_iter().map(|c| ds.channel_layout[c].as_str()).collect();
    println!("saliency: {} lift windows, top channels {}", maps.len(), top.join(", "));
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct ReportArgs {
    pub catalogs: Vec<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Re-summarizes one or more catalog CSVs; needs nothing but the CSVs.
pub fn run_report(a: &ReportArgs, cfg: &PipelineConfig) -> Result<()> {
    if a.catalogs.is_empty() {
        return Err(PipelineError::Usage("need at least one --catalog file".into()));
    }
    let out = resolve_out(&a.out, &cfg.paths.out)?;
    let mut mb = ManifestBuilder::new("report", cfg)?;
    let mut rows = Vec::new();
    for path in &a.catalogs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Data(format!("reading {}: {e}", path.display())))?;
        mb.input(path);
        rows.extend(parse_catalog_csv(&text).map_err(data)?);
    }
    let summary = summarize(&rows);
    write_artifact(&mut mb, &out.join("report_summary.csv"), &summary_csv(&summary))?;
    mb.write(&out)?;
    for s in &summary {
        println!(
            "report {}: median f1 {:.4}, max f1 {:.4} ({} rows, {} failed)",
            s.group, s.median_f1, s.max_f1, s.n, s.n_failed
        );
    }
    Ok(())
}
