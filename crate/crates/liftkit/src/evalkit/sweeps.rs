//! Experiment harnesses: each sweep trains one model per parameter
//! combination and emits catalog rows. Failures of individual combinations
//! are recorded in the row, not raised, so a long sweep always finishes.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::{evaluate, ConfusionMatrix, EvalError, Metrics, Result};
use crate::derive_seed;
use crate::fusion_filters::{apply_filter, FilterKind};
use crate::imu_core::{restrict_sensors, LabeledRecording, SensorId};
use crate::liftnet::{init_model, train, ModelConfig, TrainConfig};
use crate::windowing::{balance, slice_windows, Dataset, SliceConfig};

#[derive(Debug, Clone)]
pub struct DataSources<'a> {
    pub train: &'a [LabeledRecording],
    pub eval: &'a [LabeledRecording],
}

/// Knobs shared by all three sweeps. Grid axes override `window_len` and the
/// matching `train` fields per combination.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub window_len: usize,
    pub train_stride: usize,
    pub eval_stride: usize,
    pub lstm_hidden: usize,
    pub dense_widths: Vec<usize>,
    pub train: TrainConfig,
    pub threshold: f64,
    pub base_seed: u64,
    /// One row per seed in the ablation and filter sweeps.
    pub seeds: Vec<u64>,
    /// Downsample the majority class of the evaluation set too, so accuracy
    /// is comparable across sweeps. Disable to score the full slice.
    pub balanced_eval: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            window_len: 25,
            train_stride: 10,
            eval_stride: 10,
            lstm_hidden: 128,
            dense_widths: vec![5, 5],
            train: TrainConfig::default(),
            threshold: 0.5,
            base_seed: 0,
            seeds: vec![0],
            balanced_eval: true,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CatalogRow {
    pub id: String,
    pub experiment: String,
    /// Summary grouping key (sensor subset, filter name, "grid").
    pub group: String,
    pub params: Vec<(String, String)>,
    pub seed: u64,
    pub train_metrics: Option<Metrics>,
    pub eval_metrics: Option<Metrics>,
    pub confusion: Option<ConfusionMatrix>,
    pub error: Option<String>,
}

fn slice_all(
    recs: &[LabeledRecording],
    window_len: usize,
    stride: usize,
    seed: u64,
    balanced: bool,
) -> Result<Dataset> {
    let cfg = SliceConfig::new(window_len, stride);
    let mut windows = Vec::new();
    let mut layout = Vec::new();
    for lr in recs {
        layout = lr.recording.channel_names();
        windows.extend(slice_windows(lr, &cfg)?);
    }
    if balanced {
        Ok(balance(windows, window_len, layout, seed)?)
    } else {
        Ok(Dataset::new(windows, window_len, layout)?)
    }
}

/// One training + evaluation run, with every failure folded into the row.
fn run_one(
    id: String,
    experiment: &str,
    group: String,
    params: Vec<(String, String)>,
    data: std::result::Result<(Arc<Dataset>, Arc<Dataset>), String>,
    hidden: usize,
    dense_widths: &[usize],
    tc: &TrainConfig,
    threshold: f64,
) -> CatalogRow {
    let mut row = CatalogRow {
        id,
        experiment: experiment.into(),
        group,
        params,
        seed: tc.seed,
        train_metrics: None,
        eval_metrics: None,
        confusion: None,
        error: None,
    };
    let (train_ds, eval_ds) = match data {
        Ok(pair) => pair,
        Err(e) => {
            row.error = Some(e);
            return row;
        }
    };
    let run = || -> Result<(Metrics, Metrics, ConfusionMatrix)> {
        let cfg = ModelConfig {
            window_len: train_ds.window_len,
            n_channels: train_ds.n_channels(),
            lstm_hidden: hidden,
            dense_widths: dense_widths.to_vec(),
            seed: tc.seed,
            channel_layout: train_ds.channel_layout.clone(),
        };
        let model = init_model(&cfg)?;
        let (trained, _history) = train(&model, &train_ds, tc)?;
        let (train_m, _) = evaluate(&trained, &train_ds, threshold)?;
        let (eval_m, cm) = evaluate(&trained, &eval_ds, threshold)?;
        Ok((train_m, eval_m, cm))
    };
    match run() {
        Ok((train_m, eval_m, cm)) => {
            row.train_metrics = Some(train_m);
            row.eval_metrics = Some(eval_m);
            row.confusion = Some(cm);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Hyperparameter grid, crossed in this axis order: batch size, window
/// length, epochs, validation split.
#[derive(Debug, Clone)]
pub struct GridAxes {
    pub batch_size: Vec<usize>,
    pub window_len: Vec<usize>,
    pub epochs: Vec<usize>,
    pub validation_split: Vec<f64>,
}

impl Default for GridAxes {
    fn default() -> Self {
        GridAxes {
            batch_size: vec![16, 32],
            window_len: vec![10, 25],
            epochs: vec![10, 30],
            validation_split: vec![0.2],
        }
    }
}

impl GridAxes {
    pub fn len(&self) -> usize {
        self.batch_size.len() * self.window_len.len() * self.epochs.len()
            * self.validation_split.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Full Cartesian product over the grid axes. Rows come back in enumeration
/// order regardless of worker scheduling; combination `i` uses the derived
/// seed `derive_seed(base_seed, i)`.
pub fn grid_search(
    sources: &DataSources,
    axes: &GridAxes,
    cfg: &SweepConfig,
) -> Result<Vec<CatalogRow>> {
    if axes.is_empty() {
        return Err(EvalError::Shape("empty grid axis".into()));
    }
    // datasets are shared across every combination with the same window length
    let mut cache: BTreeMap<usize, std::result::Result<(Arc<Dataset>, Arc<Dataset>), String>> =
        BTreeMap::new();
    for &wl in &axes.window_len {
        cache.entry(wl).or_insert_with(|| {
            let seed = derive_seed(cfg.base_seed, wl as u64);
            let build = || -> Result<(Arc<Dataset>, Arc<Dataset>)> {
                let t = slice_all(sources.train, wl, cfg.train_stride, seed, true)?;
                let e = slice_all(
                    sources.eval,
                    wl,
                    cfg.eval_stride,
                    derive_seed(seed, 1),
                    cfg.balanced_eval,
                )?;
                Ok((Arc::new(t), Arc::new(e)))
            };
            build().map_err(|e| e.to_string())
        });
    }

    let mut combos = Vec::with_capacity(axes.len());
    for &bs in &axes.batch_size {
        for &wl in &axes.window_len {
            for &ep in &axes.epochs {
                for &vs in &axes.validation_split {
                    combos.push((bs, wl, ep, vs));
                }
            }
        }
    }

    let rows: Vec<CatalogRow> = combos
        .par_iter()
        .enumerate()
        .map(|(i, &(bs, wl, ep, vs))| {
            let tc = TrainConfig {
                batch_size: bs,
                epochs: ep,
                validation_split: vs,
                learning_rate: cfg.train.learning_rate,
                seed: derive_seed(cfg.base_seed, i as u64),
            };
            let params = vec![
                ("batch_size".into(), bs.to_string()),
                ("window_len".into(), wl.to_string()),
                ("epochs".into(), ep.to_string()),
                ("validation_split".into(), format!("{vs}")),
            ];
            run_one(
                format!("grid-{i:04}"),
                "grid",
                "grid".into(),
                params,
                cache[&wl].clone(),
                cfg.lstm_hidden,
                &cfg.dense_widths,
                &tc,
                cfg.threshold,
            )
        })
        .collect();
    Ok(rows)
}

pub fn subset_name(subset: &[SensorId]) -> String {
    subset.iter().map(|s| s.name()).collect::<Vec<_>>().join("+")
}

/// The stock comparison: every sensor against the wrists-plus-upper-back
/// subset that carries the lifting motion.
pub fn default_ablation_subsets() -> Vec<Vec<SensorId>> {
    vec![
        SensorId::ALL.to_vec(),
        vec![SensorId::LeftWrist, SensorId::RightWrist, SensorId::UpperBack],
    ]
}

fn restrict_all(
    recs: &[LabeledRecording],
    subset: &[SensorId],
) -> Result<Vec<LabeledRecording>> {
    recs.iter()
        .map(|lr| {
            Ok(LabeledRecording {
                recording: restrict_sensors(&lr.recording, subset)?,
                lifts: lr.lifts.clone(),
                applied_offset_frames: lr.applied_offset_frames,
            })
        })
        .collect()
}

/// Retrains with the feature matrix cut down to each sensor subset; one row
/// per subset per seed.
pub fn ablation_sweep(
    sources: &DataSources,
    subsets: &[Vec<SensorId>],
    cfg: &SweepConfig,
) -> Result<Vec<CatalogRow>> {
    if subsets.is_empty() || cfg.seeds.is_empty() {
        return Err(EvalError::Shape("need at least one subset and one seed".into()));
    }
    let mut work = Vec::new();
    for subset in subsets {
        let group = subset_name(subset);
        let data = || -> Result<(Arc<Dataset>, Arc<Dataset>)> {
            let train_recs = restrict_all(sources.train, subset)?;
            let eval_recs = restrict_all(sources.eval, subset)?;
            let seed = derive_seed(cfg.base_seed, work.len() as u64);
            let t = slice_all(&train_recs, cfg.window_len, cfg.train_stride, seed, true)?;
            let e = slice_all(
                &eval_recs,
                cfg.window_len,
                cfg.eval_stride,
                derive_seed(seed, 1),
                cfg.balanced_eval,
            )?;
            Ok((Arc::new(t), Arc::new(e)))
        }()
        .map_err(|e| e.to_string());
        for &seed in &cfg.seeds {
            work.push((group.clone(), data.clone(), seed));
        }
    }
    let rows = work
        .par_iter()
        .enumerate()
        .map(|(i, (group, data, seed))| {
            let tc = TrainConfig { seed: *seed, ..cfg.train };
            let params = vec![("sensors".into(), group.clone()), ("seed".into(), seed.to_string())];
            run_one(
                format!("ablate-{i:04}"),
                "ablation",
                group.clone(),
                params,
                data.clone(),
                cfg.lstm_hidden,
                &cfg.dense_widths,
                &tc,
                cfg.threshold,
            )
        })
        .collect();
    Ok(rows)
}

/// Runs each attitude filter over the raw recordings before windowing, then
/// trains on the derived channels; one row per filter per seed.
pub fn filter_compare(
    sources: &DataSources,
    kinds: &[FilterKind],
    cfg: &SweepConfig,
) -> Result<Vec<CatalogRow>> {
    if kinds.is_empty() || cfg.seeds.is_empty() {
        return Err(EvalError::Shape("need at least one filter and one seed".into()));
    }
    let filter_all = |recs: &[LabeledRecording], kind: FilterKind| -> Result<Vec<LabeledRecording>> {
        recs.iter()
            .map(|lr| {
                Ok(LabeledRecording {
                    recording: apply_filter(&lr.recording, kind)?,
                    lifts: lr.lifts.clone(),
                    applied_offset_frames: lr.applied_offset_frames,
                })
            })
            .collect()
    };
    let mut work = Vec::new();
    for &kind in kinds {
        let data = || -> Result<(Arc<Dataset>, Arc<Dataset>)> {
            let train_recs = filter_all(sources.train, kind)?;
            let eval_recs = filter_all(sources.eval, kind)?;
            let seed = derive_seed(cfg.base_seed, work.len() as u64);
            let t = slice_all(&train_recs, cfg.window_len, cfg.train_stride, seed, true)?;
            let e = slice_all(
                &eval_recs,
                cfg.window_len,
                cfg.eval_stride,
                derive_seed(seed, 1),
                cfg.balanced_eval,
            )?;
            Ok((Arc::new(t), Arc::new(e)))
        }()
        .map_err(|e| e.to_string());
        let params_of = |seed: u64| {
            let mut p = vec![("filter".into(), kind.name().to_string())];
            match kind {
                FilterKind::None => {}
                FilterKind::Mahony { kp, ki } => {
                    p.push(("kp".into(), format!("{kp}")));
                    p.push(("ki".into(), format!("{ki}")));
                }
                FilterKind::Ekf { sigma_g, sigma_a } => {
                    p.push(("sigma_g".into(), format!("{sigma_g}")));
                    p.push(("sigma_a".into(), format!("{sigma_a}")));
                }
            }
            p.push(("seed".into(), seed.to_string()));
            p
        };
        for &seed in &cfg.seeds {
            work.push((kind.name().to_string(), data.clone(), seed, params_of(seed)));
        }
    }
    let rows = work
        .par_iter()
        .enumerate()
        .map(|(i, (group, data, seed, params))| {
            let tc = TrainConfig { seed: *seed, ..cfg.train };
            run_one(
                format!("filter-{i:04}"),
                "filter",
                group.clone(),
                params.clone(),
                data.clone(),
                cfg.lstm_hidden,
                &cfg.dense_widths,
                &tc,
                cfg.threshold,
            )
        })
        .collect();
    Ok(rows)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Stable CSV rendering: one line per row, rerunning the same sweep yields
/// byte-identical output.
pub fn catalog_csv(rows: &[CatalogRow]) -> String {
    let mut out = String::from(
        "id,experiment,params,train_acc,train_f1,eval_acc,eval_f1,tp,fp,tn,fn,seed,error\n",
    );
    for r in rows {
        let params =
            r.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
        let cm = r.confusion.unwrap_or_default();
        let (tp, fp, tn, fn_) = if r.confusion.is_some() {
            (cm.tp.to_string(), cm.fp.to_string(), cm.tn.to_string(), cm.fn_.to_string())
        } else {
            Default::default()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.id,
            r.experiment,
            params,
            fmt_opt(r.train_metrics.map(|m| m.accuracy)),
            fmt_opt(r.train_metrics.map(|m| m.f1)),
            fmt_opt(r.eval_metrics.map(|m| m.accuracy)),
            fmt_opt(r.eval_metrics.map(|m| m.f1)),
            tp,
            fp,
            tn,
            fn_,
            r.seed,
            r.error.as_deref().unwrap_or("").replace(',', ";"),
        ));
    }
    out
}

/// Inverse of [`catalog_csv`], close enough for re-summarization: accuracy
/// and F1 are read back exactly, precision/recall are recomputed from the
/// confusion counts when present.
pub fn parse_catalog_csv(text: &str) -> Result<Vec<CatalogRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| EvalError::Shape("empty catalog".into()))?;
    if header.split(',').count() != 13 {
        return Err(EvalError::Shape(format!("unrecognized catalog header: {header}")));
    }
    let parse_f = |s: &str, what: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| EvalError::Shape(format!("bad {what} value: {s}")))
        }
    };
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(EvalError::Shape(format!("bad catalog row: {line}")));
        }
        let params: Vec<(String, String)> = f[2]
            .split(';')
            .filter(|p| !p.is_empty())
            .map(|p| match p.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => (p.to_string(), String::new()),
            })
            .collect();
        let lookup = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
        let group = lookup("sensors").or_else(|| lookup("filter")).unwrap_or_else(|| f[1].into());
        let confusion = if f[7].is_empty() {
            None
        } else {
            let c = |s: &str| {
                s.parse::<usize>().map_err(|_| EvalError::Shape(format!("bad count: {s}")))
            };
            Some(ConfusionMatrix { tp: c(f[7])?, fp: c(f[8])?, tn: c(f[9])?, fn_: c(f[10])? })
        };
        let rebuild = |acc: Option<f64>, f1: Option<f64>| -> Option<Metrics> {
            let (accuracy, f1) = (acc?, f1?);
            let (precision, recall) = match confusion {
                Some(cm) => {
                    let m = super::metrics(&cm);
                    (m.precision, m.recall)
                }
                None => (0.0, 0.0),
            };
            Some(Metrics { accuracy, precision, recall, f1, degenerate: false })
        };
        let error = if f[12].is_empty() { None } else { Some(f[12].to_string()) };
        rows.push(CatalogRow {
            id: f[0].into(),
            experiment: f[1].into(),
            group,
            params,
            seed: f[11]
                .parse()
                .map_err(|_| EvalError::Shape(format!("bad seed: {}", f[11])))?,
            train_metrics: rebuild(parse_f(f[3], "train_acc")?, parse_f(f[4], "train_f1")?),
            eval_metrics: rebuild(parse_f(f[5], "eval_acc")?, parse_f(f[6], "eval_f1")?),
            confusion,
            error,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub group: String,
    pub n: usize,
    pub n_failed: usize,
    pub median_f1: f64,
    pub max_f1: f64,
    pub median_accuracy: f64,
    pub max_accuracy: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Per-group medians and maxima of the evaluation metrics, in first-seen
/// group order. Failed rows count toward `n_failed` only.
pub fn summarize(rows: &[CatalogRow]) -> Vec<SummaryRow> {
    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<String, (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
    for r in rows {
        if !acc.contains_key(&r.group) {
            order.push(r.group.clone());
        }
        let slot = acc.entry(r.group.clone()).or_default();
        match r.eval_metrics {
            Some(m) => {
                slot.0.push(m.f1);
                slot.1.push(m.accuracy);
            }
            None => slot.2 += 1,
        }
    }
    order
        .into_iter()
        .map(|group| {
            let (mut f1s, mut accs, failed) = acc.remove(&group).unwrap();
            f1s.sort_by(|a, b| a.total_cmp(b));
            accs.sort_by(|a, b| a.total_cmp(b));
            let n = f1s.len() + failed;
            if f1s.is_empty() {
                SummaryRow {
                    group,
                    n,
                    n_failed: failed,
                    median_f1: 0.0,
                    max_f1: 0.0,
                    median_accuracy: 0.0,
                    max_accuracy: 0.0,
                }
            } else {
                SummaryRow {
                    group,
                    n,
                    n_failed: failed,
                    median_f1: median(&f1s),
                    max_f1: *f1s.last().unwrap(),
                    median_accuracy: median(&accs),
                    max_accuracy: *accs.last().unwrap(),
                }
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out =
        String::from("group,n,n_failed,median_f1,max_f1,median_accuracy,max_accuracy\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
            r.group, r.n, r.n_failed, r.median_f1, r.max_f1, r.median_accuracy, r.max_accuracy
        ));
    }
    out
}
