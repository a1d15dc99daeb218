//! Evaluation: confusion matrices, derived metrics, and the experiment
//! harnesses (hyperparameter grid, sensor ablation, filter comparison).

mod sweeps;

pub use sweeps::{
    ablation_sweep, catalog_csv, default_ablation_subsets, filter_compare, grid_search,
    parse_catalog_csv, subset_name, summarize, summary_csv, CatalogRow, DataSources, GridAxes,
    SweepConfig, SummaryRow,
};

use crate::liftnet::{forward, Model};
use crate::windowing::{Dataset, Label};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Model(#[from] crate::liftnet::LiftnetError),
    #[error(transparent)]
    Windowing(#[from] crate::windowing::WindowingError),
    #[error(transparent)]
    Imu(#[from] crate::imu_core::ImuError),
    #[error(transparent)]
    Filter(#[from] crate::fusion_filters::FilterError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when any ratio had a 0/0 numerator/denominator and was defined
    /// as 0 instead of raising.
    pub degenerate: bool,
}

/// Tallies predictions (score ≥ threshold ⇒ Lift) against labels.
pub fn confusion(scores: &[f64], labels: &[Label], threshold: f64) -> Result<ConfusionMatrix> {
    if scores.len() != labels.len() {
        return Err(EvalError::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(EvalError::Shape("empty score list".into()));
    }
    assert!(threshold > 0.0 && threshold < 1.0, "threshold must be in (0, 1)");
    let mut cm = ConfusionMatrix::default();
    for (&score, &label) in scores.iter().zip(labels) {
        let predicted_lift = score >= threshold;
        match (predicted_lift, label) {
            (true, Label::Lift) => cm.tp += 1,
            (true, Label::NonLift) => cm.fp += 1,
            (false, Label::Lift) => cm.fn_ += 1,
            (false, Label::NonLift) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Accuracy, precision, recall, and F1 (harmonic mean of precision and
/// recall). 0/0 ratios are defined as 0 and flagged, not thrown.
pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    assert!(cm.total() > 0, "confusion matrix is empty");
    let mut degenerate = false;
    let mut ratio = |num: usize, den: usize| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let accuracy = (cm.tp + cm.tn) as f64 / cm.total() as f64;
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics { accuracy, precision, recall, f1, degenerate }
}

/// Forward pass on every window, then confusion + metrics.
pub fn evaluate(
    model: &Model,
    data: &Dataset,
    threshold: f64,
) -> Result<(Metrics, ConfusionMatrix)> {
    let mut scores = Vec::with_capacity(data.windows.len());
    let mut labels = Vec::with_capacity(data.windows.len());
    for w in &data.windows {
        scores.push(forward(model, &w.data)?);
        labels.push(w.label);
    }
    let cm = confusion(&scores, &labels, threshold)?;
    Ok((metrics(&cm), cm))
}
