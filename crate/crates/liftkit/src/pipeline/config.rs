//! Declarative pipeline configuration. Every value is optional in the file;
//! precedence is command-line flag, then config file, then built-in default.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{PipelineError, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsSection,
    pub windowing: WindowingSection,
    pub filter: FilterSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub grid: GridSection,
    pub sweep: SweepSection,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub data: Option<String>,
    pub eval_data: Option<String>,
    pub out: Option<String>,
    pub model: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct WindowingSection {
    pub window_len: Option<usize>,
    pub stride: Option<usize>,
    pub eval_stride: Option<usize>,
    pub balance: Option<bool>,
    pub seed: Option<u64>,
    pub discard_ambiguous: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    /// "none", "mahony" or "ekf".
    pub kind: Option<String>,
    pub kp: Option<f64>,
    pub ki: Option<f64>,
    pub sigma_g: Option<f64>,
    pub sigma_a: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub lstm_hidden: Option<usize>,
    pub dense_widths: Option<Vec<usize>>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub validation_split: Option<f64>,
    pub learning_rate: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub batch_size: Option<Vec<usize>>,
    pub window_len: Option<Vec<usize>>,
    pub epochs: Option<Vec<usize>>,
    pub validation_split: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub seeds: Option<Vec<u64>>,
    /// Sensor subsets as "+"-joined sensor names.
    pub subsets: Option<Vec<String>>,
    pub threshold: Option<f64>,
    pub base_seed: Option<u64>,
    pub balanced_eval: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub trials: Option<usize>,
    pub mode: Option<String>,
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| PipelineError::Usage(format!("bad config {}: {e}", path.display())))
    }
}

/// Flag-over-config-over-default resolution.
pub fn pick<T: Clone>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

/// Like [`pick`] for values with no sensible default (e.g. input paths).
pub fn pick_required<T: Clone>(flag: Option<T>, config: Option<T>, what: &str) -> Result<T> {
    flag.or(config)
        .ok_or_else(|| PipelineError::Usage(format!("{what} not given (flag or config)")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_parses() {
        let cfg: PipelineConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn sections_parse() {
        let cfg: PipelineConfig = toml::from_str(
            "[windowing]\nwindow_len = 10\n\n[train]\nepochs = 5\n\n[grid]\nbatch_size = [16, 32]\n",
        )
        .unwrap();
        assert_eq!(cfg.windowing.window_len, Some(10));
        assert_eq!(cfg.train.epochs, Some(5));
        assert_eq!(cfg.grid.batch_size, Some(vec![16, 32]));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<PipelineConfig>("[train]\nepoch = 5\n").is_err());
    }

    #[test]
    fn precedence_flag_config_default() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick::<usize>(None, None, 3), 3);
        assert!(pick_required::<usize>(None, None, "x").is_err());
    }
}
