//! Model persistence: a self-describing JSON container with the config echo
//! and the flat parameter vector. Loading validates the parameter count
//! against the config and rejects mismatched channel layouts.

use super::{LiftnetError, Model, ModelConfig, ParamLayout, Result};
use std::path::Path;

#[derive(serde::Serialize, serde::Deserialize)]
struct ModelFile {
    format: String,
    config: ModelConfig,
    params: Vec<f64>,
}

const FORMAT_TAG: &str = "liftkit-model-v1";

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let file = ModelFile {
        format: FORMAT_TAG.to_string(),
        config: model.config.clone(),
        params: model.theta.clone(),
    };
    let json = serde_json::to_string(&file).map_err(|e| LiftnetError::Io(e.to_string()))?;
    std::fs::write(path, json).map_err(|e| LiftnetError::Io(e.to_string()))
}

/// Loads a model; when `expected_layout` is given, the persisted channel
/// layout must match it exactly.
pub fn load_model(path: &Path, expected_layout: Option<&[String]>) -> Result<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| LiftnetError::Io(e.to_string()))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| LiftnetError::Io(e.to_string()))?;
    if file.format != FORMAT_TAG {
        return Err(LiftnetError::Io(format!("unknown model format '{}'", file.format)));
    }
    file.config.validate()?;
    let layout = ParamLayout::from_config(&file.config);
    if file.params.len() != layout.total {
        return Err(LiftnetError::Shape(format!(
            "model file has {} parameters, config implies {}",
            file.params.len(),
            layout.total
        )));
    }
    if file.params.iter().any(|v| !v.is_finite()) {
        return Err(LiftnetError::Io("model file contains non-finite parameter".into()));
    }
    if let Some(expected) = expected_layout {
        if file.config.channel_layout != expected {
            return Err(LiftnetError::Shape(format!(
                "model channel layout {:?} does not match dataset layout {:?}",
                file.config.channel_layout, expected
            )));
        }
    }
    Ok(Model { config: file.config, layout, theta: file.params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liftnet::init_model;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut cfg = ModelConfig::new(5, 12, 77);
        cfg.lstm_hidden = 6;
        cfg.channel_layout = (0..12).map(|i| format!("ch{i}")).collect();
        let model = init_model(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path, Some(&cfg.channel_layout)).unwrap();
        assert_eq!(loaded.theta, model.theta);
        assert_eq!(loaded.config, model.config);
    }

    #[test]
    fn rejects_mismatched_layout() {
        let mut cfg = ModelConfig::new(5, 2, 1);
        cfg.lstm_hidden = 3;
        cfg.channel_layout = vec!["a".into(), "b".into()];
        let model = init_model(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let other = vec!["a".to_string(), "c".to_string()];
        assert!(matches!(load_model(&path, Some(&other)), Err(LiftnetError::Shape(_))));
    }

    #[test]
    fn rejects_truncated_params() {
        let mut cfg = ModelConfig::new(5, 2, 1);
        cfg.lstm_hidden = 3;
        let model = init_model(&cfg).unwrap();
        let mut file = ModelFile {
            format: FORMAT_TAG.into(),
            config: model.config.clone(),
            params: model.theta.clone(),
        };
        file.params.pop();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
        assert!(matches!(load_model(&path, None), Err(LiftnetError::Shape(_))));
    }
}
