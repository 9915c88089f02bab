pub mod ablate;
pub mod distances;
pub mod eval;
pub mod generate;
pub mod train;
pub mod verify;

use std::path::Path;

use wisernet::config::KvFile;
use wisernet::error::{Error, Result};
use wisernet::losses::TrainConfig;
use wisernet::segnet::ModelConfig;

/// defaults < config file < flags.
pub fn resolve_settings(
    config_file: Option<&Path>,
    flag_overrides: &[(String, String)],
) -> Result<(TrainConfig, ModelConfig)> {
    let mut train = TrainConfig::default();
    let mut model = ModelConfig::default();
    if let Some(path) = config_file {
        let kv = KvFile::load(path)?;
        wisernet::config::apply_train_overrides(&mut train, &kv)?;
        wisernet::config::apply_model_overrides(&mut model, &kv)?;
    }
    if !flag_overrides.is_empty() {
        let mut kv = KvFile::default();
        for (k, v) in flag_overrides {
            kv.set(k, v);
        }
        wisernet::config::apply_train_overrides(&mut train, &kv)?;
        wisernet::config::apply_model_overrides(&mut model, &kv)?;
    }
    // Deep-supervision weights must line up with the decoder depth; pad
    // or trim the paper defaults when the depth is overridden.
    let need = model.depth.saturating_sub(1);
    if train.ds_weights.len() != need {
        let mut w = train.ds_weights.clone();
        w.resize(need, *w.last().unwrap_or(&0.1));
        train.ds_weights = w;
    }
    train.validate()?;
    model.validate()?;
    Ok((train, model))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Sample mean and (n-1) standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
