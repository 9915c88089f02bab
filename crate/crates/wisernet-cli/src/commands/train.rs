use std::path::{Path, PathBuf};

use wisernet::config::resolved_config;
use wisernet::error::{Error, Result};
use wisernet::losses::TrainConfig;
use wisernet::segnet::{Model, ModelConfig};
use wisernet::synth::load_dataset;
use wisernet::tensor::save_checkpoint;
use wisernet::train::{fit, Sample};

use crate::commands::{resolve_settings, write_text};
use crate::manifest::RunManifest;

pub struct TrainArgs {
    pub data: PathBuf,
    pub out: PathBuf,
    pub config_file: Option<PathBuf>,
    pub flag_overrides: Vec<(String, String)>,
    pub source_domain: String,
    /// Samples from the end of the source manifest held out for
    /// validation.
    pub val_count: usize,
}

pub struct TrainedRun {
    pub checkpoint: PathBuf,
    pub train_cfg: TrainConfig,
    pub model_cfg: ModelConfig,
    pub best_epoch: usize,
    pub best_val_dsc: f64,
}

pub fn split_source(samples: Vec<Sample>, val_count: usize) -> Result<(Vec<Sample>, Vec<Sample>)> {
    if samples.len() <= val_count {
        return Err(Error::Usage(format!(
            "source domain has {} samples, cannot hold out {val_count} for validation",
            samples.len()
        )));
    }
    let split = samples.len() - val_count;
    let mut train = samples;
    let val = train.split_off(split);
    Ok((train, val))
}

/// Train on the source domain and write the best checkpoint, history
/// CSV, resolved config, and model summary into `out`.
pub fn run(args: &TrainArgs) -> Result<TrainedRun> {
    let (train_cfg, model_cfg) =
        resolve_settings(args.config_file.as_deref(), &args.flag_overrides)?;
    let mut manifest = RunManifest::begin(
        &args.out,
        "train",
        &[
            ("data".into(), args.data.display().to_string()),
            ("source_domain".into(), args.source_domain.clone()),
            ("val_count".into(), args.val_count.to_string()),
            ("seed".into(), train_cfg.seed.to_string()),
        ],
    )?;

    let source_dir = args.data.join(&args.source_domain);
    let samples = load_dataset(&source_dir, train_cfg.input_size)?;
    let (train_set, val_set) = split_source(samples, args.val_count)?;

    let mut model = Model::new(model_cfg, train_cfg.wiser_hyper(), train_cfg.seed)?;
    let result = fit(&mut model, &train_set, &val_set, &train_cfg)?;

    let ckpt_path = args.out.join("best.ckpt");
    save_checkpoint(&model.store, &ckpt_path)?;
    let history_path = args.out.join("history.csv");
    write_text(&history_path, &result.history.to_csv())?;
    let config_path = args.out.join("config.txt");
    resolved_config(&train_cfg, &model_cfg).save(&config_path)?;

    let summary = model.summary((train_cfg.input_size, train_cfg.input_size))?;
    let summary_path = args.out.join("model_summary.csv");
    write_text(
        &summary_path,
        &format!(
            "config_hash,params,macs,peak_bytes\n{},{},{},{}\n",
            summary.config_hash, summary.params, summary.macs, summary.peak_activation_bytes
        ),
    )?;

    manifest.add_output("checkpoint", &ckpt_path);
    manifest.add_output("history", &history_path);
    manifest.add_output("config", &config_path);
    manifest.add_output("model_summary", &summary_path);
    manifest.finalize()?;

    Ok(TrainedRun {
        checkpoint: ckpt_path,
        train_cfg,
        model_cfg,
        best_epoch: result.best_epoch,
        best_val_dsc: result.best_val_dsc,
    })
}

/// Rebuild a model from a run directory: the resolved config sits next
/// to the checkpoint.
pub fn load_model_from_run(checkpoint: &Path) -> Result<(Model<f32>, TrainConfig, ModelConfig)> {
    let dir = checkpoint
        .parent()
        .ok_or_else(|| Error::Usage(format!("checkpoint path {} has no parent", checkpoint.display())))?;
    let kv = wisernet::config::KvFile::load(&dir.join("config.txt"))?;
    let mut train_cfg = TrainConfig::default();
    let mut model_cfg = ModelConfig::default();
    wisernet::config::apply_train_overrides(&mut train_cfg, &kv)?;
    wisernet::config::apply_model_overrides(&mut model_cfg, &kv)?;
    let mut model = Model::new(model_cfg, train_cfg.wiser_hyper(), train_cfg.seed)?;
    wisernet::tensor::load_checkpoint(&mut model.store, checkpoint)?;
    Ok((model, train_cfg, model_cfg))
}
