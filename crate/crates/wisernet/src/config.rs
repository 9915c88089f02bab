//! Plain-text key=value config files. Lines are `key=value`; `#`
//! starts a comment. Every run writes its fully resolved settings back
//! out in a fixed key order so runs are reproducible from disk.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::losses::TrainConfig;
use crate::segnet::ModelConfig;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvFile {
    entries: BTreeMap<String, String>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got '{raw}'", lineno + 1))
            })?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(KvFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{v}'"))),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number list '{s}'")))
        })
        .collect()
}

/// Apply key=value overrides onto a training config. Unknown keys are
/// configuration errors so typos fail loudly.
pub fn apply_train_overrides(cfg: &mut TrainConfig, kv: &KvFile) -> Result<()> {
    for key in kv.keys() {
        match key {
            "epochs" => cfg.epochs = kv.parsed(key)?.unwrap(),
            "batch_size" => cfg.batch_size = kv.parsed(key)?.unwrap(),
            "lr" => cfg.lr = kv.parsed(key)?.unwrap(),
            "patience" => cfg.patience = kv.parsed(key)?.unwrap(),
            "ds_weights" => cfg.ds_weights = parse_f64_list(kv.get(key).unwrap())?,
            "warmup_epochs" => cfg.warmup_epochs = kv.parsed(key)?.unwrap(),
            "ramp_epochs" => cfg.ramp_epochs = kv.parsed(key)?.unwrap(),
            "lambda_max" => cfg.lambda_max = kv.parsed(key)?.unwrap(),
            "alpha" => cfg.alpha = kv.parsed(key)?.unwrap(),
            "beta" => cfg.beta = kv.parsed(key)?.unwrap(),
            "eps_gate" => cfg.eps_gate = kv.parsed(key)?.unwrap(),
            "kappa" => cfg.kappa = kv.parsed(key)?.unwrap(),
            "a0" => cfg.a0 = kv.parsed(key)?.unwrap(),
            "dice_smooth" => cfg.dice_smooth = kv.parsed(key)?.unwrap(),
            "input_size" => cfg.input_size = kv.parsed(key)?.unwrap(),
            "seed" => cfg.seed = kv.parsed(key)?.unwrap(),
            "weighted_dice" => cfg.weighted_dice = kv.parsed(key)?.unwrap(),
            // Model keys live in the same file; skip them here.
            "depth" | "base_width" | "in_channels" | "num_classes" | "wiser" | "ds" => {}
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
    }
    Ok(())
}

pub fn apply_model_overrides(cfg: &mut ModelConfig, kv: &KvFile) -> Result<()> {
    if let Some(v) = kv.parsed("depth")? {
        cfg.depth = v;
    }
    if let Some(v) = kv.parsed("base_width")? {
        cfg.base_width = v;
    }
    if let Some(v) = kv.parsed("in_channels")? {
        cfg.in_channels = v;
    }
    if let Some(v) = kv.parsed("num_classes")? {
        cfg.num_classes = v;
    }
    if let Some(v) = kv.parsed::<bool>("wiser")? {
        cfg.wiser_enabled = v;
    }
    if let Some(v) = kv.parsed::<bool>("ds")? {
        cfg.ds_enabled = v;
    }
    Ok(())
}

/// Fixed-order dump of the fully resolved run settings.
pub fn resolved_config(train: &TrainConfig, model: &ModelConfig) -> KvFile {
    let mut kv = KvFile::default();
    kv.set("epochs", train.epochs);
    kv.set("batch_size", train.batch_size);
    kv.set("lr", train.lr);
    kv.set("patience", train.patience);
    kv.set(
        "ds_weights",
        train.ds_weights.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","),
    );
    kv.set("warmup_epochs", train.warmup_epochs);
    kv.set("ramp_epochs", train.ramp_epochs);
    kv.set("lambda_max", train.lambda_max);
    kv.set("alpha", train.alpha);
    kv.set("beta", train.beta);
    kv.set("eps_gate", train.eps_gate);
    kv.set("kappa", train.kappa);
    kv.set("a0", train.a0);
    kv.set("dice_smooth", train.dice_smooth);
    kv.set("input_size", train.input_size);
    kv.set("seed", train.seed);
    kv.set("weighted_dice", train.weighted_dice);
    kv.set("depth", model.depth);
    kv.set("base_width", model.base_width);
    kv.set("in_channels", model.in_channels);
    kv.set("num_classes", model.num_classes);
    kv.set("wiser", model.wiser_enabled);
    kv.set("ds", model.ds_enabled);
    kv
}
