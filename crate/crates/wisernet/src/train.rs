//! Mini-batch training loop with validation-based early stopping.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::losses::{lambda_schedule, total_loss, TrainConfig};
use crate::metrics::{dsc, BinaryMask};
use crate::segnet::Model;
use crate::tensor::{AdamConfig, Graph, Tensor4};

/// RNG sub-stream ids; every run derives all randomness from one seed.
pub const STREAM_DATA: u64 = 0;
pub const STREAM_INIT: u64 = 1;
pub const STREAM_SHUFFLE: u64 = 2;

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One training or evaluation sample (single-image tensors).
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    /// `1 x 3 x H x W`, values in `[0, 1]`.
    pub image: Tensor4<f32>,
    /// `1 x M x H x W`, binary.
    pub mask: Tensor4<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_main: f64,
    pub loss_ds: f64,
    pub loss_ortho: f64,
    pub loss_total: f64,
    pub lambda: f64,
    /// Mean validation DSC per class, percent.
    pub val_dsc: Vec<f64>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub const CSV_HEADER: &'static str =
        "epoch,loss_main,loss_ds,loss_ortho,loss_total,lambda,val_dsc_od,val_dsc_oc,wall_time_s";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.4},{:.4},{:.3}\n",
                r.epoch,
                r.loss_main,
                r.loss_ds,
                r.loss_ortho,
                r.loss_total,
                r.lambda,
                r.val_dsc.first().copied().unwrap_or(f64::NAN),
                r.val_dsc.get(1).copied().unwrap_or(f64::NAN),
                r.wall_time_s,
            ));
        }
        out
    }
}

#[derive(Debug)]
pub struct FitResult {
    pub history: TrainHistory,
    pub best_epoch: usize,
    /// Mean-over-classes validation DSC of the retained checkpoint.
    pub best_val_dsc: f64,
}

fn batch_tensors(samples: &[&Sample]) -> Result<(Tensor4<f32>, Tensor4<f32>)> {
    let images: Vec<&Tensor4<f32>> = samples.iter().map(|s| &s.image).collect();
    let masks: Vec<&Tensor4<f32>> = samples.iter().map(|s| &s.mask).collect();
    Ok((Tensor4::concat_batch(&images)?, Tensor4::concat_batch(&masks)?))
}

/// Mean DSC per class (percent) over a sample set at threshold 0.5.
pub fn evaluate_mean_dsc(model: &Model<f32>, samples: &[Sample], batch: usize) -> Result<Vec<f64>> {
    let classes = model.cfg.num_classes;
    let mut sums = vec![0.0; classes];
    if samples.is_empty() {
        return Ok(sums);
    }
    for chunk in samples.chunks(batch.max(1)) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let (images, masks) = batch_tensors(&refs)?;
        let mut g = Graph::new();
        let x = g.leaf(images, false);
        let out = model.forward(&mut g, x, false)?;
        let probs = g.value(out.main_probs);
        for (bi, _) in chunk.iter().enumerate() {
            for c in 0..classes {
                let pred = BinaryMask::from_tensor_channel(probs, bi, c, 0.5);
                let gt = BinaryMask::from_tensor_channel(&masks, bi, c, 0.5);
                sums[c] += dsc(&pred, &gt)?;
            }
        }
    }
    for s in &mut sums {
        *s /= samples.len() as f64;
    }
    Ok(sums)
}

/// Train with Adam over shuffled mini-batches, retain the checkpoint
/// with the best mean validation DSC, and stop early after `patience`
/// epochs without improvement. The best weights are restored into the
/// model before returning.
pub fn fit(
    model: &mut Model<f32>,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Usage("fit requires non-empty train and val splits".into()));
    }
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
    let mut shuffle_rng = seeded_rng(cfg.seed, STREAM_SHUFFLE);
    let mut history = TrainHistory::default();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_values = model.store.values_snapshot();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut shuffle_rng);

        let mut sums = (0.0, 0.0, 0.0, 0.0);
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let refs: Vec<&Sample> = chunk.iter().map(|&i| &train[i]).collect();
            let (images, masks) = batch_tensors(&refs)?;
            let mut g = Graph::new();
            let x = g.leaf(images, false);
            let out = model.forward(&mut g, x, false)?;
            let target = g.constant(masks);
            let (loss, comps) = total_loss(&mut g, &out, target, cfg, epoch)?;
            if !comps.total.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at epoch {epoch}: main={} ds={} ortho_sum={} lambda={}",
                    comps.main, comps.ds, comps.ortho_sum, comps.lambda
                )));
            }
            g.backward(loss)?;
            model.store.zero_grads();
            g.accumulate_param_grads(&mut model.store);
            model.store.adam_step(&adam)?;
            sums.0 += comps.main;
            sums.1 += comps.ds;
            sums.2 += comps.ortho_sum;
            sums.3 += comps.total;
            batches += 1;
        }

        let val_dsc = evaluate_mean_dsc(model, val, cfg.batch_size)?;
        let val_score = val_dsc.iter().sum::<f64>() / val_dsc.len() as f64;
        let n = batches as f64;
        history.records.push(EpochRecord {
            epoch,
            loss_main: sums.0 / n,
            loss_ds: sums.1 / n,
            loss_ortho: sums.2 / n,
            loss_total: sums.3 / n,
            lambda: lambda_schedule(epoch, cfg.warmup_epochs, cfg.ramp_epochs, cfg.lambda_max),
            val_dsc,
            wall_time_s: started.elapsed().as_secs_f64(),
        });

        if val_score > best_val {
            best_val = val_score;
            best_epoch = epoch;
            best_values = model.store.values_snapshot();
        } else if cfg.patience > 0 && epoch - best_epoch >= cfg.patience {
            break;
        }
    }

    model.store.restore_values(&best_values);
    Ok(FitResult { history, best_epoch, best_val_dsc: best_val })
}
