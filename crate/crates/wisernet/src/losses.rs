//! Soft Dice, deep supervision, the decorrelation ramp schedule, and
//! the combined training objective.

use crate::error::{Error, Result};
use crate::segnet::ForwardOutput;
use crate::tensor::{Graph, NodeId, Scalar, UpsampleMode};

/// All training hyperparameters plus every gap-filling default; written
/// out as a key=value file with each run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub patience: usize,
    /// Deep-supervision weights for levels 2..=L.
    pub ds_weights: Vec<f64>,
    /// Warmup epochs before the decorrelation penalty ramps in.
    pub warmup_epochs: usize,
    /// Ramp length in epochs.
    pub ramp_epochs: usize,
    pub lambda_max: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eps_gate: f64,
    pub kappa: f64,
    pub a0: f64,
    pub dice_smooth: f64,
    pub input_size: usize,
    pub seed: u64,
    /// Weight classes by inverse squared foreground mass instead of a
    /// plain mean (off by default).
    pub weighted_dice: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 8,
            lr: 1e-4,
            patience: 5,
            ds_weights: vec![0.2, 0.2, 0.1],
            warmup_epochs: 5,
            ramp_epochs: 10,
            lambda_max: 0.1,
            alpha: 0.5,
            beta: 0.5,
            eps_gate: 0.25,
            kappa: 1.0,
            a0: 0.25,
            dice_smooth: 1.0,
            input_size: 64,
            seed: 7,
            weighted_dice: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if self.patience > self.epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds epochs {}",
                self.patience, self.epochs
            )));
        }
        if self.ds_weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Config("ds_weights must be non-negative".into()));
        }
        if self.input_size == 0 {
            return Err(Error::Config("input_size must be positive".into()));
        }
        crate::wiser::WiserHyper::from(self).validate()
    }

    pub fn wiser_hyper(&self) -> crate::wiser::WiserHyper {
        self.into()
    }
}

impl From<&TrainConfig> for crate::wiser::WiserHyper {
    fn from(c: &TrainConfig) -> Self {
        crate::wiser::WiserHyper {
            alpha: c.alpha,
            beta: c.beta,
            eps_gate: c.eps_gate,
            kappa: c.kappa,
            a0: c.a0,
        }
    }
}

/// Per-(sample, class) soft Dice `1 - (2*sum(p*y) + s)/(sum p + sum y + s)`,
/// averaged over classes then batch.
pub fn dice_loss<T: Scalar>(
    g: &mut Graph<T>,
    probs: NodeId,
    target: NodeId,
    smooth: f64,
) -> Result<NodeId> {
    if g.shape(probs) != g.shape(target) {
        return Err(Error::Usage(format!(
            "dice_loss: probs {} vs target {}",
            g.shape(probs),
            g.shape(target)
        )));
    }
    let inter = g.mul(probs, target)?;
    let inter_sum = g.spatial_sum(inter);
    let p_sum = g.spatial_sum(probs);
    let y_sum = g.spatial_sum(target);
    let denom_raw = g.add(p_sum, y_sum)?;
    let numer = g.affine(inter_sum, 2.0, smooth);
    let denom = g.affine(denom_raw, 1.0, smooth);
    let frac = g.div(numer, denom)?;
    let per_class = g.affine(frac, -1.0, 1.0);
    Ok(g.mean_all(per_class))
}

/// Weighted sum of Dice losses on auxiliary maps, each upsampled to the
/// target resolution first (probabilities are upsampled, not logits).
pub fn ds_loss<T: Scalar>(
    g: &mut Graph<T>,
    aux_probs: &[NodeId],
    target: NodeId,
    weights: &[f64],
    smooth: f64,
) -> Result<NodeId> {
    if aux_probs.len() != weights.len() {
        return Err(Error::Usage(format!(
            "ds_loss: {} aux maps but {} weights",
            aux_probs.len(),
            weights.len()
        )));
    }
    let ts = g.shape(target);
    let mut total: Option<NodeId> = None;
    for (&aux, &w) in aux_probs.iter().zip(weights) {
        let ashape = g.shape(aux);
        if ts.h % ashape.h != 0 {
            return Err(Error::Shape(format!(
                "ds_loss: aux {} does not divide target {}",
                ashape, ts
            )));
        }
        let up = g.upsample(aux, ts.h / ashape.h, UpsampleMode::Bilinear)?;
        let d = dice_loss(g, up, target, smooth)?;
        let wd = g.affine(d, w, 0.0);
        total = Some(match total {
            Some(t) => g.add(t, wd)?,
            None => wd,
        });
    }
    Ok(total.unwrap_or_else(|| g.constant(crate::tensor::Tensor4::scalar(T::zero()))))
}

/// Linear ramp with warmup (1-based epochs): zero through `e_w`, then
/// `lambda_max * (e - e_w)/e_r` until `e_w + e_r`, then flat.
pub fn lambda_schedule(epoch: usize, warmup: usize, ramp: usize, lambda_max: f64) -> f64 {
    if epoch <= warmup {
        0.0
    } else if epoch < warmup + ramp {
        lambda_max * (epoch - warmup) as f64 / ramp as f64
    } else {
        lambda_max
    }
}

/// Scalar components of one total-loss evaluation, for logging.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossComponents {
    pub main: f64,
    pub ds: f64,
    /// Raw sum of per-level decorrelation terms (before scaling).
    pub ortho_sum: f64,
    pub lambda: f64,
    pub total: f64,
}

/// `main + ds + lambda(e)/L * sum_l ortho_l`.
pub fn total_loss<T: Scalar>(
    g: &mut Graph<T>,
    out: &ForwardOutput,
    target: NodeId,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<(NodeId, LossComponents)> {
    let main = dice_loss(g, out.main_probs, target, cfg.dice_smooth)?;
    let mut total = main;
    let mut ds_val = 0.0;
    if !out.aux_probs.is_empty() {
        let ds = ds_loss(g, &out.aux_probs, target, &cfg.ds_weights, cfg.dice_smooth)?;
        ds_val = g.value(ds).item().to_f64();
        total = g.add(total, ds)?;
    }
    let lambda = lambda_schedule(epoch, cfg.warmup_epochs, cfg.ramp_epochs, cfg.lambda_max);
    let mut ortho_sum = 0.0;
    if !out.ortho_terms.is_empty() {
        let mut sum = out.ortho_terms[0];
        for &o in &out.ortho_terms[1..] {
            sum = g.add(sum, o)?;
        }
        ortho_sum = g.value(sum).item().to_f64();
        // Added even at lambda = 0 so the style branch always has a
        // gradient path (zero-valued during warmup).
        let scaled = g.affine(sum, lambda / out.ortho_terms.len() as f64, 0.0);
        total = g.add(total, scaled)?;
    }
    let components = LossComponents {
        main: g.value(main).item().to_f64(),
        ds: ds_val,
        ortho_sum,
        lambda,
        total: g.value(total).item().to_f64(),
    };
    Ok((total, components))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Shape, Tensor4};

    fn scalar_graph() -> Graph<f64> {
        Graph::new()
    }

    #[test]
    fn dice_perfect_prediction_is_zero() {
        let mut g = scalar_graph();
        let t = Tensor4::from_vec(
            Shape::new(1, 1, 2, 2),
            vec![1.0, 0.0, 1.0, 0.0],
        )
        .unwrap();
        let p = g.leaf(t.clone(), false);
        let y = g.constant(t);
        let d = dice_loss(&mut g, p, y, 0.0).unwrap();
        assert_eq!(g.value(d).item(), 0.0);
    }

    #[test]
    fn dice_disjoint_closed_form() {
        // Disjoint, n positives each: 1 - smooth/(2n + smooth).
        let n = 2.0;
        let smooth = 1.0;
        let mut g = scalar_graph();
        let p = g.leaf(
            Tensor4::from_vec(Shape::new(1, 1, 2, 2), vec![1.0, 1.0, 0.0, 0.0]).unwrap(),
            false,
        );
        let y = g.constant(
            Tensor4::from_vec(Shape::new(1, 1, 2, 2), vec![0.0, 0.0, 1.0, 1.0]).unwrap(),
        );
        let d = dice_loss(&mut g, p, y, smooth).unwrap();
        let want = 1.0 - smooth / (2.0 * n + smooth);
        assert!((g.value(d).item() - want).abs() < 1e-12);
    }

    #[test]
    fn dice_partial_overlap_third() {
        // p covers 2 of 4 target pixels with no extra mass, smooth -> 0:
        // 1 - 2*2/(2+4) = 1/3.
        let mut g = scalar_graph();
        let p = g.leaf(
            Tensor4::from_vec(
                Shape::new(1, 1, 2, 3),
                vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            )
            .unwrap(),
            false,
        );
        let y = g.constant(
            Tensor4::from_vec(
                Shape::new(1, 1, 2, 3),
                vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0],
            )
            .unwrap(),
        );
        let d = dice_loss(&mut g, p, y, 0.0).unwrap();
        assert!((g.value(d).item() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dice_rejects_shape_mismatch() {
        let mut g = scalar_graph();
        let p = g.leaf(Tensor4::zeros(Shape::new(1, 1, 2, 2)), false);
        let y = g.constant(Tensor4::zeros(Shape::new(1, 1, 2, 4)));
        assert!(matches!(dice_loss(&mut g, p, y, 1.0), Err(Error::Usage(_))));
    }

    #[test]
    fn ds_loss_weights_and_lengths() {
        let mut g = scalar_graph();
        let target = g.constant(
            Tensor4::from_vec(Shape::new(1, 1, 4, 4), {
                let mut v = vec![0.0; 16];
                v[5] = 1.0;
                v
            })
            .unwrap(),
        );
        let aux = g.leaf(Tensor4::filled(Shape::new(1, 1, 2, 2), 0.25), false);

        // Zero weights annihilate the loss.
        let z = ds_loss(&mut g, &[aux], target, &[0.0], 1.0).unwrap();
        assert_eq!(g.value(z).item(), 0.0);

        // Single aux with weight w scales its dice value linearly.
        let up = g.upsample(aux, 2, UpsampleMode::Bilinear).unwrap();
        let d_ref = dice_loss(&mut g, up, target, 1.0).unwrap();
        let d_w = ds_loss(&mut g, &[aux], target, &[0.2], 1.0).unwrap();
        assert!((g.value(d_w).item() - 0.2 * g.value(d_ref).item()).abs() < 1e-12);

        // Length mismatch is a usage error.
        assert!(matches!(
            ds_loss(&mut g, &[aux], target, &[0.2, 0.1], 1.0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn paper_ds_weight_defaults() {
        assert_eq!(TrainConfig::default().ds_weights, vec![0.2, 0.2, 0.1]);
    }

    #[test]
    fn lambda_schedule_branches() {
        // e_w = 5, e_r = 10, lambda_max = 0.1.
        assert_eq!(lambda_schedule(5, 5, 10, 0.1), 0.0);
        assert!((lambda_schedule(10, 5, 10, 0.1) - 0.05).abs() < 1e-15);
        assert!((lambda_schedule(15, 5, 10, 0.1) - 0.1).abs() < 1e-15);
        assert_eq!(lambda_schedule(1, 5, 10, 0.1), 0.0);
        assert_eq!(lambda_schedule(99, 5, 10, 0.1), 0.1);
    }

    #[test]
    fn lambda_schedule_is_monotone_and_clamped() {
        let mut prev = -1.0;
        for e in 0..40 {
            let v = lambda_schedule(e, 5, 10, 0.1);
            assert!(v >= prev);
            assert!(v <= 0.1 + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn validate_rejects_bad_configs() {
        let mut c = TrainConfig { patience: 200, ..TrainConfig::default() };
        assert!(c.validate().is_err());
        c.patience = 5;
        c.ds_weights = vec![-0.1];
        assert!(c.validate().is_err());
    }
}
