//! Runtime property suite: wavelet exactness, finite-difference
//! gradient checks for every operator and the full model, closed-form
//! loss values, the scheduler table, and the boundary-distance oracle.
//!
//! The finite-difference oracle evaluates the forward pass only, so it
//! stays independent of every analytic backward rule it checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::losses::{dice_loss, lambda_schedule, total_loss, TrainConfig};
use crate::metrics::{hd95, percentile_linear, BinaryMask};
use crate::segnet::{Model, ModelConfig};
use crate::tensor::{
    AdamConfig, Graph, NodeId, ParamStore, Shape, Tensor4, UpsampleMode,
};
use crate::wavelet::{dwt_haar, idwt_haar, squared_sum};
use crate::wiser::{
    edge_boost, edge_energy, ortho_loss, wiser_forward, WiserHyper, WiserParams,
};

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    /// Test fixture: perturb one reconstruction coefficient so the
    /// round-trip row must fail (negative control).
    pub inject_dwt_fault: bool,
}

#[derive(Clone, Debug)]
pub struct VerifyRow {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
    /// Largest relative error seen across all gradient rows.
    pub max_grad_rel_err: f64,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.rows.push(VerifyRow { name: name.to_string(), passed, detail });
    }

    fn push_grad(&mut self, name: &str, tol: f64, err: f64) {
        self.max_grad_rel_err = self.max_grad_rel_err.max(err);
        self.push(name, err < tol, format!("max rel err {err:.3e} (tol {tol:.0e})"));
    }
}

const FD_H: f64 = 1e-5;

fn rand_tensor(shape: Shape, lo: f64, hi: f64, seed: u64) -> Tensor4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor4::from_fn(shape, |_, _, _, _| rng.random_range(lo..hi))
}

/// Random values with magnitude in [0.2, 1.5]: keeps finite differences
/// away from relu and absolute-value kinks.
fn rand_tensor_off_kink(shape: Shape, seed: u64) -> Tensor4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor4::from_fn(shape, |_, _, _, _| {
        let mag = rng.random_range(0.2..1.5);
        if rng.random_range(0.0..1.0) < 0.5 {
            -mag
        } else {
            mag
        }
    })
}

/// Hybrid relative error with a small floor so near-zero coordinate
/// pairs compare absolutely.
fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-3)
}

/// Finite-difference check of d(loss)/d(inputs) for a scalar-valued
/// builder. Returns the max relative error over every input coordinate.
fn fd_check(
    inputs: &[Tensor4<f64>],
    build: impl Fn(&mut Graph<f64>, &[NodeId]) -> Result<NodeId>,
) -> f64 {
    let eval = |vals: &[Tensor4<f64>]| -> f64 {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = vals.iter().map(|t| g.leaf(t.clone(), false)).collect();
        let loss = build(&mut g, &ids).expect("verify case builds");
        g.value(loss).item()
    };
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let loss = build(&mut g, &ids).expect("verify case builds");
    g.backward(loss).expect("scalar loss");
    let grads: Vec<Tensor4<f64>> = ids
        .iter()
        .zip(inputs)
        .map(|(id, t)| g.grad(*id).cloned().unwrap_or_else(|| Tensor4::zeros(t.shape())))
        .collect();

    let mut work: Vec<Tensor4<f64>> = inputs.to_vec();
    let mut max_err = 0.0f64;
    for ti in 0..inputs.len() {
        for ci in 0..inputs[ti].numel() {
            let orig = work[ti].as_slice()[ci];
            work[ti].as_mut_slice()[ci] = orig + FD_H;
            let plus = eval(&work);
            work[ti].as_mut_slice()[ci] = orig - FD_H;
            let minus = eval(&work);
            work[ti].as_mut_slice()[ci] = orig;
            let fd = (plus - minus) / (2.0 * FD_H);
            max_err = max_err.max(rel_err(grads[ti].as_slice()[ci], fd));
        }
    }
    max_err
}

/// Reduce an output tensor to a scalar through fixed random weights so
/// every output coordinate influences the loss.
fn weighted_sum(g: &mut Graph<f64>, y: NodeId, seed: u64) -> Result<NodeId> {
    let w = rand_tensor(g.shape(y), -1.0, 1.0, seed);
    let wc = g.constant(w);
    let prod = g.mul(y, wc)?;
    Ok(g.sum_all(prod))
}

fn wavelet_rows(report: &mut VerifyReport, opts: &VerifyOptions) {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut max_abs = 0.0f32;
    let mut max_energy_rel = 0.0f64;
    for i in 0..100 {
        let shape = Shape::new(
            rng.random_range(1..=4),
            rng.random_range(1..=16),
            2 * rng.random_range(1..=16),
            2 * rng.random_range(1..=16),
        );
        let mut t = Tensor4::<f32>::zeros(shape);
        for v in t.as_mut_slice() {
            *v = rng.random_range(-2.0..2.0);
        }
        let bands = dwt_haar(&t).expect("even dims");
        let mut rec = idwt_haar(&bands).expect("equal bands");
        if opts.inject_dwt_fault && i == 0 {
            rec.as_mut_slice()[0] += 1e-3;
        }
        max_abs = max_abs.max(rec.max_abs_diff(&t));
        let e_in = squared_sum(&t);
        let e_bands = squared_sum(&bands.ll)
            + squared_sum(&bands.lh)
            + squared_sum(&bands.hl)
            + squared_sum(&bands.hh);
        max_energy_rel = max_energy_rel.max((e_bands - e_in).abs() / e_in.max(1e-12));
    }
    report.push(
        "wavelet_round_trip",
        max_abs < 1e-5,
        format!("max abs err {max_abs:.3e} over 100 tensors (tol 1e-5)"),
    );
    report.push(
        "wavelet_energy",
        max_energy_rel < 1e-4,
        format!("max rel energy err {max_energy_rel:.3e} (tol 1e-4)"),
    );
}

fn per_op_gradient_rows(report: &mut VerifyReport) {
    let tol = 1e-6;

    let x = rand_tensor(Shape::new(2, 3, 6, 6), -1.5, 1.5, 1);
    let w = rand_tensor(Shape::new(4, 3, 3, 3), -0.8, 0.8, 2);
    let b = rand_tensor(Shape::new(1, 4, 1, 1), -0.3, 0.3, 3);
    let err = fd_check(&[x.clone(), w.clone(), b.clone()], |g, ids| {
        let y = g.conv2d(ids[0], ids[1], ids[2], 1, 1)?;
        weighted_sum(g, y, 11)
    });
    report.push_grad("grad_conv2d", tol, err);

    let err = fd_check(&[x.clone(), w, b], |g, ids| {
        let y = g.conv2d(ids[0], ids[1], ids[2], 2, 1)?;
        weighted_sum(g, y, 12)
    });
    report.push_grad("grad_conv2d_stride2", tol, err);

    let err = fd_check(&[rand_tensor(Shape::new(2, 3, 5, 5), -1.2, 1.2, 4)], |g, ids| {
        let y = g.instance_norm(ids[0], 1e-5);
        weighted_sum(g, y, 13)
    });
    report.push_grad("grad_instance_norm", tol, err);

    let err = fd_check(&[rand_tensor(Shape::new(2, 3, 4, 4), -1.0, 1.0, 5)], |g, ids| {
        let y = g.global_avg_pool(ids[0]);
        weighted_sum(g, y, 14)
    });
    report.push_grad("grad_global_avg_pool", tol, err);

    let err = fd_check(&[rand_tensor_off_kink(Shape::new(2, 2, 4, 4), 6)], |g, ids| {
        let y = g.relu(ids[0]);
        weighted_sum(g, y, 15)
    });
    report.push_grad("grad_relu", tol, err);

    let err = fd_check(&[rand_tensor(Shape::new(2, 2, 4, 4), -2.0, 2.0, 7)], |g, ids| {
        let y = g.sigmoid(ids[0]);
        weighted_sum(g, y, 16)
    });
    report.push_grad("grad_sigmoid", tol, err);

    let err = fd_check(&[rand_tensor(Shape::new(1, 2, 3, 3), -1.0, 1.0, 8)], |g, ids| {
        let y = g.upsample(ids[0], 2, UpsampleMode::Nearest)?;
        weighted_sum(g, y, 17)
    });
    report.push_grad("grad_upsample_nearest", tol, err);

    let err = fd_check(&[rand_tensor(Shape::new(1, 2, 3, 3), -1.0, 1.0, 9)], |g, ids| {
        let y = g.upsample(ids[0], 2, UpsampleMode::Bilinear)?;
        weighted_sum(g, y, 18)
    });
    report.push_grad("grad_upsample_bilinear", tol, err);

    let err = fd_check(&[rand_tensor(Shape::new(1, 2, 6, 6), -1.0, 1.0, 10)], |g, ids| {
        let y = g.dwt(ids[0])?;
        weighted_sum(g, y, 19)
    });
    report.push_grad("grad_dwt", tol, err);

    let err = fd_check(&[rand_tensor(Shape::new(1, 8, 3, 3), -1.0, 1.0, 20)], |g, ids| {
        let y = g.idwt(ids[0])?;
        weighted_sum(g, y, 21)
    });
    report.push_grad("grad_idwt", tol, err);

    let err = fd_check(
        &[
            rand_tensor_off_kink(Shape::new(1, 3, 4, 4), 22),
            rand_tensor_off_kink(Shape::new(1, 3, 4, 4), 23),
        ],
        |g, ids| {
            let y = edge_energy(g, ids[0], ids[1])?;
            weighted_sum(g, y, 24)
        },
    );
    report.push_grad("grad_edge_energy", tol, err);

    // Values split into two clusters well away from the adaptive
    // threshold, so no finite difference crosses the indicator.
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let e_vals = Tensor4::from_fn(Shape::new(2, 1, 4, 4), |_, _, _, _| {
        if rng.random_range(0.0..1.0) < 0.5 {
            rng.random_range(0.05..0.25)
        } else {
            rng.random_range(0.75..0.95)
        }
    });
    let (hp_store, hp) = test_wiser_params(1, 26);
    drop(hp_store);
    let err = fd_check(&[e_vals], |g, ids| {
        let y = edge_boost(g, ids[0], &hp)?;
        weighted_sum(g, y, 27)
    });
    report.push_grad("grad_edge_boost", tol, err);

    let f_c = rand_tensor(Shape::new(1, 3, 4, 4), -1.0, 1.0, 28);
    let gate_w = rand_tensor(Shape::new(1, 3, 1, 1), -0.7, 0.7, 29);
    let gate_b = rand_tensor(Shape::new(1, 1, 1, 1), -0.2, 0.2, 30);
    let err = fd_check(&[f_c, gate_w, gate_b], |g, ids| {
        let z = g.conv2d(ids[0], ids[1], ids[2], 1, 0)?;
        let gate = g.sigmoid(z);
        let y = g.affine(gate, 2.0 * 0.25, 1.0 - 0.25);
        weighted_sum(g, y, 31)
    });
    report.push_grad("grad_edge_select", tol, err);

    let err = fd_check(
        &[
            rand_tensor(Shape::new(2, 4, 3, 3), -1.0, 1.0, 32),
            rand_tensor(Shape::new(2, 4, 3, 3), -1.0, 1.0, 33),
        ],
        |g, ids| ortho_loss(g, ids[0], ids[1]),
    );
    report.push_grad("grad_ortho_loss", tol, err);

    let target = {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        Tensor4::from_fn(Shape::new(2, 2, 4, 4), |_, _, _, _| {
            if rng.random_range(0.0..1.0) < 0.4 {
                1.0
            } else {
                0.0
            }
        })
    };
    let probs = rand_tensor(Shape::new(2, 2, 4, 4), 0.05, 0.95, 35);
    let err = fd_check(&[probs], |g, ids| {
        let t = g.constant(target.clone());
        dice_loss(g, ids[0], t, 1.0)
    });
    report.push_grad("grad_dice_loss", 1e-5, err);

    let err = fd_check(&[rand_tensor(Shape::new(1, 2, 3, 5), -1.0, 1.0, 36)], |g, ids| {
        let p = g.pad_edge(ids[0], 1, 1);
        let c = g.crop(p, 3, 5)?;
        weighted_sum(g, c, 37)
    });
    report.push_grad("grad_pad_crop", tol, err);
}

fn test_wiser_params(channels: usize, seed: u64) -> (ParamStore<f64>, WiserParams) {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = WiserParams::init(&mut store, "w", channels, WiserHyper::default(), &mut rng)
        .expect("default hyper is valid");
    (store, p)
}

/// Full-module check: d(loss)/d(input) and d(loss)/d(params) for one
/// filter instance on a 1x4x8x8 input.
fn wiser_module_row(report: &mut VerifyReport) {
    let (store, p) = test_wiser_params(4, 40);
    let x0 = rand_tensor(Shape::new(1, 4, 8, 8), -1.2, 1.2, 41);

    let eval = |store: &ParamStore<f64>, x: &Tensor4<f64>| -> f64 {
        let mut g = Graph::new();
        let xi = g.leaf(x.clone(), false);
        let out = wiser_forward(&mut g, store, xi, &p).expect("forward");
        let data = weighted_sum(&mut g, out.s_tilde, 42).expect("weighted sum");
        let so = g.affine(out.ortho_term, 0.3, 0.0);
        let loss = g.add(data, so).expect("add");
        g.value(loss).item()
    };

    // Analytic gradients for the input and every parameter.
    let mut g = Graph::new();
    let xi = g.leaf(x0.clone(), true);
    let out = wiser_forward(&mut g, &store, xi, &p).expect("forward");
    let data = weighted_sum(&mut g, out.s_tilde, 42).expect("weighted sum");
    let so = g.affine(out.ortho_term, 0.3, 0.0);
    let loss = g.add(data, so).expect("add");
    g.backward(loss).expect("backward");
    let x_grad = g.grad(xi).cloned().expect("input grad");
    let mut store_grads = store.clone();
    store_grads.zero_grads();
    g.accumulate_param_grads(&mut store_grads);

    let mut max_err = 0.0f64;
    let mut x_work = x0.clone();
    for ci in 0..x0.numel() {
        let orig = x_work.as_slice()[ci];
        x_work.as_mut_slice()[ci] = orig + FD_H;
        let plus = eval(&store, &x_work);
        x_work.as_mut_slice()[ci] = orig - FD_H;
        let minus = eval(&store, &x_work);
        x_work.as_mut_slice()[ci] = orig;
        max_err = max_err.max(rel_err(x_grad.as_slice()[ci], (plus - minus) / (2.0 * FD_H)));
    }
    let mut work = store.clone();
    for id in store.ids() {
        for ci in 0..store.value(id).numel() {
            let orig = work.value(id).as_slice()[ci];
            work.value_mut(id).as_mut_slice()[ci] = orig + FD_H;
            let plus = eval(&work, &x0);
            work.value_mut(id).as_mut_slice()[ci] = orig - FD_H;
            let minus = eval(&work, &x0);
            work.value_mut(id).as_mut_slice()[ci] = orig;
            let analytic = store_grads
                .grad(id)
                .map(|t| t.as_slice()[ci])
                .unwrap_or(0.0);
            max_err = max_err.max(rel_err(analytic, (plus - minus) / (2.0 * FD_H)));
        }
    }
    report.push_grad("grad_wiser_module", 1e-4, max_err);
}

/// End-to-end: finite differences on 10 random parameter coordinates of
/// the full model through the total loss on a 1x3x32x32 input.
fn end_to_end_row(report: &mut VerifyReport) {
    let cfg = ModelConfig { depth: 4, base_width: 4, ..ModelConfig::default() };
    let train_cfg = TrainConfig { ..TrainConfig::default() };
    let model: Model<f64> =
        Model::new(cfg, WiserHyper::default(), 50).expect("model builds");
    let anat = crate::synth::AnatomySpec::default();
    let style = crate::synth::style_presets(crate::synth::StylePreset::Source);
    let (img32, mask32) = crate::synth::generate_sample(&anat, &style, 51, 32).expect("sample");
    let x0 = img32.cast::<f64>();
    let target = mask32.cast::<f64>();
    let epoch = 20; // past the ramp: the decorrelation term is active

    let eval = |store: &ParamStore<f64>| -> f64 {
        let mut m2 = Model::<f64>::new(cfg, WiserHyper::default(), 50).expect("model builds");
        m2.store = store.clone();
        let mut g = Graph::new();
        let xi = g.leaf(x0.clone(), false);
        let out = m2.forward(&mut g, xi, false).expect("forward");
        let t = g.constant(target.clone());
        let (_, comps) = total_loss(&mut g, &out, t, &train_cfg, epoch).expect("loss");
        comps.total
    };

    let mut g = Graph::new();
    let xi = g.leaf(x0.clone(), false);
    let out = model.forward(&mut g, xi, false).expect("forward");
    let t = g.constant(target.clone());
    let (loss, _) = total_loss(&mut g, &out, t, &train_cfg, epoch).expect("loss");
    g.backward(loss).expect("backward");
    let mut store_grads = model.store.clone();
    store_grads.zero_grads();
    g.accumulate_param_grads(&mut store_grads);

    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let ids: Vec<_> = model.store.ids().collect();
    let mut max_err = 0.0f64;
    let mut work = model.store.clone();
    for _ in 0..10 {
        let id = ids[rng.random_range(0..ids.len())];
        let ci = rng.random_range(0..model.store.value(id).numel());
        let orig = work.value(id).as_slice()[ci];
        work.value_mut(id).as_mut_slice()[ci] = orig + FD_H;
        let plus = eval(&work);
        work.value_mut(id).as_mut_slice()[ci] = orig - FD_H;
        let minus = eval(&work);
        work.value_mut(id).as_mut_slice()[ci] = orig;
        let analytic = store_grads.grad(id).map(|t| t.as_slice()[ci]).unwrap_or(0.0);
        max_err = max_err.max(rel_err(analytic, (plus - minus) / (2.0 * FD_H)));
    }
    report.push_grad("grad_end_to_end", 1e-4, max_err);
}

fn closed_form_rows(report: &mut VerifyReport) {
    let mut failures = Vec::new();
    let mut check = |name: &str, got: f64, want: f64, tol: f64| {
        if (got - want).abs() > tol {
            failures.push(format!("{name}: {got} != {want}"));
        }
    };

    // Dice table.
    {
        let mut g = Graph::<f64>::new();
        let t = Tensor4::from_vec(Shape::new(1, 1, 2, 2), vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let p = g.leaf(t.clone(), false);
        let y = g.constant(t);
        let d = dice_loss(&mut g, p, y, 1.0).unwrap();
        check("dice_perfect", g.value(d).item(), 0.0, 1e-6);

        let p = g.leaf(
            Tensor4::from_vec(Shape::new(1, 1, 2, 2), vec![1.0, 1.0, 0.0, 0.0]).unwrap(),
            false,
        );
        let y = g.constant(
            Tensor4::from_vec(Shape::new(1, 1, 2, 2), vec![0.0, 0.0, 1.0, 1.0]).unwrap(),
        );
        let d = dice_loss(&mut g, p, y, 1.0).unwrap();
        check("dice_disjoint", g.value(d).item(), 1.0 - 1.0 / 5.0, 1e-6);

        let p = g.leaf(
            Tensor4::from_vec(Shape::new(1, 1, 2, 3), vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0])
                .unwrap(),
            false,
        );
        let y = g.constant(
            Tensor4::from_vec(Shape::new(1, 1, 2, 3), vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0])
                .unwrap(),
        );
        let d = dice_loss(&mut g, p, y, 0.0).unwrap();
        check("dice_partial", g.value(d).item(), 1.0 / 3.0, 1e-6);
    }

    // Ortho table.
    {
        let mut g = Graph::<f64>::new();
        let v = Tensor4::from_vec(Shape::new(1, 4, 1, 1), vec![1.0, -1.0, 2.0, 0.5]).unwrap();
        let a = g.leaf(v.clone(), false);
        let b = g.leaf(v, false);
        let l = ortho_loss(&mut g, a, b).unwrap();
        check("ortho_identical", g.value(l).item(), 1.0, 1e-6);

        let x = Tensor4::from_vec(Shape::new(1, 4, 1, 1), vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let y = Tensor4::from_vec(Shape::new(1, 4, 1, 1), vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        let xi = g.leaf(x.clone(), false);
        let yi = g.leaf(y.clone(), false);
        let l = ortho_loss(&mut g, xi, yi).unwrap();
        check("ortho_orthogonal", g.value(l).item(), 0.0, 1e-6);

        let xa = Tensor4::from_vec(
            Shape::new(2, 4, 1, 1),
            vec![1.0, -1.0, 2.0, 0.5, 1.0, -1.0, 1.0, -1.0],
        )
        .unwrap();
        let xb = Tensor4::from_vec(
            Shape::new(2, 4, 1, 1),
            vec![1.0, -1.0, 2.0, 0.5, 1.0, 1.0, -1.0, -1.0],
        )
        .unwrap();
        let ai = g.leaf(xa, false);
        let bi = g.leaf(xb, false);
        let l = ortho_loss(&mut g, ai, bi).unwrap();
        check("ortho_batch_mean", g.value(l).item(), 0.5, 1e-6);
    }

    // Gate endpoints at eps = 0.25.
    {
        let mut g = Graph::<f64>::new();
        let eps = 0.25;
        for (z, want, name) in [
            (0.0, 1.0, "gate_identity"),
            (60.0, 1.0 + eps, "gate_upper"),
            (-60.0, 1.0 - eps, "gate_lower"),
        ] {
            let zi = g.leaf(Tensor4::scalar(z), false);
            let s = g.sigmoid(zi);
            let e = g.affine(s, 2.0 * eps, 1.0 - eps);
            check(name, g.value(e).item(), want, 1e-6);
        }
    }

    // Scheduler table must be exact.
    for (e, want, name) in [
        (5usize, 0.0, "lambda_warmup_end"),
        (10, 0.05, "lambda_midpoint"),
        (15, 0.1, "lambda_plateau"),
    ] {
        let got = lambda_schedule(e, 5, 10, 0.1);
        if got != want {
            failures.push(format!("{name}: {got} != {want}"));
        }
    }

    let passed = failures.is_empty();
    let detail = if passed {
        "dice/ortho/gate/scheduler tables match".to_string()
    } else {
        failures.join("; ")
    };
    report.push("loss_closed_forms", passed, detail);
}

/// Directed nearest-neighbor scan over boundary lists: the quadratic
/// oracle for the distance-transform implementation.
pub fn hd95_bruteforce(pred: &BinaryMask, gt: &BinaryMask) -> f64 {
    let pb = pred.boundary();
    let gb = gt.boundary();
    if pb.is_empty() || gb.is_empty() {
        return ((pred.h * pred.h + pred.w * pred.w) as f64).sqrt();
    }
    let directed = |from: &[(usize, usize)], to: &[(usize, usize)]| {
        let mut d: Vec<f64> = from
            .iter()
            .map(|&(y, x)| {
                to.iter()
                    .map(|&(gy, gx)| {
                        let dy = y as f64 - gy as f64;
                        let dx = x as f64 - gx as f64;
                        (dy * dy + dx * dx).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        percentile_linear(&d, 0.95)
    };
    directed(&pb, &gb).max(directed(&gb, &pb))
}

pub fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> BinaryMask {
    let mut m = BinaryMask::empty(h, w);
    // Scattered pixels plus a filled rectangle, so boundaries mix
    // isolated points and solid edges.
    for _ in 0..rng.random_range(2..30) {
        m.set(rng.random_range(0..h), rng.random_range(0..w), true);
    }
    let (y0, x0) = (rng.random_range(0..h - 4), rng.random_range(0..w - 4));
    let (rh, rw) = (rng.random_range(2..5), rng.random_range(2..5));
    for y in y0..y0 + rh {
        for x in x0..x0 + rw {
            m.set(y, x, true);
        }
    }
    m
}

fn hd95_oracle_row(report: &mut VerifyReport, pairs: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let mut mismatches = 0usize;
    for _ in 0..pairs {
        let a = random_mask(&mut rng, 32, 32);
        let b = random_mask(&mut rng, 32, 32);
        let fast = hd95(&a, &b).expect("same dims").value;
        let slow = hd95_bruteforce(&a, &b);
        if fast != slow {
            mismatches += 1;
        }
    }
    report.push(
        "hd95_oracle",
        mismatches == 0,
        format!("{mismatches} mismatches over {pairs} random 32x32 pairs"),
    );
}

fn adam_row(report: &mut VerifyReport) {
    let cfg = AdamConfig { lr: 1e-3, ..AdamConfig::default() };
    let mut store = ParamStore::<f64>::new();
    let id = store.register("w", Tensor4::scalar(0.4));
    store.zero_grads();
    let mut g = Graph::new();
    let x = g.param(&store, id);
    let sq = g.mul(x, x).unwrap();
    let loss = g.mean_all(sq);
    g.backward(loss).unwrap();
    g.accumulate_param_grads(&mut store);
    store.adam_step(&cfg).unwrap();
    let delta = store.value(id).item() - 0.4;
    let ok = (delta.abs() - cfg.lr).abs() < 1e-6 && delta < 0.0;
    report.push("adam_first_step", ok, format!("first-step displacement {delta:.3e}"));
}

/// Run the whole suite. Row order is stable; the CLI prints one line
/// per row.
pub fn run_suite(opts: &VerifyOptions) -> VerifyReport {
    let mut report = VerifyReport::default();
    wavelet_rows(&mut report, opts);
    per_op_gradient_rows(&mut report);
    wiser_module_row(&mut report);
    end_to_end_row(&mut report);
    closed_form_rows(&mut report);
    hd95_oracle_row(&mut report, 200);
    adam_row(&mut report);
    report
}
