//! Reduced-scale probe of the ablation direction: trains base / wiser /
//! wiser_ds on a smaller split and prints per-domain DSC. For preset
//! calibration, not part of the test suite.

use wisernet::losses::TrainConfig;
use wisernet::metrics::{dsc, BinaryMask};
use wisernet::segnet::{Model, ModelConfig};
use wisernet::synth::{generate_samples, style_presets, AnatomySpec, StylePreset};
use wisernet::tensor::{Graph, Tensor4};
use wisernet::train::{fit, Sample};

fn mean_dsc(model: &Model<f32>, samples: &[Sample]) -> (f64, f64) {
    let mut od = 0.0;
    let mut oc = 0.0;
    for chunk in samples.chunks(8) {
        let images: Vec<&Tensor4<f32>> = chunk.iter().map(|s| &s.image).collect();
        let batch = Tensor4::concat_batch(&images).unwrap();
        let mut g = Graph::new();
        let x = g.leaf(batch, false);
        let out = model.forward(&mut g, x, false).unwrap();
        let probs = g.value(out.main_probs);
        for (bi, s) in chunk.iter().enumerate() {
            let p0 = BinaryMask::from_tensor_channel(probs, bi, 0, 0.5);
            let p1 = BinaryMask::from_tensor_channel(probs, bi, 1, 0.5);
            let g0 = BinaryMask::from_tensor_channel(&s.mask, 0, 0, 0.5);
            let g1 = BinaryMask::from_tensor_channel(&s.mask, 0, 1, 0.5);
            od += dsc(&p0, &g0).unwrap();
            oc += dsc(&p1, &g1).unwrap();
        }
    }
    (od / samples.len() as f64, oc / samples.len() as f64)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(40);
    let n_train: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(120);

    let anat = AnatomySpec::default();
    let src = style_presets(StylePreset::Source);
    let train = generate_samples(&anat, &src, n_train, 7, 64).unwrap();
    let val = generate_samples(&anat, &src, 30, 7 + 500_000, 64).unwrap();
    let domains: Vec<(String, Vec<Sample>)> = [
        StylePreset::ShiftMild,
        StylePreset::ShiftColor,
        StylePreset::ShiftLowlight,
    ]
    .into_iter()
    .map(|p| {
        let style = style_presets(p);
        (style.name.clone(), generate_samples(&anat, &style, 40, 7, 64).unwrap())
    })
    .collect();

    for (name, wiser, ds) in [("base", false, false), ("wiser", true, false), ("wiser_ds", true, true)] {
        let cfg = TrainConfig {
            epochs,
            lr: 1e-3,
            seed,
            ..TrainConfig::default()
        };
        let mcfg = ModelConfig { wiser_enabled: wiser, ds_enabled: ds, ..ModelConfig::default() };
        let mut model = Model::new(mcfg, cfg.wiser_hyper(), seed).unwrap();
        let t0 = std::time::Instant::now();
        let r = fit(&mut model, &train, &val, &cfg).unwrap();
        let (src_od, src_oc) = mean_dsc(&model, &val);
        print!(
            "{name:8} seed {seed} ep{:<3} [{:.0}s] src {src_od:.1}/{src_oc:.1}",
            r.history.records.len(),
            t0.elapsed().as_secs_f64()
        );
        let mut tgt_sum = 0.0;
        for (dn, samples) in &domains {
            let (od, oc) = mean_dsc(&model, samples);
            print!("  {dn} {od:.1}/{oc:.1}");
            tgt_sum += (od + oc) / 2.0;
        }
        println!("  | mean_tgt {:.2}", tgt_sum / domains.len() as f64);
    }
}
