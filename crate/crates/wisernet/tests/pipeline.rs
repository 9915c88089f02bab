//! End-to-end pipeline at miniature scale: generate, train briefly,
//! checkpoint round trip, embeddings, brightness-invariance oracle.

use wisernet::losses::TrainConfig;
use wisernet::metrics::{cosine_similarity, embed, EmbedSpace};
use wisernet::segnet::{Model, ModelConfig};
use wisernet::synth::{generate_samples, style_presets, AnatomySpec, StylePreset};
use wisernet::tensor::{load_checkpoint, save_checkpoint, Graph, Tensor4};
use wisernet::train::{evaluate_mean_dsc, fit, Sample};

fn mini_cfg() -> TrainConfig {
    TrainConfig {
        epochs: 6,
        patience: 6,
        batch_size: 8,
        lr: 1e-3,
        input_size: 32,
        ds_weights: vec![0.2, 0.2, 0.1],
        ..TrainConfig::default()
    }
}

fn mini_data(n: usize, seed: u64) -> Vec<Sample> {
    let anat = AnatomySpec::default();
    let style = style_presets(StylePreset::Source);
    generate_samples(&anat, &style, n, seed, 32).unwrap()
}

#[test]
fn training_learns_and_checkpoint_round_trips() {
    let cfg = mini_cfg();
    let train = mini_data(48, 77);
    let val = mini_data(12, 1077);
    let mcfg = ModelConfig { base_width: 8, ..ModelConfig::default() };
    let mut model = Model::new(mcfg, cfg.wiser_hyper(), cfg.seed).unwrap();

    let before = evaluate_mean_dsc(&model, &val, cfg.batch_size).unwrap();
    let result = fit(&mut model, &train, &val, &cfg).unwrap();
    let after = evaluate_mean_dsc(&model, &val, cfg.batch_size).unwrap();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(
        mean(&after) > mean(&before) + 10.0,
        "training should lift val DSC: {before:?} -> {after:?}"
    );
    assert!(result.best_val_dsc >= mean(&after) - 1e-9);

    // Checkpoint round trip: identical weights, identical predictions.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&model.store, &path).unwrap();
    let mut restored = Model::new(mcfg, cfg.wiser_hyper(), 999).unwrap();
    load_checkpoint(&mut restored.store, &path).unwrap();
    let probs = |m: &Model<f32>| {
        let mut g = Graph::new();
        let x = g.leaf(val[0].image.clone(), false);
        let out = m.forward(&mut g, x, false).unwrap();
        g.value(out.main_probs).clone()
    };
    assert_eq!(probs(&model), probs(&restored));

    // Model summary parameter count equals checkpoint tensor elements.
    let summary = model.summary((32, 32)).unwrap();
    assert_eq!(summary.params, model.store.total_elements());
}

#[test]
fn content_embeddings_shrug_off_brightness_offsets() {
    // Train past the decorrelation warmup so the branches specialize,
    // then compare content vs style sensitivity to a global brightness
    // offset on 50 seeded images. Untrained branches do not separate.
    let cfg = TrainConfig {
        epochs: 12,
        patience: 12,
        warmup_epochs: 2,
        ramp_epochs: 3,
        ..mini_cfg()
    };
    let train = mini_data(48, 303);
    let val = mini_data(12, 1303);
    let mut model =
        Model::new(ModelConfig { base_width: 8, ..ModelConfig::default() }, cfg.wiser_hyper(), 5)
            .unwrap();
    fit(&mut model, &train, &val, &cfg).unwrap();

    let probe = mini_data(50, 9000);
    let offset = 0.15f32;
    let mut wins = 0;
    for sample in &probe {
        let bright = sample.image.map(|v| v + offset);
        let pair = |space: EmbedSpace| {
            let sets = embed(&model, &[sample.image.clone(), bright.clone()], space, 1, "probe")
                .unwrap();
            cosine_similarity(&sets.vectors[0], &sets.vectors[1])
        };
        if pair(EmbedSpace::Content) > pair(EmbedSpace::Style) {
            wins += 1;
        }
    }
    assert!(wins >= 40, "content invariance held on only {wins}/50 pairs");
}

#[test]
fn embed_contract_errors_and_shapes() {
    let cfg = mini_cfg();
    let base = Model::new(
        ModelConfig { wiser_enabled: false, ds_enabled: false, ..ModelConfig::default() },
        cfg.wiser_hyper(),
        1,
    )
    .unwrap();
    let images: Vec<Tensor4<f32>> = mini_data(2, 42).into_iter().map(|s| s.image).collect();
    // Content embeddings need the filter.
    assert!(embed(&base, &images, EmbedSpace::Content, 1, "x").is_err());
    // Bottleneck embeddings work for the baseline and have C_L dims.
    let set = embed(&base, &images, EmbedSpace::Bottleneck, 1, "x").unwrap();
    assert_eq!(set.len(), 2);
    assert_eq!(set.dim(), 64);
    // Duplicate image => duplicate row.
    let dup = embed(&base, &[images[0].clone(), images[0].clone()], EmbedSpace::Bottleneck, 1, "x")
        .unwrap();
    assert_eq!(dup.vectors[0], dup.vectors[1]);
}
