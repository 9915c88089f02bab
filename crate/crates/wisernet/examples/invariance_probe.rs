use wisernet::losses::TrainConfig;
use wisernet::metrics::{cosine_similarity, embed, EmbedSpace};
use wisernet::segnet::{Model, ModelConfig};
use wisernet::synth::{generate_samples, style_presets, AnatomySpec, StylePreset};
use wisernet::train::fit;

fn wins(model: &Model<f32>, size: usize, offset: f32, level: usize) -> usize {
    let anat = AnatomySpec::default();
    let style = style_presets(StylePreset::Source);
    let probe = generate_samples(&anat, &style, 50, 9000, size).unwrap();
    let mut wins = 0;
    for s in &probe {
        let bright = s.image.map(|v| v + offset);
        let sim = |space| {
            let set = embed(model, &[s.image.clone(), bright.clone()], space, level, "p").unwrap();
            cosine_similarity(&set.vectors[0], &set.vectors[1])
        };
        if sim(EmbedSpace::Content) > sim(EmbedSpace::Style) {
            wins += 1;
        }
    }
    wins
}

fn main() {
    for (size, epochs, warmup, ramp, n) in
        [(32usize, 0usize, 2usize, 3usize, 48usize), (32, 12, 2, 3, 48), (64, 12, 3, 5, 120)]
    {
        let cfg = TrainConfig {
            epochs: epochs.max(1),
            patience: epochs.max(1),
            warmup_epochs: warmup,
            ramp_epochs: ramp,
            lr: 1e-3,
            input_size: size,
            ..TrainConfig::default()
        };
        let anat = AnatomySpec::default();
        let style = style_presets(StylePreset::Source);
        let train = generate_samples(&anat, &style, n, 77, size).unwrap();
        let val = generate_samples(&anat, &style, 12, 1077, size).unwrap();
        let mut model = Model::new(ModelConfig::default(), cfg.wiser_hyper(), 5).unwrap();
        if epochs > 0 {
            fit(&mut model, &train, &val, &cfg).unwrap();
        }
        for level in [1usize, 2] {
            for offset in [0.15f32, 0.25] {
                let w = wins(&model, size, offset, level);
                println!("size {size} epochs {epochs} level {level} offset {offset}: {w}/50");
            }
        }
    }
}
