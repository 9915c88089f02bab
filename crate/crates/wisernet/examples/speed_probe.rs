use wisernet::losses::TrainConfig;
use wisernet::segnet::{Model, ModelConfig};
use wisernet::synth::{generate_samples, style_presets, AnatomySpec, StylePreset};
use wisernet::train::fit;

fn main() {
    let anat = AnatomySpec::default();
    let style = style_presets(StylePreset::Source);
    let train = generate_samples(&anat, &style, 200, 7, 64).unwrap();
    let val = generate_samples(&anat, &style, 40, 7_000, 64).unwrap();
    let cfg = TrainConfig { epochs: 3, patience: 3, ..TrainConfig::default() };
    let mcfg = ModelConfig::default();
    let mut model = Model::new(mcfg, cfg.wiser_hyper(), 1).unwrap();
    let t0 = std::time::Instant::now();
    let r = fit(&mut model, &train, &val, &cfg).unwrap();
    for rec in &r.history.records {
        println!(
            "epoch {}: total {:.4} val_dsc {:?} time {:.2}s",
            rec.epoch, rec.loss_total, rec.val_dsc, rec.wall_time_s
        );
    }
    println!("3 epochs in {:.1}s", t0.elapsed().as_secs_f64());
}
