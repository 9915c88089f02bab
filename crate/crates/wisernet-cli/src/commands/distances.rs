use std::path::PathBuf;

use wisernet::error::Result;
use wisernet::metrics::{frechet, jsd, mmd, EmbedSpace, EmbeddingSet};
use wisernet::segnet::Model;
use wisernet::synth::load_dataset;
use wisernet::tensor::Tensor4;

use crate::commands::train::load_model_from_run;
use crate::commands::write_text;
use crate::manifest::RunManifest;

pub struct DistancesArgs {
    pub base_checkpoint: PathBuf,
    pub wiser_checkpoint: PathBuf,
    pub data: PathBuf,
    pub source_domain: String,
    pub targets: Vec<String>,
    pub space: String,
    pub level: usize,
    pub jsd_bins: usize,
    pub out: PathBuf,
}

#[derive(Clone, Debug)]
pub struct DistanceRow {
    pub pair: String,
    pub space: String,
    pub mmd: f64,
    pub jsd: f64,
    pub frechet: f64,
}

fn embed_domain(
    model: &Model<f32>,
    images: &[Tensor4<f32>],
    space: EmbedSpace,
    level: usize,
    domain: &str,
) -> Result<EmbeddingSet> {
    wisernet::metrics::embed(model, images, space, level, domain)
}

pub struct DistanceOutputs {
    pub rows: Vec<DistanceRow>,
    /// `(metric, without, with)` for the direction file.
    pub direction: Vec<(String, f64, f64)>,
}

/// Embed source and pooled-target images through both checkpoints and
/// report the three distribution distances per model, plus whether each
/// one drops when the skip filter is enabled.
pub fn run(args: &DistancesArgs) -> Result<DistanceOutputs> {
    let space = EmbedSpace::parse(&args.space)?;
    let mut manifest = RunManifest::begin(
        &args.out,
        "distances",
        &[
            ("base_checkpoint".into(), args.base_checkpoint.display().to_string()),
            ("wiser_checkpoint".into(), args.wiser_checkpoint.display().to_string()),
            ("space".into(), args.space.clone()),
            ("level".into(), args.level.to_string()),
            ("targets".into(), args.targets.join(",")),
        ],
    )?;

    let (base_model, base_cfg, _) = load_model_from_run(&args.base_checkpoint)?;
    let (wiser_model, wiser_cfg, _) = load_model_from_run(&args.wiser_checkpoint)?;

    let load_images = |domain: &str, size: usize| -> Result<Vec<Tensor4<f32>>> {
        Ok(load_dataset(&args.data.join(domain), size)?
            .into_iter()
            .map(|s| s.image)
            .collect())
    };

    let mut rows = Vec::new();
    let mut by_model = Vec::new();
    for (tag, model, cfg) in [
        ("without_wiser", &base_model, &base_cfg),
        ("with_wiser", &wiser_model, &wiser_cfg),
    ] {
        let source_images = load_images(&args.source_domain, cfg.input_size)?;
        let mut target_images = Vec::new();
        for t in &args.targets {
            target_images.extend(load_images(t, cfg.input_size)?);
        }
        let src = embed_domain(model, &source_images, space, args.level, &args.source_domain)?;
        let tgt = embed_domain(model, &target_images, space, args.level, "pooled_targets")?;
        let m = mmd(&src, &tgt)?.value;
        let j = jsd(&src, &tgt, args.jsd_bins)?;
        let f = frechet(&src, &tgt)?;
        rows.push(DistanceRow {
            pair: format!("{}_vs_pooled_targets@{tag}", args.source_domain),
            space: space.name().to_string(),
            mmd: m,
            jsd: j,
            frechet: f,
        });
        by_model.push((m, j, f));
    }

    let mut text = String::from("pair,space,mmd,jsd,frechet\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6}\n",
            r.pair, r.space, r.mmd, r.jsd, r.frechet
        ));
    }
    let csv_path = args.out.join("distances.csv");
    write_text(&csv_path, &text)?;
    manifest.add_output("distances", &csv_path);

    let direction = vec![
        ("mmd".to_string(), by_model[0].0, by_model[1].0),
        ("jsd".to_string(), by_model[0].1, by_model[1].1),
        ("frechet".to_string(), by_model[0].2, by_model[1].2),
    ];
    let mut dir_text = String::from("metric,without_wiser,with_wiser,drops_with_wiser\n");
    for (name, without, with) in &direction {
        dir_text.push_str(&format!("{name},{without:.6},{with:.6},{}\n", with < without));
    }
    let dir_path = args.out.join("direction.csv");
    write_text(&dir_path, &dir_text)?;
    manifest.add_output("direction", &dir_path);
    manifest.finalize()?;
    Ok(DistanceOutputs { rows, direction })
}
