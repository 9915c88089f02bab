use std::path::{Path, PathBuf};

use wisernet::error::Result;
use wisernet::metrics::{dsc, hd95, BinaryMask};
use wisernet::segnet::Model;
use wisernet::synth::{load_dataset, save_overlay};
use wisernet::tensor::{Graph, Tensor4};
use wisernet::train::Sample;

use crate::commands::{mean_sd, write_text};
use crate::manifest::RunManifest;

pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub domains: Vec<String>,
    pub out: PathBuf,
    pub overlays: bool,
}

#[derive(Clone, Debug)]
pub struct ImageMetrics {
    pub id: String,
    pub domain: String,
    pub dsc_od: f64,
    pub dsc_oc: f64,
    pub hd95_od: f64,
    pub hd95_oc: f64,
    pub flags: String,
}

/// Per-image DSC and HD95 for both classes at threshold 0.5, in sample
/// order. Optionally writes contour overlays.
pub fn eval_samples(
    model: &Model<f32>,
    samples: &[Sample],
    domain: &str,
    batch: usize,
    overlay_dir: Option<&Path>,
) -> Result<Vec<ImageMetrics>> {
    let mut rows = Vec::with_capacity(samples.len());
    if let Some(dir) = overlay_dir {
        std::fs::create_dir_all(dir).map_err(|e| wisernet::Error::io(dir, e))?;
    }
    for chunk in samples.chunks(batch.max(1)) {
        let images: Vec<&Tensor4<f32>> = chunk.iter().map(|s| &s.image).collect();
        let batch_t = Tensor4::concat_batch(&images)?;
        let mut g = Graph::new();
        let x = g.leaf(batch_t, false);
        let out = model.forward(&mut g, x, false)?;
        let probs = g.value(out.main_probs);
        for (bi, sample) in chunk.iter().enumerate() {
            let pred_od = BinaryMask::from_tensor_channel(probs, bi, 0, 0.5);
            let pred_oc = BinaryMask::from_tensor_channel(probs, bi, 1, 0.5);
            let gt_od = BinaryMask::from_tensor_channel(&sample.mask, 0, 0, 0.5);
            let gt_oc = BinaryMask::from_tensor_channel(&sample.mask, 0, 1, 0.5);
            let h_od = hd95(&pred_od, &gt_od)?;
            let h_oc = hd95(&pred_oc, &gt_oc)?;
            let mut flags = Vec::new();
            if h_od.degenerate {
                flags.push("hd95_od_degenerate");
            }
            if h_oc.degenerate {
                flags.push("hd95_oc_degenerate");
            }
            if let Some(dir) = overlay_dir {
                save_overlay(&sample.image, &pred_od, &pred_oc, &dir.join(format!("{}.png", sample.id)))?;
            }
            rows.push(ImageMetrics {
                id: sample.id.clone(),
                domain: domain.to_string(),
                dsc_od: dsc(&pred_od, &gt_od)?,
                dsc_oc: dsc(&pred_oc, &gt_oc)?,
                hd95_od: h_od.value,
                hd95_oc: h_oc.value,
                flags: flags.join("|"),
            });
        }
    }
    Ok(rows)
}

pub fn metrics_csv(rows: &[ImageMetrics]) -> String {
    let mut out = String::from("image_id,domain,dsc_od,dsc_oc,hd95_od,hd95_oc,flags\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{}\n",
            r.id, r.domain, r.dsc_od, r.dsc_oc, r.hd95_od, r.hd95_oc, r.flags
        ));
    }
    out
}

#[derive(Clone, Debug)]
pub struct DomainSummary {
    pub domain: String,
    pub n: usize,
    pub dsc_od: (f64, f64),
    pub dsc_oc: (f64, f64),
    pub hd95_od: (f64, f64),
    pub hd95_oc: (f64, f64),
}

pub fn summarize(domain: &str, rows: &[ImageMetrics]) -> DomainSummary {
    let col = |f: fn(&ImageMetrics) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    DomainSummary {
        domain: domain.to_string(),
        n: rows.len(),
        dsc_od: mean_sd(&col(|r| r.dsc_od)),
        dsc_oc: mean_sd(&col(|r| r.dsc_oc)),
        hd95_od: mean_sd(&col(|r| r.hd95_od)),
        hd95_oc: mean_sd(&col(|r| r.hd95_oc)),
    }
}

pub const SUMMARY_HEADER: &str =
    "domain,n,dsc_od_mean,dsc_od_sd,dsc_oc_mean,dsc_oc_sd,hd95_od_mean,hd95_od_sd,hd95_oc_mean,hd95_oc_sd";

pub fn summary_row(s: &DomainSummary) -> String {
    format!(
        "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
        s.domain,
        s.n,
        s.dsc_od.0,
        s.dsc_od.1,
        s.dsc_oc.0,
        s.dsc_oc.1,
        s.hd95_od.0,
        s.hd95_od.1,
        s.hd95_oc.0,
        s.hd95_oc.1
    )
}

/// Evaluate a trained checkpoint on whole domains: one per-image CSV
/// per domain plus a summary CSV, and optional contour overlays.
pub fn run(args: &EvalArgs) -> Result<()> {
    let (model, train_cfg, _) = super::train::load_model_from_run(&args.checkpoint)?;
    let mut manifest = RunManifest::begin(
        &args.out,
        "eval",
        &[
            ("checkpoint".into(), args.checkpoint.display().to_string()),
            ("data".into(), args.data.display().to_string()),
            ("domains".into(), args.domains.join(",")),
            ("overlays".into(), args.overlays.to_string()),
        ],
    )?;
    let mut summary_lines = vec![SUMMARY_HEADER.to_string()];
    for domain in &args.domains {
        let samples = load_dataset(&args.data.join(domain), train_cfg.input_size)?;
        let overlay_dir = args.overlays.then(|| args.out.join("overlays").join(domain));
        let rows =
            eval_samples(&model, &samples, domain, train_cfg.batch_size, overlay_dir.as_deref())?;
        let csv_path = args.out.join(format!("metrics_{domain}.csv"));
        write_text(&csv_path, &metrics_csv(&rows))?;
        manifest.add_output(&format!("metrics_{domain}"), &csv_path);
        summary_lines.push(summary_row(&summarize(domain, &rows)));
    }
    let summary_path = args.out.join("summary.csv");
    write_text(&summary_path, &(summary_lines.join("\n") + "\n"))?;
    manifest.add_output("summary", &summary_path);
    manifest.finalize()
}

/// Mean DSC over both classes for a prepared row set.
pub fn mean_dsc(rows: &[ImageMetrics]) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    rows.iter().map(|r| (r.dsc_od + r.dsc_oc) / 2.0).sum::<f64>() / rows.len() as f64
}
