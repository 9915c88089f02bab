use std::collections::BTreeMap;
use std::path::PathBuf;

use wisernet::error::Result;
use wisernet::synth::load_dataset;

use crate::commands::eval::{eval_samples, summarize, summary_row, ImageMetrics, SUMMARY_HEADER};
use crate::commands::train::{load_model_from_run, run as run_train, split_source, TrainArgs};
use crate::commands::write_text;
use crate::manifest::RunManifest;

pub struct AblateArgs {
    pub data: PathBuf,
    pub out: PathBuf,
    pub seeds: Vec<u64>,
    pub targets: Vec<String>,
    pub source_domain: String,
    pub val_count: usize,
    pub config_file: Option<PathBuf>,
    pub flag_overrides: Vec<(String, String)>,
}

/// The three ablation rows: plain baseline, filter only, filter plus
/// deep supervision.
pub const CONFIGS: [(&str, bool, bool); 3] =
    [("base", false, false), ("wiser", true, false), ("wiser_ds", true, true)];

pub struct AblateOutputs {
    pub csv_path: PathBuf,
    /// `(config, domain) -> pooled per-image rows across seeds`.
    pub rows: BTreeMap<(String, String), Vec<ImageMetrics>>,
}

/// Train all three configurations with shared seeds, evaluate each on
/// the source validation split and every target domain, and emit one
/// comparison CSV shaped config x domain.
pub fn run(args: &AblateArgs) -> Result<AblateOutputs> {
    let mut manifest = RunManifest::begin(
        &args.out,
        "ablate",
        &[
            ("data".into(), args.data.display().to_string()),
            ("seeds".into(), args.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")),
            ("targets".into(), args.targets.join(",")),
            ("val_count".into(), args.val_count.to_string()),
        ],
    )?;

    let mut pooled: BTreeMap<(String, String), Vec<ImageMetrics>> = BTreeMap::new();
    for &seed in &args.seeds {
        for (name, wiser, ds) in CONFIGS {
            let run_dir = args.out.join(format!("{name}_seed{seed}"));
            let mut overrides = args.flag_overrides.clone();
            overrides.push(("seed".into(), seed.to_string()));
            overrides.push(("wiser".into(), wiser.to_string()));
            overrides.push(("ds".into(), ds.to_string()));
            let trained = run_train(&TrainArgs {
                data: args.data.clone(),
                out: run_dir.clone(),
                config_file: args.config_file.clone(),
                flag_overrides: overrides,
                source_domain: args.source_domain.clone(),
                val_count: args.val_count,
            })?;
            let (model, train_cfg, _) = load_model_from_run(&trained.checkpoint)?;

            let source =
                load_dataset(&args.data.join(&args.source_domain), train_cfg.input_size)?;
            let (_, val) = split_source(source, args.val_count)?;
            let rows = eval_samples(&model, &val, &args.source_domain, train_cfg.batch_size, None)?;
            pooled
                .entry((name.to_string(), args.source_domain.clone()))
                .or_default()
                .extend(rows);
            for domain in &args.targets {
                let samples = load_dataset(&args.data.join(domain), train_cfg.input_size)?;
                let rows = eval_samples(&model, &samples, domain, train_cfg.batch_size, None)?;
                pooled.entry((name.to_string(), domain.clone())).or_default().extend(rows);
            }
        }
    }

    let seeds_str =
        args.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("|");
    let mut lines = vec![format!("config,{SUMMARY_HEADER},seeds")];
    let mut domains = vec![args.source_domain.clone()];
    domains.extend(args.targets.iter().cloned());
    for (name, _, _) in CONFIGS {
        for domain in &domains {
            let rows = pooled
                .get(&(name.to_string(), domain.clone()))
                .expect("every config/domain pair was evaluated");
            let s = summarize(domain, rows);
            lines.push(format!("{name},{},{seeds_str}", summary_row(&s)));
        }
    }
    let csv_path = args.out.join("ablation.csv");
    write_text(&csv_path, &(lines.join("\n") + "\n"))?;
    manifest.add_output("ablation", &csv_path);
    manifest.finalize()?;
    Ok(AblateOutputs { csv_path, rows: pooled })
}
