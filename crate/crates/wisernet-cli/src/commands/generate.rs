use std::path::PathBuf;

use wisernet::error::Result;
use wisernet::synth::{generate_domain, style_presets, AnatomySpec, StylePreset};

use crate::manifest::RunManifest;

pub struct GenerateArgs {
    pub out: PathBuf,
    pub source: String,
    pub targets: Vec<String>,
    /// Source training images.
    pub n: usize,
    /// Extra source images reserved for validation.
    pub n_val: usize,
    /// Images per target domain.
    pub n_target: usize,
    pub seed: u64,
    pub size: usize,
}

/// Create one source and N target domain directories. All domains share
/// the same per-sample seeds, so masks are identical across domains and
/// only the style differs.
pub fn run(args: &GenerateArgs) -> Result<()> {
    let source_preset = StylePreset::parse(&args.source)?;
    let target_presets: Vec<StylePreset> =
        args.targets.iter().map(|t| StylePreset::parse(t)).collect::<Result<_>>()?;

    let mut manifest = RunManifest::begin(
        &args.out,
        "generate",
        &[
            ("seed".into(), args.seed.to_string()),
            ("size".into(), args.size.to_string()),
            ("n".into(), args.n.to_string()),
            ("n_val".into(), args.n_val.to_string()),
            ("n_target".into(), args.n_target.to_string()),
            ("source".into(), args.source.clone()),
            ("targets".into(), args.targets.join(",")),
        ],
    )?;

    let anat = AnatomySpec::default();
    let source_dir = args.out.join(source_preset.name());
    generate_domain(
        &anat,
        &style_presets(source_preset),
        args.n + args.n_val,
        args.seed,
        args.size,
        &source_dir,
    )?;
    manifest.add_output(source_preset.name(), &source_dir);
    for preset in target_presets {
        let dir = args.out.join(preset.name());
        generate_domain(&anat, &style_presets(preset), args.n_target, args.seed, args.size, &dir)?;
        manifest.add_output(preset.name(), &dir);
    }
    manifest.finalize()
}
