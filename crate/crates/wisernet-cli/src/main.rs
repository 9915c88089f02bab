use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wisernet_cli::commands;
use wisernet_cli::exit_code_for;

#[derive(Parser)]
#[command(name = "wisernet", version, about = "Wavelet-filtered segmentation benchmark")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Training knobs shared by `train` and `ablate`; every flag overrides
/// the config file, which overrides the built-in defaults.
#[derive(Args, Clone, Default)]
struct TrainOverrides {
    /// Plain-text key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    input_size: Option<usize>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    base_width: Option<usize>,
    /// Enable or disable the wavelet skip filter (on|off).
    #[arg(long, value_parser = parse_switch)]
    wiser: Option<bool>,
    /// Enable or disable deep supervision (on|off).
    #[arg(long, value_parser = parse_switch)]
    ds: Option<bool>,
}

fn parse_switch(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(format!("expected on|off, got '{other}'")),
    }
}

impl TrainOverrides {
    fn to_pairs(&self) -> Vec<(String, String)> {
        let mut v = Vec::new();
        let mut push = |k: &str, val: Option<String>| {
            if let Some(val) = val {
                v.push((k.to_string(), val));
            }
        };
        push("seed", self.seed.map(|x| x.to_string()));
        push("epochs", self.epochs.map(|x| x.to_string()));
        push("lr", self.lr.map(|x| x.to_string()));
        push("batch_size", self.batch_size.map(|x| x.to_string()));
        push("patience", self.patience.map(|x| x.to_string()));
        push("input_size", self.input_size.map(|x| x.to_string()));
        push("lambda_max", self.lambda_max.map(|x| x.to_string()));
        push("depth", self.depth.map(|x| x.to_string()));
        push("base_width", self.base_width.map(|x| x.to_string()));
        push("wiser", self.wiser.map(|x| x.to_string()));
        push("ds", self.ds.map(|x| x.to_string()));
        v
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the source and target synthetic domains.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// Style preset of the training domain.
        #[arg(long, default_value = "source")]
        source: String,
        /// Comma-separated target presets.
        #[arg(long, default_value = "shift_mild,shift_color,shift_lowlight", value_delimiter = ',')]
        targets: Vec<String>,
        /// Source training images.
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Source validation images (appended to the source domain).
        #[arg(long, default_value_t = 40)]
        n_val: usize,
        /// Images per target domain.
        #[arg(long, default_value_t = 60)]
        n_target: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Image side in pixels.
        #[arg(long, default_value_t = 64)]
        size: usize,
    },
    /// Train one model on the source domain.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "source")]
        source_domain: String,
        /// Samples held out from the end of the source manifest.
        #[arg(long, default_value_t = 40)]
        val_count: usize,
        #[command(flatten)]
        overrides: TrainOverrides,
    },
    /// Evaluate a checkpoint on one or more domains.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',')]
        domains: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Also write prediction contour overlays.
        #[arg(long, default_value_t = false)]
        overlays: bool,
    },
    /// Train and compare baseline, +filter, +filter+DS configurations.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "7,8,9", value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value = "shift_mild,shift_color,shift_lowlight", value_delimiter = ',')]
        targets: Vec<String>,
        #[arg(long, default_value = "source")]
        source_domain: String,
        #[arg(long, default_value_t = 40)]
        val_count: usize,
        #[command(flatten)]
        overrides: TrainOverrides,
    },
    /// Feature-space distances between source and pooled targets for a
    /// baseline/filter checkpoint pair.
    Distances {
        #[arg(long)]
        base_checkpoint: PathBuf,
        #[arg(long)]
        wiser_checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "source")]
        source_domain: String,
        #[arg(long, default_value = "shift_mild,shift_color,shift_lowlight", value_delimiter = ',')]
        targets: Vec<String>,
        /// Embedding space: bottleneck, content, or style.
        #[arg(long, default_value = "bottleneck")]
        space: String,
        /// Filter level for content/style spaces.
        #[arg(long, default_value_t = 1)]
        level: usize,
        #[arg(long, default_value_t = 32)]
        jsd_bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the property suite and print a pass/fail table.
    Verify {
        /// Test fixture: force a reconstruction failure.
        #[arg(long, hide = true, default_value_t = false)]
        inject_dwt_fault: bool,
    },
}

fn dispatch(cmd: Cmd) -> Result<ExitCode, wisernet::Error> {
    match cmd {
        Cmd::Generate { out, source, targets, n, n_val, n_target, seed, size } => {
            commands::generate::run(&commands::generate::GenerateArgs {
                out,
                source,
                targets,
                n,
                n_val,
                n_target,
                seed,
                size,
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Train { data, out, source_domain, val_count, overrides } => {
            let run = commands::train::run(&commands::train::TrainArgs {
                data,
                out,
                config_file: overrides.config.clone(),
                flag_overrides: overrides.to_pairs(),
                source_domain,
                val_count,
            })?;
            println!(
                "trained: best epoch {} with mean val DSC {:.2} -> {}",
                run.best_epoch,
                run.best_val_dsc,
                run.checkpoint.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Eval { checkpoint, data, domains, out, overlays } => {
            commands::eval::run(&commands::eval::EvalArgs {
                checkpoint,
                data,
                domains,
                out,
                overlays,
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Ablate { data, out, seeds, targets, source_domain, val_count, overrides } => {
            let outputs = commands::ablate::run(&commands::ablate::AblateArgs {
                data,
                out,
                seeds,
                targets,
                source_domain,
                val_count,
                config_file: overrides.config.clone(),
                flag_overrides: overrides.to_pairs(),
            })?;
            println!("ablation table -> {}", outputs.csv_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Distances {
            base_checkpoint,
            wiser_checkpoint,
            data,
            source_domain,
            targets,
            space,
            level,
            jsd_bins,
            out,
        } => {
            let outputs = commands::distances::run(&commands::distances::DistancesArgs {
                base_checkpoint,
                wiser_checkpoint,
                data,
                source_domain,
                targets,
                space,
                level,
                jsd_bins,
                out,
            })?;
            for (metric, without, with) in &outputs.direction {
                println!("{metric}: {without:.6} -> {with:.6}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { inject_dwt_fault } => {
            if commands::verify::run(inject_dwt_fault) {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err) as u8)
        }
    }
}
