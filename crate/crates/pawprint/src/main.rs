use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pawprint::commands::{
    self, ClassifyArgs, CommandError, EvaluateArgs, EvaluationInput, LabelKind, NormalizeArgs,
    RerankArgs, RunArgs,
};

#[derive(Parser)]
#[command(
    name = "pawprint",
    version,
    about = "Dog face normalization, matching and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Label {
    Identity,
    Breed,
}

impl From<Label> for LabelKind {
    fn from(l: Label) -> Self {
        match l {
            Label::Identity => LabelKind::Identity,
            Label::Breed => LabelKind::Breed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Rotate, crop and resize every manifest image to a square face.
    Normalize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        landmarks: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 224)]
        out_side: usize,
        /// Exit with status 1 if any row fails.
        #[arg(long)]
        strict: bool,
    },
    /// Add a horizontally mirrored copy of every image.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Assign images to cross-validation folds per identity.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score probes against per-label centroids of the gallery.
    Classify {
        #[arg(long)]
        manifest: PathBuf,
        /// Probe manifest; without it the split column selects train and test rows.
        #[arg(long)]
        probes: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Label::Identity)]
        label: Label,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weighted sum of raw-image and normalized-image scores.
    Fuse {
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        normalized: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-rank identity scores by gender and breed.
    Rerank {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        /// male, female or unknown.
        #[arg(long)]
        gender: Option<String>,
        /// Breed label or unknown.
        #[arg(long)]
        breed: Option<String>,
        /// Per-probe `probe_id,gender,breed` overrides.
        #[arg(long)]
        attrs: Option<PathBuf>,
        /// Keep the input scores when no identity matches.
        #[arg(long)]
        fallback_raw: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank-1 accuracy report from predictions or scores.
    Evaluate {
        #[arg(long, conflicts_with_all = ["scores", "manifest"], required_unless_present = "scores")]
        predictions: Option<PathBuf>,
        #[arg(long, requires = "manifest")]
        scores: Option<PathBuf>,
        /// Source of the true labels for `--scores`.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Label::Identity)]
        label: Label,
        #[arg(long)]
        exclude_empty_classes: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validated experiment comparing Default and Assisted identification.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        landmarks: Option<PathBuf>,
        #[arg(long)]
        attrs: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(command: Command) -> Result<(), CommandError> {
    match command {
        Command::Normalize {
            manifest,
            landmarks,
            out_dir,
            out_side,
            strict,
        } => {
            let s = commands::cmd_normalize(&NormalizeArgs {
                manifest,
                landmarks,
                out_dir,
                out_side,
                strict,
            })?;
            println!(
                "normalized {} images, {} failures",
                s.manifest.rows.len(),
                s.failures.len()
            );
        }
        Command::Augment { manifest, out_dir } => {
            let m = commands::cmd_augment(&manifest, &out_dir)?;
            println!("wrote {} rows", m.rows.len());
        }
        Command::Split {
            manifest,
            k,
            seed,
            out,
        } => {
            let folds = commands::cmd_split(&manifest, k, seed, &out)?;
            println!("assigned {} images to {k} folds", folds.len());
        }
        Command::Classify {
            manifest,
            probes,
            label,
            temperature,
            out,
        } => {
            let t = commands::cmd_classify(&ClassifyArgs {
                manifest,
                probes,
                label: label.into(),
                temperature,
                out,
            })?;
            println!(
                "scored {} probes over {} labels",
                t.rows.len(),
                t.labels.len()
            );
        }
        Command::Fuse {
            raw,
            normalized,
            alpha,
            out,
        } => {
            let t = commands::cmd_fuse(&raw, &normalized, alpha, &out)?;
            println!("fused {} probes", t.rows.len());
        }
        Command::Rerank {
            scores,
            registry,
            gender,
            breed,
            attrs,
            fallback_raw,
            out,
        } => {
            let r = commands::cmd_rerank(&RerankArgs {
                scores,
                registry,
                gender,
                breed,
                attrs,
                fallback_raw,
                out,
            })?;
            println!(
                "re-ranked {} probes, {} fallbacks",
                r.table.rows.len(),
                r.fallbacks.len()
            );
        }
        Command::Evaluate {
            predictions,
            scores,
            manifest,
            label,
            exclude_empty_classes,
            out,
        } => {
            let input = match (predictions, scores, manifest) {
                (Some(p), None, None) => EvaluationInput::Predictions(p),
                (None, Some(scores), Some(manifest)) => EvaluationInput::Scores {
                    scores,
                    manifest,
                    label: label.into(),
                },
                _ => {
                    return Err(CommandError::Config(
                        "give --predictions, or --scores with --manifest".into(),
                    ))
                }
            };
            let report = commands::cmd_evaluate(&EvaluateArgs {
                input,
                exclude_empty_classes,
                out: out.clone(),
            })?;
            if out.is_none() {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?
                );
            }
        }
        Command::Run {
            config,
            manifest,
            registry,
            landmarks,
            attrs,
            out,
        } => {
            let report = commands::cmd_run_experiment(&RunArgs {
                config,
                manifest,
                registry,
                landmarks,
                attrs,
                out: out.clone(),
            })?;
            if out.is_none() {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?
                );
            } else {
                println!(
                    "default {:.4} / assisted {:.4} mean averaged accuracy",
                    report.default.averaged, report.assisted.averaged
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            match e {
                CommandError::Failed(inner) => eprintln!("error: {inner:#}"),
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(code as u8)
        }
    }
}
