//! Command-line harness: dataset generation, statistics, attribute
//! labeling, three-stage training, and evaluation.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{
    load_config_file, AblationConfig, AttrSourceKind, EvalRunConfig, GenerateRunConfig, ModelKind,
    TrainRunConfig,
};
use poselift::geometry::Tau;

#[derive(Parser)]
#[command(name = "poselift", version, about = "2D-to-3D pose lifting toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    /// RNG seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Commands {
    /// Generate synthetic train/val/test datasets plus a 2D-domain set
    Generate {
        #[command(flatten)]
        common: Common,
        /// Number of 3D-labeled records before splitting
        #[arg(long)]
        n: Option<usize>,
    },
    /// Per-joint positional standard deviation of a 3D dataset
    Stats {
        #[command(flatten)]
        common: Common,
        /// Dataset file
        #[arg(long)]
        data: PathBuf,
    },
    /// Recompute front/on-plane/back labels and report the histogram
    Attrs {
        #[command(flatten)]
        common: Common,
        /// Dataset file (3D-labeled)
        #[arg(long)]
        data: PathBuf,
        /// Absolute on-plane threshold in millimeters
        #[arg(long, conflicts_with = "tau_rel")]
        tau_mm: Option<f64>,
        /// Threshold as a fraction of the pelvis-thorax distance
        #[arg(long)]
        tau_rel: Option<f64>,
    },
    /// Run one training stage
    Train {
        #[command(flatten)]
        common: Common,
        /// Training stage: 1 multi-task head, 2 regressor, 3 fine-tune
        #[arg(long)]
        stage: Option<u32>,
        /// Directory holding train.jsonl / train_2d.jsonl
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Regressor kind: progressive or baseline
        #[arg(long)]
        model: Option<String>,
        /// Train the regressor without attribute evidence
        #[arg(long)]
        no_attributes: bool,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        /// Gradient-reversal strength; 0 disables the reversal
        #[arg(long)]
        lambda_grl: Option<f64>,
    },
    /// Evaluate a checkpoint (or three, in ablation mode)
    Eval {
        #[command(flatten)]
        common: Common,
        /// Regressor checkpoint
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Multi-task head checkpoint (for predicted attributes)
        #[arg(long)]
        head: Option<PathBuf>,
        /// Test dataset (3D-labeled)
        #[arg(long)]
        test: Option<PathBuf>,
        /// Attribute source: predicted, oracle, or none
        #[arg(long)]
        attr_source: Option<String>,
        /// Ablation mode: baseline checkpoint
        #[arg(long)]
        ablation_baseline: Option<PathBuf>,
        /// Ablation mode: progressive checkpoint
        #[arg(long)]
        ablation_progressive: Option<PathBuf>,
        /// Ablation mode: progressive+attributes checkpoint
        #[arg(long)]
        ablation_progressive_attr: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("poselift: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Commands::Generate { common, n } => {
            let mut cfg: GenerateRunConfig = match &common.config {
                Some(p) => load_config_file(p)?,
                None => GenerateRunConfig::default(),
            };
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(o) = common.out {
                cfg.out = o;
            }
            if let Some(n) = n {
                cfg.n = n;
            }
            commands::generate::run(cfg)
        }
        Commands::Stats { common, data } => {
            let out = common.out.unwrap_or_else(|| PathBuf::from("runs/stats"));
            commands::stats::run(commands::stats::StatsRunConfig { data, out })
        }
        Commands::Attrs {
            common,
            data,
            tau_mm,
            tau_rel,
        } => {
            let out = common.out.unwrap_or_else(|| PathBuf::from("runs/attrs"));
            let tau = match (tau_mm, tau_rel) {
                (Some(mm), _) => Tau::AbsoluteMm(mm),
                (None, Some(f)) => Tau::Relative(f),
                (None, None) => Tau::default(),
            };
            commands::attrs::run(commands::attrs::AttrsRunConfig { data, out, tau })
        }
        Commands::Train {
            common,
            stage,
            data_dir,
            model,
            no_attributes,
            epochs,
            lr,
            batch_size,
            width,
            depth,
            lambda_grl,
        } => {
            let mut cfg: TrainRunConfig = match &common.config {
                Some(p) => load_config_file(p)?,
                None => TrainRunConfig::default(),
            };
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(o) = common.out {
                cfg.out = o;
            }
            if let Some(s) = stage {
                cfg.stage = s;
            }
            if let Some(d) = data_dir {
                cfg.data_dir = Some(d);
            }
            if let Some(m) = model {
                cfg.model_kind = match m.as_str() {
                    "progressive" => ModelKind::Progressive,
                    "baseline" => ModelKind::Baseline,
                    other => anyhow::bail!("config: unknown model kind {other:?}"),
                };
            }
            if no_attributes {
                cfg.use_attributes = false;
            }
            if epochs.is_some() {
                cfg.epochs = epochs;
            }
            if lr.is_some() {
                cfg.lr = lr;
            }
            if batch_size.is_some() {
                cfg.batch_size = batch_size;
            }
            if let Some(w) = width {
                cfg.width = w;
            }
            if let Some(d) = depth {
                cfg.depth = d;
            }
            if let Some(l) = lambda_grl {
                cfg.lambda_grl = l;
            }
            commands::train::run(cfg)
        }
        Commands::Eval {
            common,
            checkpoint,
            head,
            test,
            attr_source,
            ablation_baseline,
            ablation_progressive,
            ablation_progressive_attr,
        } => {
            let mut cfg: EvalRunConfig = match &common.config {
                Some(p) => load_config_file(p)?,
                None => EvalRunConfig::default(),
            };
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(o) = common.out {
                cfg.out = o;
            }
            if checkpoint.is_some() {
                cfg.checkpoint = checkpoint;
            }
            if head.is_some() {
                cfg.head_checkpoint = head;
            }
            if test.is_some() {
                cfg.test = test;
            }
            if let Some(a) = attr_source {
                cfg.attr_source = match a.as_str() {
                    "predicted" => AttrSourceKind::Predicted,
                    "oracle" => AttrSourceKind::Oracle,
                    "none" => AttrSourceKind::None,
                    other => anyhow::bail!("config: unknown attr source {other:?}"),
                };
            }
            match (
                ablation_baseline,
                ablation_progressive,
                ablation_progressive_attr,
            ) {
                (Some(b), Some(p), Some(pa)) => {
                    cfg.ablation = Some(AblationConfig {
                        baseline: b,
                        progressive: p,
                        progressive_attr: pa,
                    });
                }
                (None, None, None) => {}
                _ => anyhow::bail!("config: ablation mode needs all three checkpoints"),
            }
            commands::eval::run(cfg)
        }
    }
}
