//! `foa`: the focus-of-attention lab command line. Each subcommand drives
//! one module pipeline; all randomness is seeded and `--threads 1`
//! guarantees fully deterministic runs.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "foa", version, about = "Driver focus-of-attention laboratory")]
struct Cli {
    /// Worker threads (0 = automatic). One thread makes every command
    /// bit-for-bit reproducible.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fixation-map construction from a gaze log and homography chain.
    Fixmap {
        #[command(subcommand)]
        command: FixmapCommand,
    },
    /// Homography error analysis.
    Geom {
        #[command(subcommand)]
        command: GeomCommand,
    },
    /// Metric evaluation of predicted maps against ground truth.
    Metrics {
        #[command(subcommand)]
        command: MetricsCommand,
    },
    /// Dataset analyses (speed bins, semantic classes).
    Analyze {
        #[command(subcommand)]
        command: AnalyzeCommand,
    },
    /// Model training.
    Train {
        #[command(subcommand)]
        command: TrainCommand,
    },
    /// Fused inference over a clip.
    Infer(commands::InferArgs),
    /// Robustness evaluations of a trained model.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// The padded-convolution central-bias experiment.
    Bias {
        #[command(subcommand)]
        command: BiasCommand,
    },
    /// Foveated rendering of a frame under an attention map.
    Foveate(commands::FoveateArgs),
    /// Synthetic dataset generation.
    Synth {
        #[command(subcommand)]
        command: SynthCommand,
    },
}

#[derive(Subcommand)]
enum FixmapCommand {
    /// Build the map for one window of gaze records.
    Build(commands::FixmapBuildArgs),
}

#[derive(Subcommand)]
enum GeomCommand {
    /// Monte-Carlo verification of the error formulas and bounds.
    Verify(commands::GeomVerifyArgs),
    /// Projection error bound curve.
    Bound(commands::GeomBoundArgs),
}

#[derive(Subcommand)]
enum MetricsCommand {
    /// Per-frame CC / KL / IG with per-condition aggregates.
    Eval(commands::MetricsEvalArgs),
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Gaussian-spread determinant per scripted speed bin.
    Speed(commands::AnalyzeSpeedArgs),
    /// Semantic class composition across map thresholds.
    Semantics(commands::AnalyzeSemanticsArgs),
}

#[derive(Subcommand)]
enum TrainCommand {
    /// Pre-train one branch with the two-stream loss.
    Branch(commands::TrainBranchArgs),
    /// Fine-tune all branches against the fused loss.
    Fuse(commands::TrainFuseArgs),
}

#[derive(Subcommand)]
enum EvalCommand {
    /// KL-versus-horizontal-shift curve with mirror fill.
    Shift(commands::EvalShiftArgs),
}

#[derive(Subcommand)]
enum BiasCommand {
    /// Run the experiment arms and emit curves and prediction snapshots.
    Run(commands::BiasRunArgs),
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Generate the synthetic dataset.
    Generate(commands::SynthGenerateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("failed to configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Fixmap {
            command: FixmapCommand::Build(args),
        } => commands::fixmap_build(args),
        Command::Geom {
            command: GeomCommand::Verify(args),
        } => commands::geom_verify(args),
        Command::Geom {
            command: GeomCommand::Bound(args),
        } => commands::geom_bound(args),
        Command::Metrics {
            command: MetricsCommand::Eval(args),
        } => commands::metrics_eval(args),
        Command::Analyze {
            command: AnalyzeCommand::Speed(args),
        } => commands::analyze_speed(args),
        Command::Analyze {
            command: AnalyzeCommand::Semantics(args),
        } => commands::analyze_semantics(args),
        Command::Train {
            command: TrainCommand::Branch(args),
        } => commands::train_branch_cmd(args),
        Command::Train {
            command: TrainCommand::Fuse(args),
        } => commands::train_fuse_cmd(args),
        Command::Infer(args) => commands::infer_cmd(args),
        Command::Eval {
            command: EvalCommand::Shift(args),
        } => commands::eval_shift(args),
        Command::Bias {
            command: BiasCommand::Run(args),
        } => commands::bias_run(args),
        Command::Foveate(args) => commands::foveate_cmd(args),
        Command::Synth {
            command: SynthCommand::Generate(args),
        } => commands::synth_generate(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Exit code for failed verification-style checks.
pub(crate) const ACCEPTANCE_FAILURE: u8 = 3;

pub(crate) fn path_arg(p: &PathBuf) -> &std::path::Path {
    p.as_path()
}
