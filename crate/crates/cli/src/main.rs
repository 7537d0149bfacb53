use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Brick assembly on voxel grids.
#[derive(Debug, Parser)]
#[command(name = "brecs", version)]
struct Cli {
    /// Worker threads for batch commands (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Record wall-clock time in episode files. Off by default so that
    /// repeated runs are byte-identical.
    #[arg(long, global = true)]
    timing: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
struct AssemblyArgs {
    /// Maximum total number of bricks.
    #[arg(long, default_value_t = 150)]
    budget: usize,

    /// Optional cap on bricks added per brick type.
    #[arg(long)]
    phase_budget: Option<usize>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Brick types in phase order; each type also uses its rotation.
    #[arg(long, default_value = "2x4")]
    bricks: String,

    /// Per-voxel prediction grid used as the score source.
    #[arg(long)]
    score_grid: Option<PathBuf>,

    /// Positions with a masked score at or below this value are ignored.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,

    /// Ablation: skip the overlap check (bricks still stay in bounds).
    #[arg(long)]
    no_validity_check: bool,

    /// Pick the highest-scoring pivot instead of sampling.
    #[arg(long)]
    no_sampling: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assemble a structure from a single centred brick.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// Cube edge when no score grid fixes the dimensions.
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[command(flatten)]
        assembly: AssemblyArgs,
    },
    /// Continue a partial structure towards a target shape.
    Complete {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        partial: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        assembly: AssemblyArgs,
    },
    /// Generate ground-truth assembly sequences for every target in a directory.
    Sequences {
        #[arg(long)]
        targets: PathBuf,
        /// Sequences per target.
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        assembly: AssemblyArgs,
    },
    /// Draw k-step training pairs from stored sequences.
    Pairs {
        #[arg(long)]
        sequences: PathBuf,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 1024)]
        buffer: usize,
        #[arg(long, default_value_t = 1)]
        num_batches: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Remove a fraction of bricks while keeping the rest connected.
    MakePartial {
        #[arg(long)]
        episode: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Summarize a directory of episodes, with IoU when targets are given.
    Eval {
        #[arg(long)]
        episodes: PathBuf,
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check an episode for overlap, connectivity and vertical support.
    Validate {
        #[arg(long)]
        episode: PathBuf,
    },
    /// Block-max downsample a voxel grid, optionally centring it in a cube.
    Downscale {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        factor: usize,
        #[arg(long)]
        embed: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export an episode as an LDraw model.
    Ldraw {
        #[arg(long)]
        episode: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Relative output paths are placed under `BRECS_OUT_DIR` when it is set.
fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os("BRECS_OUT_DIR") {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
