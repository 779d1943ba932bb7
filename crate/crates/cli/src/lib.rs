//! `hemfair`: synthetic corpora, HEM scores, bias analysis and fair training.

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::Ctx;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "hemfair", version, about = "Heterogeneity-aware bias analysis and fair rating prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// JSON file overriding any subset of the default run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; for `synth` it replaces the configured corpus seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for per-talk and per-grid-point parallelism.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// HEM scores written by `hem` [default: <out>/hem.csv].
    #[arg(long)]
    hem: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted relationships.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Compute HEM scores; writes hem.csv and segment_eigs.csv.
    Hem {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Rating curves and conditional bias tables over HEM bins.
    Analyze {
        #[arg(long)]
        manifest: PathBuf,
        /// [default: <out>/hem.csv]
        #[arg(long)]
        hem: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train one model; writes model.json, trace.csv, predictions.csv and report.json.
    Train {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Train and evaluate every (epsilon, lambda) grid point.
    Grid {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        common: Common,
    },
    /// Rebuild the fairness report from a prediction dump.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// [default: <out>/predictions.csv]
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// [default: <out>/hem.csv]
        #[arg(long)]
        hem: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Hem { .. } => "hem",
            Command::Analyze { .. } => "analyze",
            Command::Train { .. } => "train",
            Command::Grid { .. } => "grid",
            Command::Evaluate { .. } => "evaluate",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Synth { common }
            | Command::Hem { common, .. }
            | Command::Analyze { common, .. }
            | Command::Train { common, .. }
            | Command::Grid { common, .. }
            | Command::Evaluate { common, .. } => common,
        }
    }
}

/// The error chain on one line, skipping causes their parent already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !text.ends_with(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}

const USAGE: u8 = 1;
const DATA: u8 = 2;

fn context(command: &Command) -> anyhow::Result<Ctx> {
    let common = command.common();
    let mut config = RunConfig::load(common.config.as_deref())?;
    if let Command::Train { epsilon, lambda, .. } = command {
        config.epsilon = epsilon.unwrap_or(config.epsilon);
        config.lambda = lambda.unwrap_or(config.lambda);
    }
    let seed = match command {
        Command::Synth { .. } => common.seed.unwrap_or(config.synth.seed),
        _ => common.seed.unwrap_or(0),
    };
    if let Command::Synth { .. } = command {
        config.synth.seed = seed;
    }
    if common.threads == 0 {
        anyhow::bail!("--threads must be at least 1");
    }
    Ok(Ctx {
        hash: config.hash(command.name(), seed),
        config,
        seed,
        threads: common.threads,
        out: common.out.clone(),
    })
}

fn execute(command: &Command, ctx: &Ctx) -> anyhow::Result<()> {
    commands::ensure_out(&ctx.out)?;
    let default_hem = || ctx.out.join("hem.csv");
    match command {
        Command::Synth { .. } => commands::synth(ctx),
        Command::Hem { manifest, embeddings, .. } => commands::hem(ctx, manifest, embeddings),
        Command::Analyze { manifest, hem, .. } => {
            commands::analyze(ctx, manifest, &hem.clone().unwrap_or_else(default_hem))
        }
        Command::Train { inputs, .. } => commands::train(
            ctx,
            &inputs.manifest,
            &inputs.embeddings,
            &inputs.hem.clone().unwrap_or_else(default_hem),
        ),
        Command::Grid { inputs, .. } => commands::grid(
            ctx,
            &inputs.manifest,
            &inputs.embeddings,
            &inputs.hem.clone().unwrap_or_else(default_hem),
        ),
        Command::Evaluate {
            manifest,
            predictions,
            hem,
            ..
        } => commands::evaluate_dump(
            ctx,
            manifest,
            &predictions.clone().unwrap_or_else(|| ctx.out.join("predictions.csv")),
            &hem.clone().unwrap_or_else(default_hem),
        ),
    }
}

/// Parses `args` (program name first), runs the subcommand and returns
/// the process exit status. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { USAGE } else { 0 };
        }
    };
    let ctx = match context(&cli.command) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            return USAGE;
        }
    };
    match execute(&cli.command, &ctx) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            DATA
        }
    }
}
