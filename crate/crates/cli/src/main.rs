use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use lexevolve::eval::Gain;

mod commands;
mod config;

use config::RunConfig;

/// Marks an error as a usage or validation problem (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "lexevolve", version, about = "Lexical retrieval scorers, evaluation and program evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override a config value, e.g. `--set scorer.k1=1.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Dataset directory in BEIR layout. Repeatable; replaces `datasets`.
    #[arg(long = "dataset", value_name = "DIR", global = true)]
    datasets: Vec<PathBuf>,
    /// Scorer name with default parameters; replaces `scorer`.
    #[arg(long, global = true)]
    scorer: Option<String>,
    /// Output directory; replaces `output_dir`.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build and persist channel indexes.
    Index {
        #[command(flatten)]
        common: Common,
    },
    /// Score every query, write TREC runs and a JSON report.
    Eval {
        #[command(flatten)]
        common: Common,
    },
    /// Per-query paired t-test between two TREC runs.
    Compare {
        #[arg(long)]
        run_a: PathBuf,
        #[arg(long)]
        run_b: PathBuf,
        /// BEIR qrels TSV.
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, value_enum, default_value = "exponential")]
        gain: GainArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Also write the table as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the evolutionary search.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Number of steps; replaces `evolve.steps`.
        #[arg(long)]
        steps: Option<usize>,
        /// No per-step progress on stderr.
        #[arg(long, short)]
        quiet: bool,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum GainArg {
    Exponential,
    Linear,
}

impl Common {
    fn load(&self, extra: Vec<String>) -> Result<RunConfig> {
        let mut overrides = Vec::new();
        if let Some(s) = &self.scorer {
            overrides.push(format!("scorer={}", serde_json::json!({ "name": s })));
        }
        if !self.datasets.is_empty() {
            let list: Vec<_> = self.datasets.iter().map(|p| serde_json::json!({ "path": p })).collect();
            overrides.push(format!("datasets={}", serde_json::Value::Array(list)));
        }
        if let Some(o) = &self.out {
            overrides.push(format!("output_dir={}", serde_json::json!(o)));
        }
        overrides.extend(extra);
        overrides.extend(self.overrides.iter().cloned());
        RunConfig::load(self.config.as_deref(), &overrides, self.seed)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index { common } => commands::index(&common.load(Vec::new())?),
        Command::Eval { common } => commands::eval(&common.load(Vec::new())?),
        Command::Compare {
            run_a,
            run_b,
            qrels,
            gain,
            alpha,
            json,
        } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                anyhow::bail!(UsageError(format!("alpha must be in (0, 1), got {alpha}")));
            }
            let gain = match gain {
                GainArg::Exponential => Gain::Exponential,
                GainArg::Linear => Gain::Linear,
            };
            commands::compare(&run_a, &run_b, &qrels, gain, alpha, json.as_deref())
        }
        Command::Evolve { common, steps, quiet } => {
            let extra = steps.map(|s| format!("evolve.steps={s}")).into_iter().collect();
            commands::evolve(&common.load(extra)?, quiet)
        }
    }
}

/// 2 for usage and validation problems, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<lexevolve::Error>() {
        Some(lexevolve::Error::InvalidParam(_) | lexevolve::Error::Precondition(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
