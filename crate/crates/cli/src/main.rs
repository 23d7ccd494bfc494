//! `dlpp`: solve load plans, generate labeled data, train and evaluate
//! proxies, and run volume sweeps from the shell.
//!
//! Exit codes: 0 success, 1 user error (bad flags, unreadable or invalid
//! input), 2 internal error. Log level comes from `DLPP_LOG`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dlpp", version, about = "Dynamic load planning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance and write the plan as JSON.
    Solve(SolveArgs),
    /// Generate perturbed instances labeled with goal-directed plans.
    Datagen(DatagenArgs),
    /// Train a proxy model on a generated dataset.
    Train(TrainArgs),
    /// Compare methods on a generated dataset split.
    Eval(EvalArgs),
    /// Solve a volume sweep and emit one CSV row per step.
    Sweep(SweepArgs),
    /// Restrict the alternate paths of an instance.
    Restrict(RestrictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Mip,
    Gdo,
    Greedy,
    Proxy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    PrimaryOnly,
    OneAlt,
    AllAlt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Validation,
    Test,
    All,
}

/// Solver limits shared by every command that runs a MIP.
#[derive(Debug, Clone, Args)]
struct LimitArgs {
    /// Wall-clock limit per MIP stage, in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Branch-and-bound node limit per MIP stage (deterministic).
    #[arg(long)]
    node_limit: Option<usize>,
}

/// Where the reference instance comes from.
#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
struct SourceArgs {
    /// Reference instance JSON (must carry a reference plan for labeling).
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Use the built-in synthetic terminal generated from this seed.
    #[arg(long)]
    synthetic: Option<u64>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    instance: PathBuf,
    /// Plan JSON whose trailer counts replace the instance's reference plan.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Trained model, for proxy mode.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    limits: LimitArgs,
    /// Plan output path; the plan goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DatagenArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads for labeling; 0 uses all cores.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    limits: LimitArgs,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Search the learning-rate/depth/width grid instead of one configuration.
    #[arg(long)]
    grid: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_model: PathBuf,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    /// Train only on labels whose solves proved optimality.
    #[arg(long)]
    proven_only: bool,
    /// Per-epoch loss CSV of the selected model.
    #[arg(long)]
    loss_curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Mode::Mip, Mode::Gdo, Mode::Greedy])]
    methods: Vec<Mode>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
    /// Per-instance CSV report.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    limits: LimitArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = 0.8)]
    scale_from: f64,
    #[arg(long, default_value_t = 1.2)]
    scale_to: f64,
    /// Adds per-commodity noise drawn from this seed.
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Mode::Mip, Mode::Gdo])]
    methods: Vec<Mode>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    limits: LimitArgs,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RestrictArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DLPP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::User(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(commands::Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}
