use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use copem::config::{load_pair, ConfigError};
use copem::experiment::{
    run_batch, run_once_with_buffer, BatchOptions, RunError, Summary, TraceRetention,
};
use copem::export::{
    export_batch, report, trace_file_name, write_results, write_trace, ExportError, RESULTS_FILE,
    TRACES_DIR,
};
use copem::rng::run_seed;

const EXIT_RUNTIME: u8 = 1;
const EXIT_INVALID: u8 = 3;
const EXIT_IO: u8 = 4;

/// Cooperative perception error model simulator.
///
/// Exit status: 0 success, 1 simulation failure, 2 bad command line,
/// 3 invalid configuration, 4 I/O failure.
#[derive(Debug, Parser)]
#[command(name = "copem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario and experiment file; writes nothing.
    Validate(Inputs),
    /// Simulate one run and write its trace.
    Run(RunArgs),
    /// Run every configuration of the experiment and export the tables.
    Batch(BatchArgs),
    /// Recompute summary tables from an existing results.csv.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct Inputs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Experiment file (TOML).
    #[arg(long)]
    experiment: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Output directory.
    #[arg(long, env = "COPEM_OUT")]
    out: PathBuf,
    /// Configuration to run, by label or index.
    #[arg(long)]
    config: String,
    /// Run index; with the base seed it selects the same stream as in a batch.
    #[arg(long, default_value_t = 0)]
    run_index: usize,
    /// Base seed, overriding the experiment file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct BatchArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Output directory.
    #[arg(long, env = "COPEM_OUT")]
    out: PathBuf,
    /// Base seed, overriding the experiment file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Does not affect results.
    #[arg(long)]
    jobs: Option<usize>,
    /// Which runs get a per-step trace file.
    #[arg(long, value_enum, default_value_t = TraceRetention::Failures)]
    keep_traces: TraceRetention,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory holding a batch's results.csv.
    #[arg(long)]
    results: PathBuf,
    /// Where to write the summary tables (default: the results directory).
    #[arg(long, env = "COPEM_OUT")]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Config(ConfigError),
    Run(RunError),
    Export(ExportError),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(ConfigError::Io { .. }) | Failure::Export(_) => EXIT_IO,
            Failure::Config(ConfigError::Invalid(_)) | Failure::Usage(_) => EXIT_INVALID,
            Failure::Run(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Run(e) => write!(f, "error: {e}"),
            Failure::Export(e) => write!(f, "error: {e}"),
            Failure::Usage(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}
impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Run(e)
    }
}
impl From<ExportError> for Failure {
    fn from(e: ExportError) -> Self {
        Failure::Export(e)
    }
}

fn print_summary(summary: &Summary) {
    println!(
        "{:<14} {:>6} {:>9} {:>9} {:>10} {:>9}",
        "label", "runs", "successes", "rate", "det_mean", "det_std"
    );
    for c in &summary.configs {
        let opt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{:<14} {:>6} {:>9} {:>8.1}% {:>10} {:>9}",
            c.label,
            c.runs,
            c.successes,
            100.0 * c.success_rate(),
            opt(c.detection_mean),
            opt(c.detection_std),
        );
    }
}

fn validate(args: &Inputs) -> Result<(), Failure> {
    let (scenario, exp) = load_pair(&args.scenario, &args.experiment)?;
    println!(
        "ok: {} actors, {} external units, {} configs x {} runs",
        scenario.actors.len(),
        scenario.perception.external.len(),
        exp.configs.len(),
        exp.runs_per_config
    );
    Ok(())
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let (scenario, exp) = load_pair(&args.inputs.scenario, &args.inputs.experiment)?;
    let index = exp
        .configs
        .iter()
        .position(|c| c.label == args.config)
        .or_else(|| {
            args.config
                .parse()
                .ok()
                .filter(|&i: &usize| i < exp.configs.len())
        })
        .ok_or_else(|| {
            let labels: Vec<&str> = exp.configs.iter().map(|c| c.label.as_str()).collect();
            Failure::Usage(format!(
                "unknown config '{}'; available: {}",
                args.config,
                labels.join(", ")
            ))
        })?;
    let config = &exp.configs[index];
    let seed = run_seed(args.seed.unwrap_or(exp.base_seed), index, args.run_index);
    let result = run_once_with_buffer(
        &scenario,
        config,
        index,
        args.run_index,
        &exp.policy,
        seed,
        exp.buffer_capacity,
    )?;

    let traces = args.out.join(TRACES_DIR);
    std::fs::create_dir_all(&traces).map_err(|source| ExportError::Io {
        path: traces.clone(),
        source,
    })?;
    let trace_path = traces.join(trace_file_name(index, &config.label, args.run_index));
    write_trace(&trace_path, &result.trace)?;
    write_results(&args.out.join(RESULTS_FILE), &[(&result).into()])?;

    let det = result
        .detection_distance
        .map_or_else(|| "none".to_string(), |d| format!("{d:.6}"));
    println!(
        "{} run {} seed {}: {} min_distance {:.6} detection_distance {} steps {}",
        config.label, args.run_index, seed, result.outcome, result.min_distance, det, result.steps
    );
    println!("trace: {}", trace_path.display());
    Ok(())
}

fn batch(args: &BatchArgs) -> Result<(), Failure> {
    let (scenario, exp) = load_pair(&args.inputs.scenario, &args.inputs.experiment)?;
    if args.jobs == Some(0) {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let opts = BatchOptions {
        runs_per_config: exp.runs_per_config,
        base_seed: args.seed.unwrap_or(exp.base_seed),
        jobs: args.jobs,
        retention: args.keep_traces,
        buffer_capacity: exp.buffer_capacity,
    };
    let (results, summary) = run_batch(&scenario, &exp.configs, &exp.policy, &opts)?;
    export_batch(&args.out, &results, &summary)?;
    print_summary(&summary);
    println!("wrote {}", args.out.display());
    Ok(())
}

fn report_cmd(args: &ReportArgs) -> Result<(), Failure> {
    let out: &Path = args.out.as_deref().unwrap_or(&args.results);
    let summary = report(&args.results, out)?;
    print_summary(&summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Run(a) => run(a),
        Command::Batch(a) => batch(a),
        Command::Report(a) => report_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
