use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use msrecover::experiment::{run, ExperimentConfig, ExperimentKind, RunOutput};
use msrecover::io::OutputFormat;

/// Recover compressively sampled signals with multi-structure convex programs.
#[derive(Debug, Parser)]
#[command(name = "msrecover", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Benchmark the configured methods on simulated signals.
    Simulate(RunArgs),
    /// Benchmark the configured methods on a signal read from CSV.
    Recover(RunArgs),
    /// Benchmark the configured methods on any signal source.
    Benchmark(RunArgs),
    /// Tune the first method's weights by K-fold cross-validation.
    Tune(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config (TOML, or JSON including an emitted results file).
    #[arg(long)]
    config: PathBuf,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the output format.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (kind, args) = match cli.command {
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::Recover(a) => (ExperimentKind::Recover, a),
        Command::Benchmark(a) => (ExperimentKind::Benchmark, a),
        Command::Tune(a) => (ExperimentKind::Tune, a),
    };
    let mut config = ExperimentConfig::from_path(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    config.kind = kind;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.output.dir = out;
    }
    if let Some(format) = args.format {
        config.output.format = format.into();
    }
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let output = run(&config)?;
    report(&output);
    Ok(())
}

fn report(output: &RunOutput) {
    if let Some(bench) = &output.benchmark {
        for row in &bench.summary.rows {
            println!(
                "{:<12} m={:<5} mean_l1={:.6} mean_l2={:.6} std_l1={:.6} std_l2={:.6} C={} converged={}",
                row.method,
                row.m,
                row.mean_l1,
                row.mean_l2,
                row.std_l1,
                row.std_l2,
                row.trials,
                row.converged
            );
        }
    }
    if let Some(t) = &output.tuning {
        let params: Vec<String> = t
            .parameters
            .iter()
            .zip(&t.lambda_bar)
            .map(|(name, v)| format!("{name}={v}"))
            .collect();
        println!(
            "tuned {} r_training={:.6} r_testing={:.6} {}",
            params.join(" "),
            t.r_training,
            t.r_testing,
            if t.passed { "passed" } else { "failed" }
        );
    }
    for path in &output.artifacts {
        println!("wrote {}", path.display());
    }
}
