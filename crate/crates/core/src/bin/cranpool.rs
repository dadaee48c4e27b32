use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cranpool::experiments::{self, ExperimentConfig};

/// Spectrum-pooling C-RAN design: single drops, Monte-Carlo sweeps and self checks.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every grid cell for one channel drop; writes records.csv and traces.csv.
    Run(RunArgs),
    /// Monte-Carlo sweep; writes records.csv, aggregates.csv and series/*.csv.
    Sweep(RunArgs),
    /// Fast invariant and oracle checks.
    Check,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (0 = all cores); overrides the config.
    #[arg(long)]
    workers: Option<usize>,
    /// Base seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

const EXIT_USAGE: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_TOTAL: u8 = 3;

fn load(args: &RunArgs) -> cranpool::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(s) = args.seed {
        cfg.sweep.base_seed = s;
    }
    std::fs::create_dir_all(&args.out)?;
    Ok(cfg)
}

fn exit_for(failures: usize, total: usize) -> u8 {
    if total > 0 && failures == total {
        EXIT_TOTAL
    } else if failures * 10 > total {
        EXIT_PARTIAL
    } else {
        0
    }
}

fn run(args: &RunArgs) -> cranpool::Result<u8> {
    let mut cfg = load(args)?;
    cfg.sweep.trials = 1;
    let cells = experiments::run_cells(&cfg, true)?;
    let records: Vec<_> = cells.iter().map(|c| c.record.clone()).collect();
    experiments::write_csv(&records, &args.out.join("records.csv"))?;
    experiments::write_traces(&cells, &args.out.join("traces.csv"))?;
    let failures = records.iter().filter(|r| r.is_error()).count();
    report(&args.out, failures, records.len());
    Ok(exit_for(failures, records.len()))
}

fn sweep(args: &RunArgs) -> cranpool::Result<u8> {
    let cfg = load(args)?;
    let res = experiments::run_sweep(&cfg)?;
    experiments::write_csv(&res.records, &args.out.join("records.csv"))?;
    experiments::write_aggregates(&res.aggregates, &args.out.join("aggregates.csv"))?;
    experiments::emit_plot_data(&res.aggregates, &args.out.join("series"))?;
    report(&args.out, res.failures, res.records.len());
    Ok(res.exit_code() as u8)
}

fn report(out: &Path, failures: usize, total: usize) {
    eprintln!("{total} trials, {failures} failed; results in {}", out.display());
}

fn check() -> u8 {
    let outcomes = experiments::self_check();
    for o in &outcomes {
        println!("{} {}{}", if o.passed { "PASS" } else { "FAIL" }, o.name, if o.detail.is_empty() { String::new() } else { format!(" ({})", o.detail) });
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    exit_for(failed, outcomes.len()).max(if failed > 0 { EXIT_PARTIAL } else { 0 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { EXIT_USAGE } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Check => Ok(check()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e @ (cranpool::Error::Config(_) | cranpool::Error::Argument(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_TOTAL)
        }
    }
}
