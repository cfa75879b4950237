use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nbandit::harness::{measure_latency, run_experiment, write_metrics, ExperimentConfig, PolicyName, ServeMode};
use nbandit::Result;

#[derive(Parser)]
#[command(name = "nbandit", version, about = "Neural contextual bandits over large arm sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Single,
    Batch,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its metrics CSV.
    Run {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the configured policy.
        #[arg(long)]
        policy: Option<String>,
        /// Override the root seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time selections against a trained snapshot.
    BenchLatency {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Timed requests (after warmup).
        #[arg(long, default_value_t = 100)]
        requests: usize,
        #[arg(long)]
        policy: Option<String>,
        /// Write per-request latency rows as a metrics CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &PathBuf, policy: Option<String>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(p) = policy {
        cfg.policy = PolicyName::parse(&p)?;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            policy,
            seed,
            out,
        } => {
            let mut cfg = load(&config, policy)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.output = out;
            }
            let s = run_experiment(&cfg)?;
            println!(
                "policy={} rounds={} cum_reward={:.4} cum_expected={:.4} regret={:.4}",
                cfg.policy, s.rounds, s.cumulative_reward, s.cumulative_expected, s.cumulative_regret
            );
            if let Some(p) = &cfg.output {
                println!("metrics written to {}", p.display());
            }
        }
        Command::BenchLatency {
            config,
            mode,
            requests,
            policy,
            out,
        } => {
            let cfg = load(&config, policy)?;
            let mode = match mode {
                Mode::Single => ServeMode::Single,
                Mode::Batch => ServeMode::Batch,
            };
            let (s, rows) = measure_latency(&cfg, mode, requests)?;
            println!(
                "policy={} mode={} requests={} mean_ns={:.0} p50_ns={} p99_ns={}",
                s.policy,
                s.mode.as_str(),
                s.requests,
                s.mean_ns,
                s.p50_ns,
                s.p99_ns
            );
            if let Some(p) = out {
                write_metrics(&p, &rows)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
