use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info};
use phasefield_lab::{run, RunOptions, ScenarioConfig};

/// Runs a phase-field scenario and writes report.json plus CSV tables.
#[derive(Debug, Parser)]
#[command(name = "pflab", version)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Output directory; overrides `out_dir` in the scenario.
    #[arg(long, value_name = "PATH")]
    out_dir: Option<PathBuf>,

    /// Worker threads (default: available parallelism).
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,

    /// Treat failed model hypotheses as fatal.
    #[arg(long)]
    strict: bool,

    /// Seed for the randomized solver start.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();

    let cfg = match ScenarioConfig::from_path(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(1);
        }
    };
    let threads = cli
        .threads
        .map(|t| t as usize)
        .or(cfg.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            error!("cannot start {threads} worker threads: {e}");
            return ExitCode::from(1);
        }
    };
    let opts = RunOptions {
        out_dir: cli
            .out_dir
            .or_else(|| cfg.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        strict: cli.strict,
        seed: cli.seed.or(cfg.seed).unwrap_or(42),
        config_dir: cli
            .config
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_default(),
    };
    let started = std::time::Instant::now();
    match pool.install(|| run(&cfg, &opts)) {
        Ok(report) => {
            info!(
                "{} in {:.1} s, report at {}",
                report.status,
                started.elapsed().as_secs_f64(),
                opts.out_dir.join("report.json").display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(1)
        }
    }
}
