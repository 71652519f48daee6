use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use pes::acquisition::Method;
use pes_harness::config::{ExperimentConfig, FunctionKind, HyperMode, OneOrMany};
use pes_harness::experiment::{run_experiment, write_results};
use pes_harness::selftest::run_selftest;
use pes_harness::validate::{validate_acquisition, write_validation, ValidationConfig};

#[derive(Parser)]
#[command(name = "pes", version, about = "Predictive entropy search experiments")]
struct Cli {
    /// Base seed; overrides the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML file.
    Run { config: PathBuf },
    /// Compare PES with the rejection-sampling ground truth on a 2-D toy.
    ValidateAcquisition { config: Option<PathBuf> },
    /// Run one method on one function.
    Bench {
        name: String,
        #[arg(long, default_value = "pes")]
        method: Method,
        #[arg(long, default_value_t = 30)]
        budget: usize,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
        /// Slots `M`.
        #[arg(long, default_value_t = 10)]
        samples: usize,
        /// Use the generating hyperparameters (within-model only).
        #[arg(long)]
        fixed: bool,
    },
    /// Run the invariant suite.
    Selftest,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            experiment(&cfg, &cli.out)
        }
        Command::Bench { name, method, budget, restarts, samples, fixed } => {
            let function: FunctionKind = name.parse()?;
            let cfg = ExperimentConfig {
                name: format!("bench-{name}"),
                methods: vec![method],
                functions: OneOrMany::One(function),
                restarts,
                budget,
                samples,
                seed: cli.seed.unwrap_or(0),
                mode: if fixed { HyperMode::Fixed } else { HyperMode::Bayes },
                ..ExperimentConfig::from_toml("methods = [\"ei\"]\nfunction = \"branin\"\nrestarts = 1\nbudget = 1\n")?
            };
            cfg.validate()?;
            experiment(&cfg, &cli.out)
        }
        Command::ValidateAcquisition { config } => {
            let mut cfg = match config {
                Some(p) => ValidationConfig::from_toml(&std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)?,
                None => ValidationConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let (report, rows) = validate_acquisition(&cfg)?;
            write_validation(&report, &rows, &cli.out)?;
            println!("spearman {:.4} over {} cells", report.spearman, report.compared_cells);
            println!("pes argmax in rs top decile: {}", report.pes_argmax_in_rs_top_decile);
            println!("rs argmax in pes top decile: {}", report.rs_argmax_in_pes_top_decile);
            println!("wrote {}", cli.out.display());
            Ok(true)
        }
        Command::Selftest => {
            let checks = run_selftest(cli.seed.unwrap_or(0));
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn experiment(cfg: &ExperimentConfig, out: &std::path::Path) -> Result<bool> {
    let result = run_experiment(cfg)?;
    write_results(&result, out)?;
    for c in &result.curves {
        let last = c.median.last().copied().unwrap_or(f64::NAN);
        println!("{:>13} {:>7}: {} runs, final median regret {last:.3e}", c.function, c.method, c.run_ids.len());
    }
    if !result.failures.is_empty() {
        eprintln!("warning: {} runs failed and were excluded", result.failures.len());
        for f in &result.failures {
            eprintln!("  {} {} run {}: {}", f.function.as_str(), f.method, f.run_id, f.error);
        }
    }
    println!("wrote {}", out.display());
    Ok(true)
}
