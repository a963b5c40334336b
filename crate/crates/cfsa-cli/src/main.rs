//! `cfsa` — configuration-driven frontend for the bias-mitigation pipeline.
//!
//! Subcommands: `run` (full pipeline), `sweep-weights` (ensemble weight
//! grid), `audit` (ranked bias scores without mitigating), `gen-fixture`
//! (synthetic biased dataset with ground-truth sidecar).
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 pipeline
//! error. The `CFSA_LOG` environment variable controls log verbosity with
//! the usual filter syntax (`warn` by default, e.g. `CFSA_LOG=info`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cfsa::error::{Error, Result};
use cfsa::fixtures::FixtureSpec;
use cfsa::pipeline::{self, RunConfig};

#[derive(Parser)]
#[command(
    name = "cfsa",
    version,
    about = "Counterfactual bias scoring, data debiasing and fair/performance ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (TOML; JSON accepted by extension).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for internal parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory; overrides the one in the config file.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write its reports.
    Run,
    /// Re-evaluate the fitted ensemble across a fairness-weight grid.
    SweepWeights {
        /// Grid step; must divide 1 evenly (0.1 gives 11 rows).
        #[arg(long, default_value_t = 0.1)]
        step: f64,
    },
    /// Rank training rows by bias score and summarize subgroups.
    Audit,
    /// Generate a synthetic biased dataset plus ground-truth sidecar.
    GenFixture,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CFSA_LOG", "warn")).init();
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_class().code() as u8)
        }
    }
}

fn config_path(cli: &Cli) -> Result<&PathBuf> {
    cli.config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <PATH> is required".into()))
}

/// Loads the run config and applies the CLI overrides.
fn load_run_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_file(config_path(cli)?)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn real_main(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))?;
    }
    match cli.command {
        Command::Run => {
            let cfg = load_run_config(&cli)?;
            let art = pipeline::run(&cfg)?;
            let out = art.report.config.output.clone();
            let paths = pipeline::write_artifacts(&art, &out)?;
            announce(&paths);
            let beats = art
                .report
                .cells
                .iter()
                .filter(|c| c.beats_baseline())
                .count();
            println!(
                "{} of {} trade-off cells beat the mutation baseline",
                beats,
                art.report.cells.len()
            );
        }
        Command::SweepWeights { step } => {
            let cfg = load_run_config(&cli)?;
            let (report, art) = pipeline::sweep_weights(&cfg, step)?;
            let paths = pipeline::write_sweep(&report, &art.report.config.output)?;
            announce(&paths);
            for row in &report.rows {
                println!(
                    "fairness weight {:.1}: {}/{} cells beat the baseline",
                    row.fairness_weight, row.beats, row.cells
                );
            }
        }
        Command::Audit => {
            let cfg = load_run_config(&cli)?;
            let (report, cblists) = pipeline::audit(&cfg)?;
            let paths = pipeline::write_audit(&report, &cblists, &report.config.output)?;
            announce(&paths);
            for a in &report.attributes {
                println!(
                    "{}: {} rows, {} decision flips, mean score {:.4}, p95 {:.4}",
                    a.attribute, a.rows, a.flip_count, a.mean_cbtest, a.p95_cbtest
                );
            }
        }
        Command::GenFixture => {
            let raw = std::fs::read_to_string(config_path(&cli)?)
                .map_err(|e| Error::Config(format!("cannot read fixture spec: {e}")))?;
            let mut spec: FixtureSpec =
                toml::from_str(&raw).map_err(|e| Error::Config(format!("fixture spec: {e}")))?;
            if let Some(seed) = cli.seed {
                spec = spec.with_seed(seed);
            }
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let (fix, paths) = pipeline::write_fixture(&spec, &out)?;
            announce(&paths);
            let injected = fix.truth.bias_injected.iter().filter(|&&b| b).count();
            println!(
                "{} rows, {} with injected label bias",
                fix.data.len(),
                injected
            );
        }
    }
    Ok(())
}
