mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use output::OutDir;

/// Gas source localization with a one-shot plume simulation.
#[derive(Parser)]
#[command(name = "plumeseek", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Fly a lawnmower pattern over a synthetic plume; writes probes and a field snapshot.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Estimate the source from a recorded flight log.
    Localize {
        #[command(flatten)]
        common: Common,
        /// Flight log CSV (t_s, x_m, y_m, gas_ppm, wind_speed_mps, wind_dir_rad).
        #[arg(long)]
        log: PathBuf,
        /// ogs, gp, dmvw or bo.
        #[arg(long, default_value = "ogs")]
        algo: String,
        /// True source as "x,y" in meters; adds the error to the report.
        #[arg(long)]
        truth: Option<String>,
    },
    /// Run the online source-seeking loop. Exits with 2 when it does not converge.
    Active {
        #[command(flatten)]
        common: Common,
    },
    /// Sensitivity sweeps, OGS vs BO timing and convergence curves.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated sweep parameters, replacing `sweep_params`.
        #[arg(long)]
        sweep: Option<String>,
        /// Comma-separated curve algorithms, replacing `curve_algorithms`.
        #[arg(long)]
        algo: Option<String>,
    },
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()
}

fn load(common: &Common, edit: impl FnOnce(&mut ExperimentConfig)) -> Result<(ExperimentConfig, OutDir)> {
    let mut cfg = ExperimentConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    edit(&mut cfg);
    cfg.validate()?;
    let out = OutDir::create(&common.out)?;
    Ok((cfg, out))
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PLUMESEEK_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("PLUMESEEK_THREADS={v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    init_threads()?;
    match cli.command {
        Command::Simulate { common } => {
            let (cfg, mut out) = load(&common, |_| {})?;
            commands::simulate(&cfg, &mut out)?;
            out.finish("simulate", &cfg)?;
        }
        Command::Localize { common, log, algo, truth } => {
            let (cfg, mut out) = load(&common, |_| {})?;
            let truth = truth.as_deref().map(commands::parse_point).transpose()?;
            commands::localize(&cfg, &log, &algo, truth, &mut out)?;
            out.finish("localize", &cfg)?;
        }
        Command::Active { common } => {
            let (cfg, mut out) = load(&common, |_| {})?;
            let converged = commands::active(&cfg, &mut out)?;
            out.finish("active", &cfg)?;
            if !converged {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Bench { common, sweep, algo } => {
            let (cfg, mut out) = load(&common, |c| {
                if let Some(s) = sweep {
                    c.sweep_params = split_list(&s);
                }
                if let Some(a) = algo {
                    c.curve_algorithms = split_list(&a);
                }
            })?;
            commands::bench(&cfg, &mut out)?;
            out.finish("bench", &cfg)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
