use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::{error, info};

mod commands;
mod config;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "zs-resonance", version, about = "Scattering data and resonances of Dirac operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config and ZS_OUTPUT_DIR).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads (overrides the config and ZS_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Comma-separated identity names for `verify`.
    #[arg(long, global = true, value_delimiter = ',')]
    only: Option<Vec<String>>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Locate zeros of a(λ) in the lower half-plane.
    Resonances,
    /// Run the identity checks and write report.json.
    Verify,
    /// Tabulate a, b and the scattering phase on the real axis.
    Scattering,
    /// Compare the Fredholm determinant with a(λ).
    Determinant,
}

fn run(cli: Cli) -> Result<bool> {
    let path = cli.config.context("missing required flag --config PATH")?;
    let mut cfg = RunConfig::load(&path)?;
    cfg.apply_env()?;
    if let Some(dir) = cli.output {
        cfg.output.dir = dir;
    }
    if let Some(t) = cli.threads {
        anyhow::ensure!(t > 0, "--threads must be positive");
        cfg.threads = Some(t);
    }
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting worker pool")?;
    }
    if let Some(only) = &cli.only {
        zs_resonance::verify::validate_names(only)?;
    }
    let p = cfg.build_potential()?;
    for w in p.warnings() {
        log::warn!("{w}");
    }
    std::fs::create_dir_all(&cfg.output.dir)
        .with_context(|| format!("creating output dir {}", cfg.output.dir.display()))?;
    let out = cfg.output.dir.clone();
    let mut ok = true;
    let files = match cli.command {
        Command::Resonances => commands::resonances(&cfg, &p, &out)?,
        Command::Verify => {
            let (files, pass) = commands::verify(&cfg, &p, &out, cli.only.as_deref())?;
            ok = pass;
            files
        }
        Command::Scattering => commands::scattering(&cfg, &p, &out)?,
        Command::Determinant => commands::determinant(&cfg, &p, &out)?,
    };
    for f in files {
        info!("wrote {}", f.display());
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            error!("some checks failed; see report.json");
            ExitCode::from(1)
        }
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(2)
        }
    }
}
