use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arwp_cli::config::{self, ExperimentConfig, SweepConfig, TheoryConfig};
use arwp_cli::presets::{self, PRESETS};
use arwp_cli::{phase_sweep, run_experiment, theory_report, write_report, write_sweep, write_theory, CliError};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(
    name = "arwp",
    version,
    about = "Run ARWP sampler experiments, sweeps and rate tables"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Output directory; defaults to the config's `output_dir`, then `out/<name>`.
    #[arg(long, short, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run a particle experiment from a config file or preset name.
    Run { config: String },
    /// Phase diagram of the covariance recursion over (a, eta).
    Sweep { config: String },
    /// Table of optimal ARWP rates against kinetic Langevin.
    Theory { config: String },
    /// List or print the built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

fn load<T: DeserializeOwned>(source: &str) -> Result<T, CliError> {
    let path = Path::new(source);
    if path.exists() {
        return config::load(path);
    }
    match presets::find(source) {
        Some(p) => config::parse(p.toml, p.name),
        None => Err(CliError::config(format!(
            "`{source}` is neither a file nor a preset name"
        ))),
    }
}

fn output_dir(flag: &Option<PathBuf>, from_config: &Option<PathBuf>, name: &str) -> PathBuf {
    flag.clone()
        .or_else(|| from_config.clone())
        .unwrap_or_else(|| Path::new("out").join(if name.is_empty() { "run" } else { name }))
}

fn init_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if threads > 1 {
        log::warn!("built without the `parallel` feature; --threads is ignored");
    }
}

/// Returns whether the run diverged.
fn execute(cli: Cli) -> Result<bool, CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Run { config } => {
            let mut cfg: ExperimentConfig = load(&config)?;
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            cfg.run = None;
            let dir = output_dir(&g.output_dir, &cfg.output_dir, &cfg.name);
            let report = run_experiment(&cfg)?;
            write_report(&report, &dir)?;
            match report.rows.last() {
                Some(r) => log::info!(
                    "{} iterations, final kl {:?}, trace error {:?}",
                    r.iteration,
                    r.kl,
                    r.trace_error
                ),
                None => log::info!("no iterations completed"),
            }
            println!("{}", dir.display());
            if let Some(it) = report.diverged_at {
                eprintln!("diverged at iteration {it}");
            }
            Ok(report.diverged())
        }
        Command::Sweep { config } => {
            let cfg: SweepConfig = load(&config)?;
            let dir = output_dir(&g.output_dir, &cfg.output_dir, &cfg.name);
            let cells = phase_sweep(&cfg)?;
            write_sweep(&cfg, &cells, &dir)?;
            let bad = cells.iter().filter(|c| c.diverged()).count();
            log::info!("{} cells, {bad} divergent", cells.len());
            println!("{}", dir.display());
            Ok(false)
        }
        Command::Theory { config } => {
            let cfg: TheoryConfig = load(&config)?;
            let dir = output_dir(&g.output_dir, &cfg.output_dir, &cfg.name);
            let rows = theory_report(&cfg)?;
            write_theory(&cfg, &rows, &dir)?;
            println!("{}", dir.display());
            Ok(false)
        }
        Command::Presets { action } => {
            match action {
                PresetAction::List => {
                    let mut out = std::io::stdout().lock();
                    for p in PRESETS {
                        // A closed pipe (`arwp presets list | head`) just ends the listing.
                        if writeln!(out, "{:<36} {:<7} {}", p.name, p.kind.command(), p.description()).is_err() {
                            break;
                        }
                    }
                }
                PresetAction::Show { name } => {
                    let p =
                        presets::find(&name).ok_or_else(|| CliError::config(format!("no preset named `{name}`")))?;
                    print!("{}", p.toml);
                }
            }
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // clap exits with 2 on usage errors, which is reserved here for divergence.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_threads(cli.global.threads);
    match execute(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
