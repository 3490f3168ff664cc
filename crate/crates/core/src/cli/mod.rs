//! Command-line front end: `simdm recover | sweep | verify`.
//!
//! Exit codes: 0 success, 1 a verified tolerance failed, 2 bad
//! configuration or arguments, 3 numerical or I/O failure at run time.
//! Verbosity follows the `SIMDM_LOG` environment variable.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_recover, cmd_sweep, cmd_verify, run_trials, RunParams, SweepCell, SweepOutcome, VerifyKind,
    VerifyOutcome,
};
pub use config::{Experiment, ExperimentConfig};
pub use report::{write_results, ResultRow, RESULT_HEADER};

use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "simdm",
    version,
    about = "Single-index-model recovery with diffusion inversion and sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML, or flat `block.key = value` lines)
    #[arg(long)]
    config: PathBuf,
    /// Overrides run.base_seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    jobs: Option<usize>,
    /// Output CSV path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured estimators over all trials
    Recover {
        #[command(flatten)]
        common: Common,
        /// Ground-truth direction to use instead of prior draws
        #[arg(long)]
        x_star_file: Option<PathBuf>,
    },
    /// Full-factorial sweep over C_s, C_s' and optionally grid sizes
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x_star_file: Option<PathBuf>,
    },
    /// Check a bound or convergence property and report it
    Verify {
        #[arg(value_enum)]
        which: VerifyKind,
        #[command(flatten)]
        common: Common,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Parse(_) | Error::Argument(_) | Error::Domain { .. } => {
            EXIT_CONFIG
        }
        Error::Numerical(_) | Error::Io(_) => EXIT_NUMERICAL,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter("SIMDM_LOG"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("simdm: {e}");
            exit_code(&e)
        }
    }
}

fn load(common: &Common) -> Result<Experiment> {
    let raw = ExperimentConfig::load(&common.config)?;
    let mut exp = Experiment::from_config(&raw)?;
    if let Some(seed) = common.seed {
        exp.base_seed = seed;
    }
    if let Some(out) = &common.out {
        exp.out = Some(out.clone());
    }
    Ok(exp)
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::config("--jobs", "must be at least 1")),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::config("--jobs", e.to_string()))
            .map(|pool| pool.install(f)),
    }
}

fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let mut file = std::io::BufWriter::new(std::fs::File::create(p)?);
            f(&mut file)?;
            file.flush()?;
            Ok(())
        }
        None => f(&mut std::io::stdout().lock()),
    }
}

/// `results.csv` → `results.summary.csv`
fn summary_path(out: Option<&Path>) -> Option<PathBuf> {
    out.map(|p| p.with_extension("summary.csv"))
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Recover {
            common,
            x_star_file,
        } => {
            let exp = load(&common)?;
            let x_star = x_star_file
                .as_deref()
                .map(|p| commands::load_x_star(p, exp.n))
                .transpose()?;
            let rows = with_pool(common.jobs, || cmd_recover(&exp, x_star.as_deref()))??;
            emit(exp.out.as_deref(), |w| write_results(w, &rows))?;
            Ok(EXIT_OK)
        }
        Command::Sweep {
            common,
            x_star_file,
        } => {
            let exp = load(&common)?;
            let x_star = x_star_file
                .as_deref()
                .map(|p| commands::load_x_star(p, exp.n))
                .transpose()?;
            let outcome = with_pool(common.jobs, || cmd_sweep(&exp, x_star.as_deref()))??;
            emit(exp.out.as_deref(), |w| write_results(w, &outcome.rows))?;
            let summary = commands::summary_rows(&outcome, exp.trials);
            let path = exp
                .sweep
                .summary
                .clone()
                .or_else(|| summary_path(exp.out.as_deref()));
            match path {
                Some(p) => emit(Some(&p), |w| {
                    report::write_csv(w, &commands::SUMMARY_HEADER, &summary)
                })?,
                None => {
                    println!();
                    report::write_csv(
                        std::io::stdout().lock(),
                        &commands::SUMMARY_HEADER,
                        &summary,
                    )?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Verify { which, common } => {
            let exp = load(&common)?;
            let outcome = with_pool(common.jobs, || cmd_verify(which, &exp))??;
            emit(exp.out.as_deref(), |w| outcome.write(w))?;
            if outcome.passed() {
                Ok(EXIT_OK)
            } else {
                for f in &outcome.failures {
                    eprintln!("simdm verify: FAILED {f}");
                }
                Ok(EXIT_TOLERANCE)
            }
        }
    }
}
