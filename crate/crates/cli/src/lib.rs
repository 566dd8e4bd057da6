//! Command-line harness: Dirac-GAN trajectories, single training runs,
//! multi-seed strategy comparisons and numerical self-checks.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime or numeric error,
//! 3 I/O error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod error;
pub mod fsutil;
pub mod manifest;
pub mod summary;
pub mod svg;

use commands::{compare, dirac, selfcheck, train};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "adagan",
    version,
    about = "Adaptive generator/critic update scheduling for WGANs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// `key = value` config file; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write SVG plots.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the Dirac-GAN under the configured strategy.
    Dirac {
        #[command(flatten)]
        common: Common,
        /// Number of updates (overrides `dirac.steps`).
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Train a WGAN on a synthetic 2-D distribution.
    Train {
        #[command(flatten)]
        common: Common,
        /// Overrides `total_iters`.
        #[arg(long)]
        iters: Option<usize>,
        /// Continue from a checkpoint; the configuration comes from the checkpoint.
        #[arg(long, conflicts_with_all = ["config", "seed"])]
        resume: Option<PathBuf>,
        /// Write `checkpoint.ckpt` and the CSV so far every N iterations.
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Train every config on every seed and summarize.
    Compare {
        /// Config files to compare (repeatable); default is adaptive(1) vs fixed(5, 1).
        #[arg(long = "config")]
        configs: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        /// Sliced-W thresholds for the `first_iter_at_*` columns.
        #[arg(long, value_delimiter = ',', default_values_t = summary::DEFAULT_THRESHOLDS)]
        thresholds: Vec<f64>,
        /// Overrides `total_iters` of every config.
        #[arg(long)]
        iters: Option<usize>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Gradient checks and optimizer oracles; exit 0 iff all pass.
    Selfcheck {
        /// Negative control: corrupt the analytic gradients.
        #[arg(long, hide = true)]
        perturb_backward: bool,
    },
}

fn resolve(common: &Common) -> CliResult<adagan::config::RunConfig> {
    let mut config = manifest::load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.train.seed = seed;
    }
    Ok(config)
}

/// Runs one subcommand and returns the text to print on success.
pub fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Dirac { common, steps } => {
            let config = resolve(&common)?;
            dirac::run(
                config,
                &common.out,
                &dirac::DiracArgs {
                    steps,
                    svg: common.svg,
                },
            )
        }
        Command::Train {
            common,
            iters,
            resume,
            checkpoint_every,
        } => {
            let start = match resume {
                Some(path) => train::Start::Resume(path),
                None => train::Start::Fresh(Box::new(resolve(&common)?)),
            };
            train::run(
                start,
                &common.out,
                &train::TrainArgs {
                    iters,
                    checkpoint_every,
                    svg: common.svg,
                },
            )
        }
        Command::Compare {
            configs,
            out,
            seeds,
            thresholds,
            iters,
            jobs,
        } => {
            let configs = if configs.is_empty() {
                compare::default_pair()
            } else {
                configs
                    .iter()
                    .map(|p| manifest::load_config(Some(p)))
                    .collect::<CliResult<Vec<_>>>()?
            };
            compare::run(
                configs,
                &out,
                &compare::CompareArgs {
                    seeds,
                    thresholds,
                    iters,
                    jobs,
                },
            )
        }
        Command::Selfcheck { perturb_backward } => {
            let rows = selfcheck::checks(&selfcheck::SelfcheckArgs { perturb_backward })?;
            let table = selfcheck::table(&rows);
            let failed = rows.iter().filter(|r| !r.passed()).count();
            if failed == 0 {
                Ok(table)
            } else {
                Err(CliError::Runtime(format!(
                    "{failed} self-check(s) failed\n{table}"
                )))
            }
        }
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with<I, T>(
    args: I,
    stdout: &mut dyn std::io::Write,
    stderr: &mut dyn std::io::Write,
) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match run(cli) {
        Ok(text) => {
            let _ = writeln!(stdout, "{}", text.trim_end());
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
