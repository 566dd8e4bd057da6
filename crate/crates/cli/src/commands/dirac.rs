use std::path::Path;

use adagan::config::RunConfig;
use adagan::dirac::simulate;

use crate::error::{CliError, CliResult};
use crate::fsutil::{ensure_dir, write_atomic};
use crate::manifest::RunManifest;
use crate::svg;

pub const TRAJECTORY_FILE: &str = "dirac.csv";
pub const PLOT_FILE: &str = "dirac.svg";

pub struct DiracArgs {
    pub steps: Option<usize>,
    pub svg: bool,
}

pub fn run(mut config: RunConfig, out: &Path, args: &DiracArgs) -> CliResult<String> {
    if let Some(steps) = args.steps {
        if steps == 0 {
            return Err(CliError::Config("--steps must be >= 1".into()));
        }
        config.dirac_steps = steps;
    }
    let strategy = config.train.strategy;
    let traj = simulate(&config.dirac, strategy, config.dirac_steps)?;

    ensure_dir(out)?;
    write_atomic(&out.join(TRAJECTORY_FILE), &traj.to_csv())?;
    let mut manifest =
        RunManifest::new("dirac", out, config.clone()).note("files", TRAJECTORY_FILE);
    if args.svg {
        let title = format!("{} | {strategy}", config.name);
        write_atomic(
            &out.join(PLOT_FILE),
            &svg::dirac_plot(&traj, config.dirac.clip, &title),
        )?;
        manifest = manifest.note("files", PLOT_FILE);
    }
    manifest.write()?;

    let s = traj.final_state();
    Ok(format!(
        "{strategy}: {} steps, final (theta, psi) = ({:.6}, {:.6}), distance to (1, 0) = {:.6}, D fraction = {:.4}",
        config.dirac_steps,
        s.theta,
        s.psi,
        s.distance_to_equilibrium(),
        traj.discriminator_fraction()
    ))
}
