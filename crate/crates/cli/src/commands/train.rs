use std::path::{Path, PathBuf};

use adagan::config::RunConfig;
use adagan::data::{sample_real, RngStream};
use adagan::train::{best_eval, records_from_csv, records_to_csv, IterationRecord, Trainer};

use crate::error::{CliError, CliResult};
use crate::fsutil::{ensure_dir, read_text, write_atomic};
use crate::manifest::RunManifest;
use crate::svg;

pub const CSV_FILE: &str = "train.csv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const PERIODIC_CHECKPOINT: &str = "checkpoint.ckpt";
const PLOT_STREAM: u64 = 0x5c;
const PLOT_POINTS: usize = 512;
const PLOT_SNAPSHOTS: usize = 10;

pub enum Start {
    Fresh(Box<RunConfig>),
    Resume(PathBuf),
}

#[derive(Default)]
pub struct TrainArgs {
    pub iters: Option<usize>,
    pub checkpoint_every: Option<usize>,
    pub svg: bool,
}

/// Rows `0..iteration` of an earlier CSV in `out`, if one exists.
fn prior_records(out: &Path, iteration: usize) -> CliResult<Vec<IterationRecord>> {
    let path = out.join(CSV_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = read_text(&path)?;
    let mut records = records_from_csv(&text).map_err(|e| CliError::reading(&path, e))?;
    records.retain(|r| r.iter < iteration);
    if records.iter().enumerate().any(|(i, r)| r.iter != i) || records.len() != iteration {
        return Err(CliError::Malformed {
            path,
            msg: format!("does not hold iterations 0..{iteration} of the checkpointed run"),
        });
    }
    Ok(records)
}

fn sample_plot(trainer: &Trainer, title: &str) -> CliResult<String> {
    let cfg = trainer.config();
    let mut rng = RngStream::new(cfg.seed, PLOT_STREAM);
    let fake = trainer.generate(PLOT_POINTS, &mut rng)?;
    let real = sample_real(&cfg.data, PLOT_POINTS, &mut rng);
    Ok(svg::scatter_plot(&real, &fake, title))
}

struct Outputs<'a> {
    out: &'a Path,
    run: RunConfig,
    resumed_from: Option<PathBuf>,
}

impl Outputs<'_> {
    fn manifest(&self, trainer: &Trainer, status: &str) -> RunManifest {
        let mut m =
            RunManifest::new("train", self.out, self.run_for(trainer)).note("status", status);
        if let Some(p) = &self.resumed_from {
            m = m.note("resumed_from", p.display());
        }
        m
    }

    fn save(
        &self,
        trainer: &Trainer,
        records: &[IterationRecord],
        ckpt: &str,
        status: &str,
    ) -> CliResult<()> {
        write_atomic(&self.out.join(CSV_FILE), &records_to_csv(records))?;
        write_atomic(
            &self.out.join(ckpt),
            &trainer.to_checkpoint(&self.run_for(trainer)),
        )?;
        self.manifest(trainer, status).write()
    }

    fn run_for(&self, trainer: &Trainer) -> RunConfig {
        let mut run = self.run.clone();
        run.train = trainer.config().clone();
        run
    }
}

pub fn run(start: Start, out: &Path, args: &TrainArgs) -> CliResult<String> {
    if args.checkpoint_every == Some(0) {
        return Err(CliError::Config("--checkpoint-every must be >= 1".into()));
    }
    if args.iters == Some(0) {
        return Err(CliError::Config("--iters must be >= 1".into()));
    }
    let (mut trainer, run, resumed_from) = match start {
        Start::Fresh(run) => {
            let mut run = *run;
            if let Some(n) = args.iters {
                run.train.total_iters = n;
            }
            run.validate()?;
            (Trainer::new(run.train.clone())?, run, None)
        }
        Start::Resume(path) => {
            let (mut trainer, run) =
                Trainer::load_checkpoint(&path).map_err(|e| CliError::reading(&path, e))?;
            if let Some(n) = args.iters {
                if n < trainer.iteration() {
                    return Err(CliError::Config(format!(
                        "--iters {n} is below the checkpoint iteration {}",
                        trainer.iteration()
                    )));
                }
                trainer.set_total_iters(n)?;
            }
            (trainer, run, Some(path))
        }
    };

    ensure_dir(out)?;
    let mut records = match resumed_from {
        Some(_) => prior_records(out, trainer.iteration())?,
        None => Vec::with_capacity(trainer.config().total_iters),
    };
    let outputs = Outputs {
        out,
        run,
        resumed_from,
    };
    let total = trainer.config().total_iters;
    let plot_every = args.svg.then(|| total.div_ceil(PLOT_SNAPSHOTS).max(1));

    while !trainer.is_finished() {
        match trainer.step() {
            Ok(r) => records.push(r),
            Err(e) => {
                let status = format!("failed at iteration {}: {e}", trainer.iteration());
                write_atomic(&out.join(CSV_FILE), &records_to_csv(&records))?;
                outputs.manifest(&trainer, &status).write()?;
                return Err(CliError::Runtime(status));
            }
        }
        let done = trainer.iteration();
        if let Some(k) = args.checkpoint_every {
            if done % k == 0 && !trainer.is_finished() {
                outputs.save(
                    &trainer,
                    &records,
                    PERIODIC_CHECKPOINT,
                    &format!("running, {done} iterations"),
                )?;
            }
        }
        if let Some(k) = plot_every {
            if done % k == 0 || trainer.is_finished() {
                let title = format!("{} | iteration {done}", outputs.run.name);
                write_atomic(
                    &out.join(format!("samples-{done:06}.svg")),
                    &sample_plot(&trainer, &title)?,
                )?;
            }
        }
    }
    outputs.save(&trainer, &records, FINAL_CHECKPOINT, "complete")?;

    let s = trainer.scheduler_state();
    let best = best_eval(&records).map_or("no evaluations".to_string(), |(i, w)| {
        format!("best sliced_w {w:.4} at iteration {i}")
    });
    Ok(format!(
        "{}: {} iterations ({} G, {} D updates), {best}",
        trainer.config().strategy,
        trainer.iteration(),
        s.u_g,
        s.u_d
    ))
}
