//! WGAN training with a pluggable update schedule.
//!
//! Each iteration draws one real batch and one latent batch, asks the
//! scheduler which component to train, performs exactly one update of that
//! component, then reports `L_g = mean D(G(z))` and
//! `L_d = mean D(x) - mean D(G(z))` on the same batches with the updated
//! parameters. Those losses drive the adaptive ratios.

mod checkpoint;

use std::fmt::Write as _;

use thiserror::Error as ThisError;

use crate::data::{sample_latent, sample_real, DistributionSpec, RngStream};
use crate::metrics::{sliced_wasserstein, MetricReport};
use crate::nn::{
    backward, forward, Activation, Direction, MlpSpec, OptimizerKind, OptimizerState,
    OutputActivation, ParamSet,
};
use crate::sched::{Scheduler, SchedulerState, Strategy, UpdateTarget};
use crate::textfmt::fmt_f64;
use crate::{Error, Result, Tensor2};

pub use checkpoint::CHECKPOINT_MAGIC;

pub const REAL_STREAM: u64 = 1;
pub const LATENT_STREAM: u64 = 2;
pub const EVAL_STREAM: u64 = 3;

/// Abort threshold on `|L_d|`.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

pub const CSV_HEADER: &str = "iter,target,L_g,L_d,r_g,r_d,u_g,u_d,sliced_w";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub batch_m: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub optimizer: OptimizerKind,
    pub clip_c: f64,
    pub latent_dim: usize,
    pub gen_spec: MlpSpec,
    pub disc_spec: MlpSpec,
    pub data: DistributionSpec,
    pub total_iters: usize,
    pub eval_interval: usize,
    pub n_eval: usize,
    pub n_proj: usize,
    pub seed: u64,
    /// Samples per reporting epoch; an epoch is `epoch_size / batch_m` iterations.
    pub epoch_size: usize,
}

/// Layer widths and activations for the generator and critic.
#[derive(Debug, Clone, PartialEq)]
pub struct NetShapes {
    pub latent_dim: usize,
    pub gen_hidden: Vec<usize>,
    pub gen_activation: Activation,
    pub gen_output: OutputActivation,
    pub disc_hidden: Vec<usize>,
    pub disc_activation: Activation,
}

impl Default for NetShapes {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            gen_hidden: vec![32, 32],
            gen_activation: Activation::LeakyRelu(0.2),
            gen_output: OutputActivation::Linear,
            disc_hidden: vec![32, 32],
            disc_activation: Activation::LeakyRelu(0.2),
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        let shapes = NetShapes::default();
        Self {
            strategy: Strategy::Adaptive(Default::default()),
            batch_m: 64,
            lr_g: 0.00005,
            lr_d: 0.00005,
            optimizer: OptimizerKind::rmsprop(),
            clip_c: 0.01,
            latent_dim: shapes.latent_dim,
            gen_spec: MlpSpec {
                layer_sizes: [vec![shapes.latent_dim], shapes.gen_hidden.clone(), vec![2]].concat(),
                hidden: shapes.gen_activation,
                output: shapes.gen_output,
            },
            disc_spec: MlpSpec {
                layer_sizes: [vec![2], shapes.disc_hidden.clone(), vec![1]].concat(),
                hidden: shapes.disc_activation,
                output: OutputActivation::Linear,
            },
            data: DistributionSpec::default(),
            total_iters: 10_000,
            eval_interval: 100,
            n_eval: 1024,
            n_proj: crate::metrics::DEFAULT_TRAIN_PROJECTIONS,
            seed: 7,
            epoch_size: 50_000,
        }
    }
}

impl TrainConfig {
    /// Rebuilds both network specs; the critic always ends in a single linear unit.
    pub fn with_networks(mut self, shapes: &NetShapes) -> Result<Self> {
        self.latent_dim = shapes.latent_dim;
        self.gen_spec = MlpSpec::new(
            [vec![shapes.latent_dim], shapes.gen_hidden.clone(), vec![2]].concat(),
            shapes.gen_activation,
            shapes.gen_output,
        )?;
        self.disc_spec = MlpSpec::new(
            [vec![2], shapes.disc_hidden.clone(), vec![1]].concat(),
            shapes.disc_activation,
            OutputActivation::Linear,
        )?;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        self.optimizer.validate()?;
        self.data.validate()?;
        self.gen_spec.validate()?;
        self.disc_spec.validate()?;
        let positive = [
            ("batch_m", self.batch_m),
            ("latent_dim", self.latent_dim),
            ("total_iters", self.total_iters),
            ("eval_interval", self.eval_interval),
            ("n_eval", self.n_eval),
            ("n_proj", self.n_proj),
            ("epoch_size", self.epoch_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be >= 1")));
        }
        for (name, lr) in [("lr_g", self.lr_g), ("lr_d", self.lr_d)] {
            if !(lr.is_finite() && lr >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {lr}")));
            }
        }
        if !(self.clip_c.is_finite() && self.clip_c > 0.0) {
            return Err(Error::Config(format!(
                "clip_c must be > 0, got {}",
                self.clip_c
            )));
        }
        if self.gen_spec.input_dim() != self.latent_dim || self.gen_spec.output_dim() != 2 {
            return Err(Error::Config(format!(
                "generator must map latent_dim={} to 2-D points, got layers {:?}",
                self.latent_dim, self.gen_spec.layer_sizes
            )));
        }
        if self.disc_spec.input_dim() != 2
            || self.disc_spec.output_dim() != 1
            || self.disc_spec.output != OutputActivation::Linear
        {
            return Err(Error::Config(format!(
                "critic must map 2-D points to one linear score, got layers {:?} with {:?} output",
                self.disc_spec.layer_sizes, self.disc_spec.output
            )));
        }
        Ok(())
    }

    pub fn iters_per_epoch(&self) -> f64 {
        self.epoch_size as f64 / self.batch_m as f64
    }

    pub fn is_eval_iter(&self, iter: usize) -> bool {
        (iter + 1).is_multiple_of(self.eval_interval)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub target: UpdateTarget,
    pub l_g: f64,
    pub l_d: f64,
    pub r_g: f64,
    pub r_d: f64,
    pub u_g: u64,
    pub u_d: u64,
    pub sliced_w: Option<f64>,
}

impl IterationRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.iter,
            self.target.code(),
            fmt_f64(self.l_g),
            fmt_f64(self.l_d),
            fmt_f64(self.r_g),
            fmt_f64(self.r_d),
            self.u_g,
            self.u_d,
            self.sliced_w.map(fmt_f64).unwrap_or_default()
        )
    }

    /// Parses one CSV data row.
    pub fn from_csv_row(row: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("bad training CSV row `{row}`: {msg}"));
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != 9 {
            return Err(bad("expected 9 columns"));
        }
        let f = |s: &str| s.parse::<f64>().map_err(|_| bad("unparseable number"));
        let u = |s: &str| s.parse::<u64>().map_err(|_| bad("unparseable integer"));
        Ok(Self {
            iter: cells[0].parse().map_err(|_| bad("unparseable iteration"))?,
            target: cells[1].parse()?,
            l_g: f(cells[2])?,
            l_d: f(cells[3])?,
            r_g: f(cells[4])?,
            r_d: f(cells[5])?,
            u_g: u(cells[6])?,
            u_d: u(cells[7])?,
            sliced_w: if cells[8].is_empty() {
                None
            } else {
                Some(f(cells[8])?)
            },
        })
    }
}

/// Header plus one row per record.
pub fn records_to_csv(records: &[IterationRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 120 + 64);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

pub fn records_from_csv(text: &str) -> Result<Vec<IterationRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "training CSV must start with `{CSV_HEADER}`, found `{}`",
                other.unwrap_or("")
            )))
        }
    }
    lines
        .filter(|l| !l.is_empty())
        .map(IterationRecord::from_csv_row)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub config: TrainConfig,
    pub records: Vec<IterationRecord>,
    pub generator: ParamSet,
    pub discriminator: ParamSet,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        records_to_csv(&self.records)
    }

    pub fn metric_reports(&self) -> Vec<MetricReport> {
        self.records
            .iter()
            .filter_map(|r| {
                r.sliced_w.map(|w| MetricReport {
                    iteration: r.iter,
                    sliced_w: w,
                    n_samples: self.config.n_eval,
                    n_projections: self.config.n_proj,
                })
            })
            .collect()
    }

    pub fn first_iter_reaching(&self, threshold: f64) -> Option<usize> {
        first_iter_reaching(&self.records, threshold)
    }

    /// `(iter, sliced_w)` of the lowest evaluation.
    pub fn best(&self) -> Option<(usize, f64)> {
        best_eval(&self.records)
    }
}

/// Earliest evaluated iteration with `sliced_w <= threshold`.
pub fn first_iter_reaching(records: &[IterationRecord], threshold: f64) -> Option<usize> {
    records
        .iter()
        .find(|r| r.sliced_w.is_some_and(|w| w <= threshold))
        .map(|r| r.iter)
}

/// Lowest evaluation; ties keep the earliest iteration.
pub fn best_eval(records: &[IterationRecord]) -> Option<(usize, f64)> {
    records
        .iter()
        .filter_map(|r| r.sliced_w.map(|w| (r.iter, w)))
        .fold(None, |best, (i, w)| match best {
            Some((_, bw)) if bw <= w => best,
            _ => Some((i, w)),
        })
}

/// `(mean D(G(z)), mean D(x) - mean D(G(z)))`.
pub fn reported_losses(disc_out_real: &Tensor2, disc_out_fake: &Tensor2) -> (f64, f64) {
    let fake = disc_out_fake.mean();
    (fake, disc_out_real.mean() - fake)
}

/// A run that stopped early, with everything recorded before the failure.
#[derive(Debug, ThisError)]
#[error("{error} (after {} completed iterations)", partial.records.len())]
pub struct TrainFailure {
    #[source]
    pub error: Error,
    pub partial: Box<TrainHistory>,
}

/// Complete mutable state of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    config: TrainConfig,
    generator: ParamSet,
    discriminator: ParamSet,
    gen_opt: OptimizerState,
    disc_opt: OptimizerState,
    scheduler: Scheduler,
    real_rng: RngStream,
    latent_rng: RngStream,
    eval_rng: RngStream,
    iter: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut init_rng = RngStream::new(config.seed, crate::nn::INIT_STREAM);
        let generator = ParamSet::init(&config.gen_spec, &mut init_rng)?;
        let discriminator = ParamSet::init(&config.disc_spec, &mut init_rng)?;
        let gen_opt = OptimizerState::new(config.optimizer, config.lr_g, &generator)?;
        let disc_opt = OptimizerState::new(config.optimizer, config.lr_d, &discriminator)?;
        Ok(Self {
            scheduler: Scheduler::new(config.strategy)?,
            real_rng: RngStream::new(config.seed, REAL_STREAM),
            latent_rng: RngStream::new(config.seed, LATENT_STREAM),
            eval_rng: RngStream::new(config.seed, EVAL_STREAM),
            generator,
            discriminator,
            gen_opt,
            disc_opt,
            config,
            iter: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn is_finished(&self) -> bool {
        self.iter >= self.config.total_iters
    }

    pub fn generator(&self) -> &ParamSet {
        &self.generator
    }

    pub fn discriminator(&self) -> &ParamSet {
        &self.discriminator
    }

    pub fn scheduler_state(&self) -> &SchedulerState {
        self.scheduler.state()
    }

    /// Overrides the iteration budget (resuming into a longer run).
    pub fn set_total_iters(&mut self, total_iters: usize) -> Result<()> {
        if total_iters == 0 {
            return Err(Error::Config("total_iters must be >= 1".into()));
        }
        self.config.total_iters = total_iters;
        Ok(())
    }

    /// Ascent step on `mean D(x) - mean D(G(z))` for the critic, then clipping.
    /// Returns the generated batch, which this update leaves unchanged.
    pub fn discriminator_update(&mut self, real: &Tensor2, z: &Tensor2) -> Result<Tensor2> {
        let cfg = &self.config;
        let m = real.rows();
        let (fake, _) = forward(&self.generator, &cfg.gen_spec, z)?;
        let (_, cache_real) = forward(&self.discriminator, &cfg.disc_spec, real)?;
        let (_, cache_fake) = forward(&self.discriminator, &cfg.disc_spec, &fake)?;
        let (mut grads, _) = backward(
            &self.discriminator,
            &cfg.disc_spec,
            &cache_real,
            &Tensor2::filled(m, 1, 1.0),
        )?;
        let (fake_grads, _) = backward(
            &self.discriminator,
            &cfg.disc_spec,
            &cache_fake,
            &Tensor2::filled(fake.rows(), 1, -1.0),
        )?;
        grads.add_assign(&fake_grads)?;
        self.disc_opt
            .step(&mut self.discriminator, &grads, Direction::Ascend)?;
        self.discriminator.clip(cfg.clip_c);
        Ok(fake)
    }

    /// Descent step on `-mean D(G(z))` for the generator; the critic is frozen.
    pub fn generator_update(&mut self, z: &Tensor2) -> Result<()> {
        let cfg = &self.config;
        let (fake, cache_gen) = forward(&self.generator, &cfg.gen_spec, z)?;
        let (_, cache_disc) = forward(&self.discriminator, &cfg.disc_spec, &fake)?;
        let (_, d_fake) = backward(
            &self.discriminator,
            &cfg.disc_spec,
            &cache_disc,
            &Tensor2::filled(fake.rows(), 1, -1.0),
        )?;
        let (grads, _) = backward(&self.generator, &cfg.gen_spec, &cache_gen, &d_fake)?;
        self.gen_opt
            .step(&mut self.generator, &grads, Direction::Descend)
    }

    fn losses_on(&self, real: &Tensor2, fake: &Tensor2) -> Result<(f64, f64)> {
        let (d_real, _) = forward(&self.discriminator, &self.config.disc_spec, real)?;
        let (d_fake, _) = forward(&self.discriminator, &self.config.disc_spec, fake)?;
        Ok(reported_losses(&d_real, &d_fake))
    }

    /// Sliced W between `n_eval` generated and `n_eval` real points.
    pub fn evaluate(&mut self) -> Result<f64> {
        let cfg = &self.config;
        let z = sample_latent(cfg.latent_dim, cfg.n_eval, &mut self.eval_rng);
        let (fake, _) = forward(&self.generator, &cfg.gen_spec, &z)?;
        let real = sample_real(&cfg.data, cfg.n_eval, &mut self.eval_rng);
        sliced_wasserstein(&fake, &real, cfg.n_proj, &mut self.eval_rng)
    }

    /// Generated points from a caller-owned stream (plots, diagnostics).
    pub fn generate(&self, n: usize, rng: &mut RngStream) -> Result<Tensor2> {
        let z = sample_latent(self.config.latent_dim, n, rng);
        Ok(forward(&self.generator, &self.config.gen_spec, &z)?.0)
    }

    /// One scheduled update.
    ///
    /// On error the trainer must be discarded: a failing iteration may have
    /// already updated parameters.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let target = self.scheduler.decide();
        let cfg = &self.config;
        let real = sample_real(&cfg.data, cfg.batch_m, &mut self.real_rng);
        let z = sample_latent(cfg.latent_dim, cfg.batch_m, &mut self.latent_rng);
        let fake = match target {
            UpdateTarget::Discriminator => self.discriminator_update(&real, &z)?,
            UpdateTarget::Generator => {
                self.generator_update(&z)?;
                forward(&self.generator, &self.config.gen_spec, &z)?.0
            }
        };
        let (l_g, l_d) = self.losses_on(&real, &fake)?;
        if !l_g.is_finite() || !l_d.is_finite() || l_d.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                iter: self.iter,
                reason: format!("L_g={l_g}, L_d={l_d}"),
            });
        }
        self.scheduler.observe(target, l_g, l_d)?;
        let sliced_w = if self.config.is_eval_iter(self.iter) {
            Some(self.evaluate()?)
        } else {
            None
        };
        let s = self.scheduler.state();
        let record = IterationRecord {
            iter: self.iter,
            target,
            l_g,
            l_d,
            r_g: s.r_g,
            r_d: s.r_d,
            u_g: s.u_g,
            u_d: s.u_d,
            sliced_w,
        };
        self.iter += 1;
        Ok(record)
    }

    /// Steps until `total_iters`, appending to `records`.
    pub fn run(&mut self, records: &mut Vec<IterationRecord>) -> Result<()> {
        while !self.is_finished() {
            records.push(self.step()?);
        }
        Ok(())
    }

    pub fn into_history(self, records: Vec<IterationRecord>) -> TrainHistory {
        TrainHistory {
            config: self.config,
            records,
            generator: self.generator,
            discriminator: self.discriminator,
        }
    }
}

/// Runs a full training job from scratch.
pub fn train(config: TrainConfig) -> std::result::Result<TrainHistory, Box<TrainFailure>> {
    let mut trainer = match Trainer::new(config.clone()) {
        Ok(t) => t,
        Err(error) => {
            return Err(Box::new(TrainFailure {
                error,
                partial: Box::new(TrainHistory {
                    config,
                    records: Vec::new(),
                    generator: ParamSet { layers: Vec::new() },
                    discriminator: ParamSet { layers: Vec::new() },
                }),
            }))
        }
    };
    let mut records = Vec::with_capacity(trainer.config.total_iters);
    match trainer.run(&mut records) {
        Ok(()) => Ok(trainer.into_history(records)),
        Err(error) => Err(Box::new(TrainFailure {
            error,
            partial: Box::new(trainer.into_history(records)),
        })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(strategy: Strategy, iters: usize) -> TrainConfig {
        TrainConfig {
            strategy,
            batch_m: 16,
            total_iters: iters,
            eval_interval: 5,
            n_eval: 64,
            n_proj: 10,
            ..TrainConfig::default()
        }
        .with_networks(&NetShapes {
            latent_dim: 3,
            gen_hidden: vec![8],
            disc_hidden: vec![8],
            ..NetShapes::default()
        })
        .unwrap()
    }

    #[test]
    fn reported_loss_examples() {
        let ones = Tensor2::filled(4, 1, 1.0);
        let zeros = Tensor2::zeros(4, 1);
        assert_eq!(reported_losses(&ones, &zeros), (0.0, 1.0));
        assert_eq!(reported_losses(&ones, &ones).1, 0.0);
        assert_eq!(
            reported_losses(&Tensor2::filled(3, 1, 3.0), &Tensor2::filled(3, 1, -2.0)),
            (-2.0, 5.0)
        );
    }

    #[test]
    fn fixed_schedule_pattern_and_counters() {
        let h = train(tiny(Strategy::fixed(5, 1).unwrap(), 12)).unwrap();
        let seq: String = h.records.iter().map(|r| r.target.code()).collect();
        assert_eq!(seq, "DDDDDGDDDDDG");
        let last = h.records.last().unwrap();
        assert_eq!((last.u_g, last.u_d), (2, 10));
    }

    #[test]
    fn adaptive_starts_with_generator() {
        let h = train(tiny(Strategy::adaptive(1.0).unwrap(), 3)).unwrap();
        assert_eq!(h.records[0].target, UpdateTarget::Generator);
        assert_eq!((h.records[0].r_g, h.records[0].r_d), (0.0, 0.0));
    }

    #[test]
    fn critic_must_be_linear_scalar() {
        let mut cfg = TrainConfig::default();
        cfg.disc_spec.output = OutputActivation::Tanh;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.disc_spec.layer_sizes = vec![2, 4, 2];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn eval_cadence_and_first_reaching() {
        let h = train(tiny(Strategy::adaptive(1.0).unwrap(), 20)).unwrap();
        let evals: Vec<usize> = h.metric_reports().iter().map(|m| m.iteration).collect();
        assert_eq!(evals, vec![4, 9, 14, 19]);
        assert_eq!(h.first_iter_reaching(f64::MAX), Some(4));
        let (_, best) = h.best().unwrap();
        assert_eq!(h.first_iter_reaching(best * 0.999), None);
        assert!(h.first_iter_reaching(best).is_some());
    }

    #[test]
    fn csv_round_trip() {
        let h = train(tiny(Strategy::adaptive(2.0).unwrap(), 10)).unwrap();
        let csv = h.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(records_from_csv(&csv).unwrap(), h.records);
        assert!(csv.lines().nth(1).unwrap().ends_with(','));
    }

    #[test]
    fn divergence_is_reported_with_partial_history() {
        let mut cfg = tiny(Strategy::fixed(1, 1).unwrap(), 50);
        cfg.clip_c = 1e9;
        cfg.lr_d = 1e6;
        cfg.lr_g = 1e6;
        let failure = train(cfg).unwrap_err();
        assert!(
            matches!(failure.error, Error::Diverged { .. }),
            "{}",
            failure.error
        );
        assert!(failure.partial.records.len() < 50);
    }

    #[test]
    fn zero_learning_rate_generator_is_frozen() {
        let mut cfg = tiny(Strategy::adaptive(1.0).unwrap(), 10);
        cfg.lr_g = 0.0;
        let mut t = Trainer::new(cfg).unwrap();
        let before = t.generator().clone();
        let z = sample_latent(3, 16, &mut RngStream::new(1, 1));
        t.generator_update(&z).unwrap();
        assert_eq!(t.generator(), &before);
    }
}
