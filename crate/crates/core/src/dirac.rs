//! The Dirac-GAN: generator `δ_θ`, linear critic `D(x) = ψ·x`, data `δ_1`.
//!
//! With identity `f` the objective is `L(θ, ψ) = ψ - ψθ`, the gradient field
//! is `v(θ, ψ) = (ψ, 1 - θ)` and its only zero is the equilibrium `(1, 0)`.
//! Critic steps are clipped to `[-clip, clip]`.

use std::fmt::Write as _;

use crate::sched::{Scheduler, Strategy, UpdateTarget};
use crate::textfmt::fmt_f64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracState {
    pub theta: f64,
    pub psi: f64,
}

impl DiracState {
    pub const EQUILIBRIUM: DiracState = DiracState {
        theta: 1.0,
        psi: 0.0,
    };

    pub fn new(theta: f64, psi: f64) -> Self {
        Self { theta, psi }
    }

    pub fn distance_to_equilibrium(&self) -> f64 {
        (self.theta - 1.0).hypot(self.psi)
    }

    /// `(L_g, L_d) = (ψθ, ψ - ψθ)`.
    pub fn losses(&self) -> (f64, f64) {
        let l_g = self.psi * self.theta;
        (l_g, self.psi - l_g)
    }

    pub fn gradient_field(&self) -> (f64, f64) {
        (self.psi, 1.0 - self.theta)
    }

    /// `θ' = θ + αψ`, `ψ' = ψ`.
    pub fn generator_step(&self, alpha: f64) -> Self {
        Self {
            theta: self.theta + alpha * self.psi,
            psi: self.psi,
        }
    }

    /// `ψ' = clamp(ψ + α(1 - θ), -clip, clip)`, `θ' = θ`.
    ///
    /// `α(1 - θ)` is the product the update matrix `[[1, 0], [α/θ - α, 1]]`
    /// encodes, written without the `1/θ` factor so it is defined at `θ = 0`.
    pub fn discriminator_step(&self, alpha: f64, clip: f64) -> Self {
        Self {
            theta: self.theta,
            psi: (self.psi + alpha * (1.0 - self.theta)).clamp(-clip, clip),
        }
    }

    pub fn step(&self, target: UpdateTarget, alpha: f64, clip: f64) -> Self {
        match target {
            UpdateTarget::Generator => self.generator_step(alpha),
            UpdateTarget::Discriminator => self.discriminator_step(alpha, clip),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracConfig {
    pub alpha: f64,
    pub clip: f64,
    pub init_theta: f64,
    pub init_psi: f64,
}

impl Default for DiracConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            clip: 0.5,
            init_theta: 1.5,
            init_psi: 0.5,
        }
    }
}

impl DiracConfig {
    pub fn validate(&self) -> Result<()> {
        // alpha = 0 is accepted: a frozen trajectory is a useful control
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::Config(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.clip.is_finite() && self.clip > 0.0) {
            return Err(Error::Config(format!(
                "clip must be > 0, got {}",
                self.clip
            )));
        }
        if !self.init_theta.is_finite() || !self.init_psi.is_finite() {
            return Err(Error::Config("initial point must be finite".into()));
        }
        if self.init_psi.abs() > self.clip {
            return Err(Error::Config(format!(
                "initial psi {} outside clipping band [-{c}, {c}]",
                self.init_psi,
                c = self.clip
            )));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> DiracState {
        DiracState::new(self.init_theta, self.init_psi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub state: DiracState,
    /// `None` for the initial point.
    pub target: Option<UpdateTarget>,
    pub l_g: f64,
    pub l_d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiracTrajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl DiracTrajectory {
    pub fn final_state(&self) -> DiracState {
        self.points
            .last()
            .expect("trajectory holds the initial point")
            .state
    }

    pub fn targets(&self) -> impl Iterator<Item = UpdateTarget> + '_ {
        self.points.iter().filter_map(|p| p.target)
    }

    pub fn discriminator_fraction(&self) -> f64 {
        let (d, n) = self.targets().fold((0usize, 0usize), |(d, n), t| {
            (d + usize::from(t == UpdateTarget::Discriminator), n + 1)
        });
        if n == 0 {
            0.0
        } else {
            d as f64 / n as f64
        }
    }

    /// Smallest distance to `(1, 0)` over the last `count` recorded states.
    pub fn min_distance_in_tail(&self, count: usize) -> f64 {
        let start = self.points.len().saturating_sub(count);
        self.points[start..]
            .iter()
            .map(|p| p.state.distance_to_equilibrium())
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV with header `step,target,theta,psi,L_g,L_d`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,target,theta,psi,L_g,L_d\n");
        for p in &self.points {
            let target = p.target.map_or("init", UpdateTarget::code);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.step,
                target,
                fmt_f64(p.state.theta),
                fmt_f64(p.state.psi),
                fmt_f64(p.l_g),
                fmt_f64(p.l_d)
            );
        }
        out
    }
}

/// Runs `steps` scheduled updates from the configured initial point.
///
/// The scheduler observes the exact losses after every update.
pub fn simulate(config: &DiracConfig, strategy: Strategy, steps: usize) -> Result<DiracTrajectory> {
    config.validate()?;
    if steps == 0 {
        return Err(Error::Config("steps must be >= 1".into()));
    }
    let mut scheduler = Scheduler::new(strategy)?;
    let mut state = config.initial_state();
    let (l_g, l_d) = state.losses();
    let mut points = Vec::with_capacity(steps + 1);
    points.push(TrajectoryPoint {
        step: 0,
        state,
        target: None,
        l_g,
        l_d,
    });
    for step in 1..=steps {
        let target = scheduler.decide();
        state = state.step(target, config.alpha, config.clip);
        let (l_g, l_d) = state.losses();
        scheduler.observe(target, l_g, l_d)?;
        points.push(TrajectoryPoint {
            step,
            state,
            target: Some(target),
            l_g,
            l_d,
        });
    }
    Ok(DiracTrajectory { points })
}
