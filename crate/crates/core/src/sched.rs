//! Update scheduling: decides whether the generator or the critic trains next.
//!
//! The adaptive rule keeps the last observed pair of losses and the relative
//! change of each since the previous iteration:
//!
//! ```text
//! r_g = |(L_g - L_g_prev) / L_g_prev|      r_d = |(L_d - L_d_prev) / L_d_prev|
//! ```
//!
//! and trains the discriminator iff `r_d > lambda * r_g`. The ratios start at
//! 1, so the very first decision is a generator update whenever `lambda >= 1`.
//! The fixed baseline cycles through `n_d` critic updates followed by `n_g`
//! generator updates.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

pub const DEFAULT_RATIO_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateTarget {
    Generator,
    Discriminator,
}

impl UpdateTarget {
    /// Single-letter code used in CSV output.
    pub fn code(self) -> &'static str {
        match self {
            UpdateTarget::Generator => "G",
            UpdateTarget::Discriminator => "D",
        }
    }
}

impl fmt::Display for UpdateTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for UpdateTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "G" => Ok(UpdateTarget::Generator),
            "D" => Ok(UpdateTarget::Discriminator),
            other => Err(Error::Config(format!("unknown update target `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    /// Weight on the generator ratio; larger values route more updates to G.
    pub lambda: f64,
    /// Denominator floor for near-zero previous losses.
    pub ratio_epsilon: f64,
}

impl AdaptiveConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        let cfg = Self {
            lambda,
            ratio_epsilon: DEFAULT_RATIO_EPSILON,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Config(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(self.ratio_epsilon.is_finite() && self.ratio_epsilon > 0.0) {
            return Err(Error::Config(format!(
                "ratio_epsilon must be > 0, got {}",
                self.ratio_epsilon
            )));
        }
        Ok(())
    }
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            ratio_epsilon: DEFAULT_RATIO_EPSILON,
        }
    }
}

/// Relative change `|(current - previous) / previous|`.
///
/// When `|previous| < eps` the denominator is replaced by `eps` so the result
/// stays finite.
pub fn loss_change_ratio(current: f64, previous: f64, eps: f64) -> Result<f64> {
    if !current.is_finite() || !previous.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss change ratio inputs (current={current}, previous={previous})"
        )));
    }
    let diff = current - previous;
    let r = if previous.abs() >= eps {
        (diff / previous).abs()
    } else {
        diff.abs() / eps
    };
    if !r.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss change ratio (current={current}, previous={previous})"
        )));
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerState {
    pub r_g: f64,
    pub r_d: f64,
    pub prev_l_g: f64,
    pub prev_l_d: f64,
    pub first_iteration: bool,
    pub u_g: u64,
    pub u_d: u64,
}

impl Default for SchedulerState {
    fn default() -> Self {
        Self::new()
    }
}

impl SchedulerState {
    pub fn new() -> Self {
        Self {
            r_g: 1.0,
            r_d: 1.0,
            prev_l_g: 0.0,
            prev_l_d: 0.0,
            first_iteration: true,
            u_g: 0,
            u_d: 0,
        }
    }

    /// The adaptive rule. Ties go to the generator.
    pub fn adaptive_decide(&self, config: &AdaptiveConfig) -> UpdateTarget {
        if self.r_d > config.lambda * self.r_g {
            UpdateTarget::Discriminator
        } else {
            UpdateTarget::Generator
        }
    }

    /// Feeds the post-update losses of one iteration into the ratios.
    ///
    /// On failure the state is left untouched.
    pub fn adaptive_observe(&mut self, l_g: f64, l_d: f64, eps: f64) -> Result<()> {
        let (prev_g, prev_d) = if self.first_iteration {
            (l_g, l_d)
        } else {
            (self.prev_l_g, self.prev_l_d)
        };
        let r_g = loss_change_ratio(l_g, prev_g, eps)?;
        let r_d = loss_change_ratio(l_d, prev_d, eps)?;
        self.r_g = r_g;
        self.r_d = r_d;
        self.prev_l_g = l_g;
        self.prev_l_d = l_d;
        self.first_iteration = false;
        Ok(())
    }

    pub fn record_update(&mut self, target: UpdateTarget) {
        match target {
            UpdateTarget::Generator => self.u_g += 1,
            UpdateTarget::Discriminator => self.u_d += 1,
        }
    }

    pub fn total_updates(&self) -> u64 {
        self.u_g + self.u_d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedScheduleState {
    n_d: u32,
    n_g: u32,
    position: u32,
}

impl FixedScheduleState {
    pub fn new(n_d: u32, n_g: u32) -> Result<Self> {
        if n_d == 0 || n_g == 0 {
            return Err(Error::Config(format!(
                "n_d and n_g must be positive, got n_d={n_d}, n_g={n_g}"
            )));
        }
        Ok(Self {
            n_d,
            n_g,
            position: 0,
        })
    }

    /// Restores a state mid-cycle (checkpoint loading).
    pub fn with_position(n_d: u32, n_g: u32, position: u32) -> Result<Self> {
        let mut s = Self::new(n_d, n_g)?;
        if position >= n_d + n_g {
            return Err(Error::Config(format!(
                "fixed schedule position {position} outside cycle of length {}",
                n_d + n_g
            )));
        }
        s.position = position;
        Ok(s)
    }

    pub fn n_d(&self) -> u32 {
        self.n_d
    }

    pub fn n_g(&self) -> u32 {
        self.n_g
    }

    pub fn position(&self) -> u32 {
        self.position
    }

    pub fn peek(&self) -> UpdateTarget {
        if self.position < self.n_d {
            UpdateTarget::Discriminator
        } else {
            UpdateTarget::Generator
        }
    }

    pub fn fixed_decide(&mut self) -> UpdateTarget {
        let target = self.peek();
        self.position = (self.position + 1) % (self.n_d + self.n_g);
        target
    }
}

/// Which rule picks the next update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Adaptive(AdaptiveConfig),
    Fixed { n_d: u32, n_g: u32 },
}

impl Strategy {
    pub fn adaptive(lambda: f64) -> Result<Self> {
        Ok(Strategy::Adaptive(AdaptiveConfig::new(lambda)?))
    }

    pub fn fixed(n_d: u32, n_g: u32) -> Result<Self> {
        FixedScheduleState::new(n_d, n_g)?;
        Ok(Strategy::Fixed { n_d, n_g })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Strategy::Adaptive(cfg) => cfg.validate(),
            Strategy::Fixed { n_d, n_g } => FixedScheduleState::new(*n_d, *n_g).map(|_| ()),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Adaptive(cfg) => write!(f, "adaptive(lambda={})", cfg.lambda),
            Strategy::Fixed { n_d, n_g } => write!(f, "fixed(n_d={n_d}, n_g={n_g})"),
        }
    }
}

/// Strategy plus its running state.
///
/// Ratios are tracked under both strategies so that histories are comparable;
/// only the adaptive strategy consults them.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheduler {
    strategy: Strategy,
    state: SchedulerState,
    fixed: Option<FixedScheduleState>,
    eps: f64,
}

impl Scheduler {
    pub fn new(strategy: Strategy) -> Result<Self> {
        strategy.validate()?;
        let (fixed, eps) = match strategy {
            Strategy::Adaptive(cfg) => (None, cfg.ratio_epsilon),
            Strategy::Fixed { n_d, n_g } => (
                Some(FixedScheduleState::new(n_d, n_g)?),
                DEFAULT_RATIO_EPSILON,
            ),
        };
        Ok(Self {
            strategy,
            state: SchedulerState::new(),
            fixed,
            eps,
        })
    }

    pub fn from_parts(
        strategy: Strategy,
        state: SchedulerState,
        fixed_position: Option<u32>,
    ) -> Result<Self> {
        let mut s = Self::new(strategy)?;
        s.state = state;
        if let (Some(fixed), Some(pos)) = (s.fixed.as_mut(), fixed_position) {
            *fixed = FixedScheduleState::with_position(fixed.n_d(), fixed.n_g(), pos)?;
        }
        Ok(s)
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn state(&self) -> &SchedulerState {
        &self.state
    }

    pub fn fixed_position(&self) -> Option<u32> {
        self.fixed.map(|f| f.position())
    }

    pub fn ratio_epsilon(&self) -> f64 {
        self.eps
    }

    /// Next target. Advances the cycle position under the fixed strategy.
    pub fn decide(&mut self) -> UpdateTarget {
        match (&self.strategy, self.fixed.as_mut()) {
            (Strategy::Adaptive(cfg), _) => self.state.adaptive_decide(cfg),
            (Strategy::Fixed { .. }, Some(fixed)) => fixed.fixed_decide(),
            (Strategy::Fixed { .. }, None) => unreachable!("fixed strategy without cycle state"),
        }
    }

    /// Records the executed update and the losses observed after it.
    pub fn observe(&mut self, target: UpdateTarget, l_g: f64, l_d: f64) -> Result<()> {
        self.state.adaptive_observe(l_g, l_d, self.eps)?;
        self.state.record_update(target);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sched::Strategy;
    use proptest::prelude::*;

    const EPS: f64 = 1e-8;

    #[test]
    fn ratio_examples() {
        assert_eq!(loss_change_ratio(2.0, 1.0, EPS).unwrap(), 1.0);
        assert_eq!(loss_change_ratio(1.0, 1.0, EPS).unwrap(), 0.0);
        assert_eq!(loss_change_ratio(-0.5, 0.25, EPS).unwrap(), 3.0);
    }

    #[test]
    fn ratio_guards_zero_previous() {
        assert_eq!(loss_change_ratio(1e-8, 0.0, EPS).unwrap(), 1.0);
        assert_eq!(loss_change_ratio(0.0, 0.0, EPS).unwrap(), 0.0);
    }

    #[test]
    fn ratio_rejects_non_finite() {
        assert!(matches!(
            loss_change_ratio(f64::NAN, 1.0, EPS),
            Err(Error::NonFinite(_))
        ));
        assert!(loss_change_ratio(1.0, f64::INFINITY, EPS).is_err());
    }

    fn state(r_d: f64, r_g: f64) -> SchedulerState {
        SchedulerState {
            r_d,
            r_g,
            ..SchedulerState::new()
        }
    }

    #[test]
    fn decide_examples() {
        let cfg = |l| AdaptiveConfig::new(l).unwrap();
        assert_eq!(
            state(1.0, 1.0).adaptive_decide(&cfg(1.0)),
            UpdateTarget::Generator
        );
        assert_eq!(
            state(2.0, 1.0).adaptive_decide(&cfg(1.0)),
            UpdateTarget::Discriminator
        );
        assert_eq!(
            state(2.0, 1.0).adaptive_decide(&cfg(3.0)),
            UpdateTarget::Generator
        );
    }

    #[test]
    fn observe_examples() {
        let mut s = SchedulerState::new();
        s.adaptive_observe(3.0, -1.0, EPS).unwrap();
        assert_eq!((s.r_g, s.r_d), (0.0, 0.0));
        assert_eq!((s.prev_l_g, s.prev_l_d), (3.0, -1.0));
        assert!(!s.first_iteration);

        s.adaptive_observe(1.5, -1.0, EPS).unwrap();
        assert_eq!((s.r_g, s.r_d), (0.5, 0.0));

        let mut s = SchedulerState {
            prev_l_g: 1.0,
            prev_l_d: 2.0,
            first_iteration: false,
            ..SchedulerState::new()
        };
        s.adaptive_observe(1.0, 3.0, EPS).unwrap();
        assert_eq!((s.r_g, s.r_d), (0.0, 0.5));
    }

    #[test]
    fn observe_failure_leaves_state() {
        let mut s = SchedulerState::new();
        s.adaptive_observe(1.0, 2.0, EPS).unwrap();
        let before = s;
        assert!(s.adaptive_observe(f64::NAN, 2.0, EPS).is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn record_update_examples() {
        let mut s = SchedulerState::new();
        s.record_update(UpdateTarget::Generator);
        assert_eq!((s.u_g, s.u_d), (1, 0));
        let mut s = SchedulerState {
            u_g: 5,
            u_d: 2,
            ..SchedulerState::new()
        };
        s.record_update(UpdateTarget::Discriminator);
        assert_eq!((s.u_g, s.u_d), (5, 3));
        s.record_update(UpdateTarget::Generator);
        s.record_update(UpdateTarget::Generator);
        assert_eq!(s.u_g, 7);
    }

    fn fixed_sequence(n_d: u32, n_g: u32, n: usize) -> String {
        let mut f = FixedScheduleState::new(n_d, n_g).unwrap();
        (0..n).map(|_| f.fixed_decide().code()).collect()
    }

    #[test]
    fn fixed_examples() {
        assert_eq!(fixed_sequence(5, 1, 7), "DDDDDGD");
        assert_eq!(fixed_sequence(1, 1, 4), "DGDG");
        assert_eq!(fixed_sequence(2, 3, 10), "DDGGGDDGGG");
        assert!(FixedScheduleState::new(0, 1).is_err());
        assert!(FixedScheduleState::with_position(2, 1, 3).is_err());
    }

    #[test]
    fn scheduler_fixed_tracks_ratios_and_counters() {
        let mut s = Scheduler::new(Strategy::fixed(2, 1).unwrap()).unwrap();
        for (i, l) in [1.0, 2.0, 4.0].into_iter().enumerate() {
            let t = s.decide();
            s.observe(t, l, l).unwrap();
            assert_eq!(s.state().total_updates(), i as u64 + 1);
        }
        assert_eq!((s.state().u_g, s.state().u_d), (1, 2));
        assert_eq!(s.state().r_g, 1.0);
        assert_eq!(s.fixed_position(), Some(0));
    }

    proptest! {
        #[test]
        fn ratio_nonnegative_and_scale_invariant(
            cur in -1e3f64..1e3,
            prev in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3],
            k in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
        ) {
            let r = loss_change_ratio(cur, prev, EPS).unwrap();
            prop_assert!(r >= 0.0);
            let rs = loss_change_ratio(cur * k, prev * k, EPS).unwrap();
            prop_assert!((r - rs).abs() <= 1e-9 * r.max(1.0));
        }

        #[test]
        fn decide_is_monotone_in_lambda(
            r_d in 0.0f64..10.0, r_g in 0.0f64..10.0,
            l0 in 0.01f64..10.0, dl in 0.0f64..10.0,
        ) {
            let s = state(r_d, r_g);
            let a = AdaptiveConfig::new(l0).unwrap();
            let b = AdaptiveConfig::new(l0 + dl).unwrap();
            prop_assert_eq!(s.adaptive_decide(&a), s.adaptive_decide(&a));
            if s.adaptive_decide(&a) == UpdateTarget::Generator {
                prop_assert_eq!(s.adaptive_decide(&b), UpdateTarget::Generator);
            }
        }

        #[test]
        fn fixed_cycle_composition(n_d in 1u32..8, n_g in 1u32..8, cycles in 1usize..4) {
            let period = (n_d + n_g) as usize;
            let seq = fixed_sequence(n_d, n_g, period * cycles);
            let one = "D".repeat(n_d as usize) + &"G".repeat(n_g as usize);
            prop_assert_eq!(seq, one.repeat(cycles));
        }
    }
}
