use std::fmt;

use super::mlp::{Gradients, ParamSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    RmsProp { decay: f64, eps: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub const fn rmsprop() -> Self {
        OptimizerKind::RmsProp {
            decay: 0.9,
            eps: 1e-8,
        }
    }

    /// The WGAN-GP style setting `beta1 = 0.5, beta2 = 0.9`.
    pub const fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.5,
            beta2: 0.9,
            eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be in (0, 1), got {v}")))
            }
        };
        let positive = |v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("optimizer eps must be > 0, got {v}")))
            }
        };
        match *self {
            OptimizerKind::RmsProp { decay, eps } => {
                unit("decay", decay)?;
                positive(eps)
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                unit("beta1", beta1)?;
                unit("beta2", beta2)?;
                positive(eps)
            }
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimizerKind::RmsProp { decay, eps } => write!(f, "rmsprop(decay={decay}, eps={eps})"),
            OptimizerKind::Adam { beta1, beta2, eps } => {
                write!(f, "adam(beta1={beta1}, beta2={beta2}, eps={eps})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Move along the gradient (critic maximising its objective).
    Ascend,
    /// Move against the gradient.
    Descend,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Ascend => 1.0,
            Direction::Descend => -1.0,
        }
    }
}

/// Optimizer hyperparameters plus per-parameter accumulators.
///
/// `first_moment` is only used by Adam; RMSProp keeps its running mean of
/// squared gradients in `second_moment`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub step_count: u64,
    pub first_moment: ParamSet,
    pub second_moment: ParamSet,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: &ParamSet) -> Result<Self> {
        kind.validate()?;
        if !(learning_rate.is_finite() && learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be >= 0, got {learning_rate}"
            )));
        }
        Ok(Self {
            kind,
            learning_rate,
            step_count: 0,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
        })
    }

    /// Updates the accumulators and returns the signed parameter displacement
    /// without applying it.
    pub fn delta(&mut self, grads: &Gradients, direction: Direction) -> Result<ParamSet> {
        if !grads.same_shape(&self.second_moment) {
            return Err(Error::shape(
                "optimizer step",
                "gradients congruent with parameters",
                "different shape tree",
            ));
        }
        if let Some(layer) = grads.first_non_finite_layer() {
            return Err(Error::NonFinite(format!("gradient of layer {layer}")));
        }
        self.step_count += 1;
        let lr = direction.sign() * self.learning_rate;
        let mut delta = grads.zeros_like();
        match self.kind {
            OptimizerKind::RmsProp { decay, eps } => {
                for ((d, v), g) in delta
                    .tensors_mut()
                    .zip(self.second_moment.tensors_mut())
                    .zip(grads.tensors())
                {
                    for ((d, v), &g) in d
                        .as_mut_slice()
                        .iter_mut()
                        .zip(v.as_mut_slice())
                        .zip(g.as_slice())
                    {
                        *v = decay * *v + (1.0 - decay) * g * g;
                        *d = lr * (g / (v.sqrt() + eps));
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = i32::try_from(self.step_count).unwrap_or(i32::MAX);
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((d, m), v), g) in delta
                    .tensors_mut()
                    .zip(self.first_moment.tensors_mut())
                    .zip(self.second_moment.tensors_mut())
                    .zip(grads.tensors())
                {
                    let cells = d
                        .as_mut_slice()
                        .iter_mut()
                        .zip(m.as_mut_slice())
                        .zip(v.as_mut_slice())
                        .zip(g.as_slice());
                    for (((d, m), v), &g) in cells {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *d = lr * (m_hat / (v_hat.sqrt() + eps));
                    }
                }
            }
        }
        Ok(delta)
    }

    /// One optimizer step applied in place.
    pub fn step(
        &mut self,
        params: &mut ParamSet,
        grads: &Gradients,
        direction: Direction,
    ) -> Result<()> {
        if !params.same_shape(grads) {
            return Err(Error::shape(
                "optimizer step",
                "gradients congruent with parameters",
                "different shape tree",
            ));
        }
        let delta = self.delta(grads, direction)?;
        for (p, d) in params.tensors_mut().zip(delta.tensors()) {
            for (p, d) in p.as_mut_slice().iter_mut().zip(d.as_slice()) {
                *p += d;
            }
        }
        Ok(())
    }
}
