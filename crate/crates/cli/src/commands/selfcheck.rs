use std::fmt::Write as _;

use adagan::nn::{
    grad_check_with, Activation, Direction, Layer, MlpSpec, OptimizerKind, OptimizerState,
    OutputActivation, ParamSet,
};
use adagan::Tensor2;

use crate::error::CliResult;

pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const OPTIMIZER_TOLERANCE: f64 = 1e-12;
const FD_STEP: f64 = 1e-5;
const SEEDS: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub case: String,
    pub error: f64,
    pub tolerance: f64,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

#[derive(Default)]
pub struct SelfcheckArgs {
    /// Scale analytic gradients before comparison; the check must then fail.
    pub perturb_backward: bool,
}

fn scalar(v: f64) -> ParamSet {
    ParamSet {
        layers: vec![Layer {
            weight: Tensor2::filled(1, 1, v),
            bias: Tensor2::filled(1, 1, v),
        }],
    }
}

/// First descent step from `p = 1` with `g = 1` and `lr = 0.1`.
fn first_step(kind: OptimizerKind) -> CliResult<f64> {
    let mut p = scalar(1.0);
    let mut opt = OptimizerState::new(kind, 0.1, &p)?;
    opt.step(&mut p, &scalar(1.0), Direction::Descend)?;
    Ok(1.0 - p.layers[0].weight.get(0, 0))
}

pub fn checks(args: &SelfcheckArgs) -> CliResult<Vec<CheckRow>> {
    let scale = if args.perturb_backward { 1.01 } else { 1.0 };
    let mut rows = Vec::new();
    let archs: [&[usize]; 3] = [&[2, 1], &[2, 8, 1], &[4, 16, 8, 2]];
    for act in [
        Activation::Relu,
        Activation::LeakyRelu(0.2),
        Activation::Tanh,
    ] {
        for sizes in archs {
            let spec = MlpSpec::new(sizes.to_vec(), act, OutputActivation::Linear)?;
            let mut worst = 0.0f64;
            for seed in 0..SEEDS {
                let err = grad_check_with(&spec, seed, FD_STEP, |g| *g = g.scaled(scale))?;
                worst = worst.max(err);
            }
            let arch = sizes
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join("-");
            rows.push(CheckRow {
                case: format!("grad {act} {arch} ({SEEDS} seeds)"),
                error: worst,
                tolerance: GRAD_TOLERANCE,
            });
        }
    }
    let rms_expected = 0.1 / (0.1f64.sqrt() + 1e-8);
    let adam_expected = 0.1 / (1.0 + 1e-8);
    for (case, kind, expected) in [
        ("rmsprop first step", OptimizerKind::rmsprop(), rms_expected),
        ("adam first step", OptimizerKind::adam(), adam_expected),
    ] {
        let got = first_step(kind)?;
        rows.push(CheckRow {
            case: case.into(),
            error: (got - expected).abs() / expected,
            tolerance: OPTIMIZER_TOLERANCE,
        });
    }
    Ok(rows)
}

pub fn table(rows: &[CheckRow]) -> String {
    let width = rows.iter().map(|r| r.case.len()).max().unwrap_or(4).max(4);
    let mut out = format!(
        "{:<width$}  {:>12}  {:>9}  result\n",
        "case", "max_rel_err", "tolerance"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>12.3e}  {:>9.0e}  {}",
            r.case,
            r.error,
            r.tolerance,
            if r.passed() { "pass" } else { "FAIL" }
        );
    }
    out
}
