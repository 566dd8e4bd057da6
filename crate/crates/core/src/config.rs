//! `key = value` run configuration.
//!
//! One file configures both the Dirac-GAN simulation and the WGAN trainer.
//! `#` starts a comment, blank lines are ignored and unknown keys are
//! rejected. [`RunConfig::to_text`] writes every key with its resolved value,
//! so a written manifest parses back to the identical configuration.
//!
//! | key | default |
//! |-----|---------|
//! | `name` | `run` |
//! | `strategy` | `adaptive` (`adaptive` or `fixed`) |
//! | `lambda`, `ratio_epsilon` | `1`, `1e-8` |
//! | `n_d`, `n_g` | `5`, `1` |
//! | `batch_m`, `lr_g`, `lr_d` | `64`, `0.00005`, `0.00005` |
//! | `optimizer` | `rmsprop` (`rmsprop` or `adam`) |
//! | `optimizer.decay` | `0.9` (rmsprop) |
//! | `optimizer.beta1`, `optimizer.beta2` | `0.5`, `0.9` (adam) |
//! | `optimizer.eps` | `1e-8` |
//! | `clip_c`, `latent_dim` | `0.01`, `8` |
//! | `gen.hidden`, `disc.hidden` | `32,32` |
//! | `gen.activation`, `disc.activation` | `leaky_relu(0.2)` (also `relu`, `tanh`) |
//! | `gen.output` | `linear` (or `tanh`) |
//! | `data` | `ring` (`ring`, `grid` or `gaussian`) |
//! | `data.k`, `data.radius`, `data.sigma` | `8`, `2`, `0.02` (ring) |
//! | `data.side`, `data.spacing`, `data.sigma` | `5`, `1`, `0.02` (grid) |
//! | `data.mean_x`, `data.mean_y`, `data.sigma` | `0`, `0`, `1` (gaussian) |
//! | `total_iters`, `eval_interval`, `n_eval`, `n_proj` | `10000`, `100`, `1024`, `100` |
//! | `seed`, `epoch_size` | `7`, `50000` |
//! | `dirac.alpha`, `dirac.clip` | `0.05`, `0.5` |
//! | `dirac.init_theta`, `dirac.init_psi`, `dirac.steps` | `1.5`, `0.5`, `5000` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::data::DistributionSpec;
use crate::dirac::DiracConfig;
use crate::nn::{Activation, OptimizerKind, OutputActivation};
use crate::sched::{AdaptiveConfig, Strategy};
use crate::train::{NetShapes, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub train: TrainConfig,
    pub dirac: DiracConfig,
    pub dirac_steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            train: TrainConfig::default(),
            dirac: DiracConfig::default(),
            dirac_steps: 5000,
        }
    }
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(line_err(
                    n,
                    format!("expected `key = value`, found `{line}`"),
                ));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(line_err(
                    n,
                    format!("expected `key = value`, found `{line}`"),
                ));
            }
            if let Some((prev, _)) = map.insert(key.to_string(), (n, value.to_string())) {
                return Err(line_err(
                    n,
                    format!("duplicate key `{key}` (first set on line {prev})"),
                ));
            }
        }
        Ok(Self { map })
    }

    fn take_raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<(usize, T)>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((n, v)) => v.parse::<T>().map(|t| Some((n, t))).map_err(|_| {
                line_err(
                    n,
                    format!("`{key}`: cannot parse `{v}` as {}", type_label::<T>()),
                )
            }),
        }
    }

    fn take_or<T: FromStr>(
        &mut self,
        key: &str,
        default: T,
        check: impl Fn(&T) -> bool,
        rule: &str,
    ) -> Result<T> {
        match self.take::<T>(key)? {
            None => Ok(default),
            Some((_, v)) if check(&v) => Ok(v),
            Some((n, _)) => Err(line_err(n, format!("`{key}` must be {rule}"))),
        }
    }

    fn pos_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        self.take_or(key, default, |v: &f64| v.is_finite() && *v > 0.0, "> 0")
    }

    fn nonneg_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        self.take_or(key, default, |v: &f64| v.is_finite() && *v >= 0.0, ">= 0")
    }

    fn finite_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        self.take_or(key, default, |v: &f64| v.is_finite(), "finite")
    }

    fn unit_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        self.take_or(key, default, |v: &f64| *v > 0.0 && *v < 1.0, "in (0, 1)")
    }

    fn pos_usize(&mut self, key: &str, default: usize) -> Result<usize> {
        self.take_or(key, default, |v: &usize| *v > 0, ">= 1")
    }

    fn finish(self) -> Result<()> {
        if let Some((key, (n, _))) = self.map.iter().min_by_key(|(_, (n, _))| *n) {
            return Err(line_err(*n, format!("unknown or inapplicable key `{key}`")));
        }
        Ok(())
    }
}

fn type_label<T>() -> &'static str {
    let name = std::any::type_name::<T>();
    if name.contains("f64") {
        "a number"
    } else if name.contains("u64") || name.contains("usize") || name.contains("u32") {
        "a non-negative integer"
    } else {
        "the expected type"
    }
}

fn line_err(line: usize, msg: String) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn parse_activation(n: usize, key: &str, v: &str) -> Result<Activation> {
    match v {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        "leaky_relu" => Ok(Activation::LeakyRelu(0.2)),
        _ => {
            let slope = v
                .strip_prefix("leaky_relu(")
                .and_then(|s| s.strip_suffix(')'))
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| line_err(n, format!("`{key}`: unknown activation `{v}`")))?;
            if !(slope > 0.0 && slope < 1.0) {
                return Err(line_err(
                    n,
                    format!("`{key}`: leaky_relu slope must be in (0, 1)"),
                ));
            }
            Ok(Activation::LeakyRelu(slope))
        }
    }
}

fn parse_hidden(n: usize, key: &str, v: &str) -> Result<Vec<usize>> {
    if v == "none" {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(line_err(
                n,
                format!("`{key}`: expected comma-separated positive widths, found `{v}`"),
            )),
        })
        .collect()
}

fn fmt_hidden(sizes: &[usize]) -> String {
    let inner = &sizes[1..sizes.len() - 1];
    if inner.is_empty() {
        "none".into()
    } else {
        inner
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let d = RunConfig::default();
        let dt = &d.train;

        let name = e.take_raw("name").map_or(d.name.clone(), |(_, v)| v);

        let lambda = e.pos_f64("lambda", 1.0)?;
        let ratio_epsilon = e.pos_f64("ratio_epsilon", crate::sched::DEFAULT_RATIO_EPSILON)?;
        let n_d = e.take_or("n_d", 5u32, |v| *v > 0, ">= 1")?;
        let n_g = e.take_or("n_g", 1u32, |v| *v > 0, ">= 1")?;
        let strategy = match e.take_raw("strategy") {
            None => Strategy::Adaptive(AdaptiveConfig {
                lambda,
                ratio_epsilon,
            }),
            Some((_, v)) if v == "adaptive" => Strategy::Adaptive(AdaptiveConfig {
                lambda,
                ratio_epsilon,
            }),
            Some((_, v)) if v == "fixed" => Strategy::Fixed { n_d, n_g },
            Some((n, v)) => {
                return Err(line_err(
                    n,
                    format!("`strategy` must be `adaptive` or `fixed`, found `{v}`"),
                ))
            }
        };

        let batch_m = e.pos_usize("batch_m", dt.batch_m)?;
        let lr_g = e.nonneg_f64("lr_g", dt.lr_g)?;
        let lr_d = e.nonneg_f64("lr_d", dt.lr_d)?;

        let optimizer = match e.take_raw("optimizer") {
            None => "rmsprop".to_string(),
            Some((n, v)) if v != "rmsprop" && v != "adam" => {
                return Err(line_err(
                    n,
                    format!("`optimizer` must be `rmsprop` or `adam`, found `{v}`"),
                ));
            }
            Some((_, v)) => v,
        };
        let optimizer = if optimizer == "adam" {
            let OptimizerKind::Adam { beta1, beta2, eps } = OptimizerKind::adam() else {
                unreachable!()
            };
            OptimizerKind::Adam {
                beta1: e.unit_f64("optimizer.beta1", beta1)?,
                beta2: e.unit_f64("optimizer.beta2", beta2)?,
                eps: e.pos_f64("optimizer.eps", eps)?,
            }
        } else {
            let OptimizerKind::RmsProp { decay, eps } = OptimizerKind::rmsprop() else {
                unreachable!()
            };
            OptimizerKind::RmsProp {
                decay: e.unit_f64("optimizer.decay", decay)?,
                eps: e.pos_f64("optimizer.eps", eps)?,
            }
        };

        let clip_c = e.pos_f64("clip_c", dt.clip_c)?;
        let latent_dim = e.pos_usize("latent_dim", dt.latent_dim)?;

        let mut net = |prefix: &str,
                       default_hidden: &[usize],
                       default_act: Activation|
         -> Result<(Vec<usize>, Activation)> {
            let hidden = match e.take_raw(&format!("{prefix}.hidden")) {
                None => default_hidden.to_vec(),
                Some((n, v)) => parse_hidden(n, &format!("{prefix}.hidden"), &v)?,
            };
            let act = match e.take_raw(&format!("{prefix}.activation")) {
                None => default_act,
                Some((n, v)) => parse_activation(n, &format!("{prefix}.activation"), &v)?,
            };
            Ok((hidden, act))
        };
        let (gen_hidden, gen_act) = net(
            "gen",
            &dt.gen_spec.layer_sizes[1..dt.gen_spec.layer_sizes.len() - 1],
            dt.gen_spec.hidden,
        )?;
        let (disc_hidden, disc_act) = net(
            "disc",
            &dt.disc_spec.layer_sizes[1..dt.disc_spec.layer_sizes.len() - 1],
            dt.disc_spec.hidden,
        )?;
        let gen_output = match e.take_raw("gen.output") {
            None => OutputActivation::Linear,
            Some((_, v)) if v == "linear" => OutputActivation::Linear,
            Some((_, v)) if v == "tanh" => OutputActivation::Tanh,
            Some((n, v)) => {
                return Err(line_err(
                    n,
                    format!("`gen.output` must be `linear` or `tanh`, found `{v}`"),
                ))
            }
        };

        let data = match e.take_raw("data") {
            None => "ring".to_string(),
            Some((_, v)) if ["ring", "grid", "gaussian"].contains(&v.as_str()) => v,
            Some((n, v)) => {
                return Err(line_err(
                    n,
                    format!("`data` must be `ring`, `grid` or `gaussian`, found `{v}`"),
                ));
            }
        };
        let data = match data.as_str() {
            "ring" => DistributionSpec::Ring {
                k: e.pos_usize("data.k", 8)?,
                radius: e.nonneg_f64("data.radius", 2.0)?,
                sigma: e.nonneg_f64("data.sigma", 0.02)?,
            },
            "grid" => DistributionSpec::Grid {
                side: e.pos_usize("data.side", 5)?,
                spacing: e.pos_f64("data.spacing", 1.0)?,
                sigma: e.nonneg_f64("data.sigma", 0.02)?,
            },
            _ => DistributionSpec::Gaussian {
                mean: [
                    e.finite_f64("data.mean_x", 0.0)?,
                    e.finite_f64("data.mean_y", 0.0)?,
                ],
                sigma: e.pos_f64("data.sigma", 1.0)?,
            },
        };

        let total_iters = e.pos_usize("total_iters", dt.total_iters)?;
        let eval_interval = e.pos_usize("eval_interval", dt.eval_interval)?;
        let n_eval = e.pos_usize("n_eval", dt.n_eval)?;
        let n_proj = e.pos_usize("n_proj", dt.n_proj)?;
        let seed = e.take::<u64>("seed")?.map_or(dt.seed, |(_, v)| v);
        let epoch_size = e.pos_usize("epoch_size", dt.epoch_size)?;

        let dirac = DiracConfig {
            alpha: e.nonneg_f64("dirac.alpha", d.dirac.alpha)?,
            clip: e.pos_f64("dirac.clip", d.dirac.clip)?,
            init_theta: e.finite_f64("dirac.init_theta", d.dirac.init_theta)?,
            init_psi: e.finite_f64("dirac.init_psi", d.dirac.init_psi)?,
        };
        let dirac_steps = e.pos_usize("dirac.steps", d.dirac_steps)?;
        e.finish()?;

        let train = TrainConfig {
            strategy,
            batch_m,
            lr_g,
            lr_d,
            optimizer,
            clip_c,
            data,
            total_iters,
            eval_interval,
            n_eval,
            n_proj,
            seed,
            epoch_size,
            ..TrainConfig::default()
        }
        .with_networks(&NetShapes {
            latent_dim,
            gen_hidden,
            gen_activation: gen_act,
            gen_output,
            disc_hidden,
            disc_activation: disc_act,
        })?;
        let cfg = RunConfig {
            name,
            train,
            dirac,
            dirac_steps,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.dirac.validate()
    }

    /// Every key with its resolved value.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("name", self.name.clone());
        let (lambda, eps) = match t.strategy {
            Strategy::Adaptive(c) => (c.lambda, c.ratio_epsilon),
            Strategy::Fixed { .. } => (1.0, crate::sched::DEFAULT_RATIO_EPSILON),
        };
        let (n_d, n_g) = match t.strategy {
            Strategy::Fixed { n_d, n_g } => (n_d, n_g),
            Strategy::Adaptive(_) => (5, 1),
        };
        kv(
            "strategy",
            match t.strategy {
                Strategy::Adaptive(_) => "adaptive".into(),
                Strategy::Fixed { .. } => "fixed".into(),
            },
        );
        kv("lambda", lambda.to_string());
        kv("ratio_epsilon", eps.to_string());
        kv("n_d", n_d.to_string());
        kv("n_g", n_g.to_string());
        kv("batch_m", t.batch_m.to_string());
        kv("lr_g", t.lr_g.to_string());
        kv("lr_d", t.lr_d.to_string());
        match t.optimizer {
            OptimizerKind::RmsProp { decay, eps } => {
                kv("optimizer", "rmsprop".into());
                kv("optimizer.decay", decay.to_string());
                kv("optimizer.eps", eps.to_string());
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                kv("optimizer", "adam".into());
                kv("optimizer.beta1", beta1.to_string());
                kv("optimizer.beta2", beta2.to_string());
                kv("optimizer.eps", eps.to_string());
            }
        }
        kv("clip_c", t.clip_c.to_string());
        kv("latent_dim", t.latent_dim.to_string());
        kv("gen.hidden", fmt_hidden(&t.gen_spec.layer_sizes));
        kv("gen.activation", t.gen_spec.hidden.to_string());
        kv(
            "gen.output",
            match t.gen_spec.output {
                OutputActivation::Linear => "linear".into(),
                OutputActivation::Tanh => "tanh".into(),
            },
        );
        kv("disc.hidden", fmt_hidden(&t.disc_spec.layer_sizes));
        kv("disc.activation", t.disc_spec.hidden.to_string());
        match t.data {
            DistributionSpec::Ring { k, radius, sigma } => {
                kv("data", "ring".into());
                kv("data.k", k.to_string());
                kv("data.radius", radius.to_string());
                kv("data.sigma", sigma.to_string());
            }
            DistributionSpec::Grid {
                side,
                spacing,
                sigma,
            } => {
                kv("data", "grid".into());
                kv("data.side", side.to_string());
                kv("data.spacing", spacing.to_string());
                kv("data.sigma", sigma.to_string());
            }
            DistributionSpec::Gaussian { mean, sigma } => {
                kv("data", "gaussian".into());
                kv("data.mean_x", mean[0].to_string());
                kv("data.mean_y", mean[1].to_string());
                kv("data.sigma", sigma.to_string());
            }
        }
        kv("total_iters", t.total_iters.to_string());
        kv("eval_interval", t.eval_interval.to_string());
        kv("n_eval", t.n_eval.to_string());
        kv("n_proj", t.n_proj.to_string());
        kv("seed", t.seed.to_string());
        kv("epoch_size", t.epoch_size.to_string());
        kv("dirac.alpha", self.dirac.alpha.to_string());
        kv("dirac.clip", self.dirac.clip.to_string());
        kv("dirac.init_theta", self.dirac.init_theta.to_string());
        kv("dirac.init_psi", self.dirac.init_psi.to_string());
        kv("dirac.steps", self.dirac_steps.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let t = &cfg.train;
        assert_eq!(t.strategy, Strategy::adaptive(1.0).unwrap());
        assert_eq!(
            (t.batch_m, t.lr_g, t.lr_d, t.clip_c),
            (64, 0.00005, 0.00005, 0.01)
        );
        assert_eq!(t.optimizer, OptimizerKind::rmsprop());
    }

    #[test]
    fn lambda_selects_adaptive() {
        let cfg = RunConfig::parse("lambda = 3  # heavier generator\n").unwrap();
        assert_eq!(cfg.train.strategy, Strategy::adaptive(3.0).unwrap());
    }

    #[test]
    fn constraint_errors_carry_line_numbers() {
        let err = RunConfig::parse("# header\n\nlambda = -1\n")
            .unwrap_err()
            .to_string();
        assert!(
            err.contains("line 3") && err.contains("lambda") && err.contains("> 0"),
            "{err}"
        );

        let err = RunConfig::parse("seed = 1\nbogus = 2\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2") && err.contains("bogus"), "{err}");

        let err = RunConfig::parse("batch_m = many\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 1") && err.contains("batch_m"), "{err}");

        let err = RunConfig::parse("data = ring\ndata.side = 3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2") && err.contains("data.side"), "{err}");

        assert!(RunConfig::parse("seed = 1\nseed = 2\n").is_err());
        assert!(RunConfig::parse("just words\n").is_err());
        assert!(RunConfig::parse("dirac.init_psi = 0.9\n").is_err());
    }

    #[test]
    fn resolved_text_round_trips() {
        let texts = [
            "",
            "strategy = fixed\nn_d = 2\nn_g = 3\noptimizer = adam\ndata = grid\ndata.side = 3\n",
            "data = gaussian\ndata.mean_x = 1.5\ngen.hidden = none\ngen.activation = tanh\ngen.output = tanh\n",
            "lambda = 10\nratio_epsilon = 1e-9\ndisc.activation = leaky_relu(0.1)\nname = heavy-g\nseed = 99\n",
        ];
        for text in texts {
            let cfg = RunConfig::parse(text).unwrap();
            let again = RunConfig::parse(&cfg.to_text()).unwrap();
            assert_eq!(cfg, again, "{text}");
            assert_eq!(cfg.to_text(), again.to_text());
        }
    }

    #[test]
    fn network_keys_shape_specs() {
        let cfg =
            RunConfig::parse("latent_dim = 4\ngen.hidden = 16\ndisc.hidden = 8,8,8\n").unwrap();
        assert_eq!(cfg.train.gen_spec.layer_sizes, vec![4, 16, 2]);
        assert_eq!(cfg.train.disc_spec.layer_sizes, vec![2, 8, 8, 8, 1]);
        assert_eq!(cfg.train.disc_spec.output, OutputActivation::Linear);
    }
}
