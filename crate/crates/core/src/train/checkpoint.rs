//! Plain-text checkpoints.
//!
//! ```text
//! adagan-checkpoint-v1
//! config-begin
//! <resolved key = value lines>
//! config-end
//! iteration <n>
//! generator
//! smallnet-v1 ...
//! discriminator
//! smallnet-v1 ...
//! opt-v1 generator      (kind, learning_rate, step_count, first, second)
//! opt-v1 discriminator
//! sched-v1              (r_g, r_d, prev_l_g, prev_l_d, first_iteration, u_g, u_d, fixed_position)
//! rng-v1                (one `stream <role> <seed> <id> <word_pos>` line per stream)
//! end
//! ```

use std::path::Path;

use super::{Trainer, EVAL_STREAM, LATENT_STREAM, REAL_STREAM};
use crate::config::RunConfig;
use crate::data::RngStream;
use crate::nn::{OptimizerKind, OptimizerState, ParamSet};
use crate::sched::{Scheduler, SchedulerState};
use crate::textfmt::{fmt_f64, parse_f64, parse_uint, LineReader};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "adagan-checkpoint-v1";

fn write_opt(out: &mut String, role: &str, opt: &OptimizerState) {
    out.push_str(&format!("opt-v1 {role}\n"));
    match opt.kind {
        OptimizerKind::RmsProp { decay, eps } => {
            out.push_str(&format!(
                "kind rmsprop {} {}\n",
                fmt_f64(decay),
                fmt_f64(eps)
            ));
        }
        OptimizerKind::Adam { beta1, beta2, eps } => {
            out.push_str(&format!(
                "kind adam {} {} {}\n",
                fmt_f64(beta1),
                fmt_f64(beta2),
                fmt_f64(eps)
            ));
        }
    }
    out.push_str(&format!("learning_rate {}\n", fmt_f64(opt.learning_rate)));
    out.push_str(&format!("step_count {}\n", opt.step_count));
    out.push_str("first\n");
    opt.first_moment.write_text(out);
    out.push_str("second\n");
    opt.second_moment.write_text(out);
}

fn read_opt(r: &mut LineReader<'_>, role: &str) -> Result<OptimizerState> {
    r.expect_exact(&format!("opt-v1 {role}"))?;
    let (n, vals) = r.expect_key("kind")?;
    let kind = match vals.as_slice() {
        ["rmsprop", decay, eps] => OptimizerKind::RmsProp {
            decay: parse_f64(decay, n)?,
            eps: parse_f64(eps, n)?,
        },
        ["adam", b1, b2, eps] => OptimizerKind::Adam {
            beta1: parse_f64(b1, n)?,
            beta2: parse_f64(b2, n)?,
            eps: parse_f64(eps, n)?,
        },
        _ => return Err(Error::format(n, "unknown optimizer kind")),
    };
    let learning_rate = r.expect_f64("learning_rate")?;
    let step_count = r.expect_uint("step_count")?;
    r.expect_exact("first")?;
    let first_moment = ParamSet::read_text(r)?;
    r.expect_exact("second")?;
    let second_moment = ParamSet::read_text(r)?;
    Ok(OptimizerState {
        kind,
        learning_rate,
        step_count,
        first_moment,
        second_moment,
    })
}

fn write_rng(out: &mut String, role: &str, rng: &RngStream) {
    out.push_str(&format!(
        "stream {role} {} {} {}\n",
        rng.seed(),
        rng.stream_id(),
        rng.word_pos()
    ));
}

fn read_rng(r: &mut LineReader<'_>, role: &str, expected_id: u64) -> Result<RngStream> {
    let (n, vals) = r.expect_key("stream")?;
    let [found, seed, id, pos] = vals.as_slice() else {
        return Err(Error::format(
            n,
            "stream line needs `<role> <seed> <id> <word_pos>`",
        ));
    };
    if *found != role {
        return Err(Error::format(
            n,
            format!("expected stream `{role}`, found `{found}`"),
        ));
    }
    let id: u64 = parse_uint(id, n)?;
    if id != expected_id {
        return Err(Error::format(
            n,
            format!("stream `{role}` must have id {expected_id}, found {id}"),
        ));
    }
    Ok(RngStream::restore(
        parse_uint(seed, n)?,
        id,
        parse_uint(pos, n)?,
    ))
}

fn parse_bool(token: &str, line: usize) -> Result<bool> {
    match token {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(Error::format(
            line,
            format!("expected a boolean, found `{token}`"),
        )),
    }
}

impl Trainer {
    /// Serialises the full run state. `name` is recorded in the embedded config.
    pub fn to_checkpoint(&self, run: &RunConfig) -> String {
        let mut run = run.clone();
        run.train = self.config.clone();
        let mut out = format!("{CHECKPOINT_MAGIC}\nconfig-begin\n");
        out.push_str(&run.to_text());
        out.push_str("config-end\n");
        out.push_str(&format!("iteration {}\n", self.iter));
        out.push_str("generator\n");
        self.generator.write_text(&mut out);
        out.push_str("discriminator\n");
        self.discriminator.write_text(&mut out);
        write_opt(&mut out, "generator", &self.gen_opt);
        write_opt(&mut out, "discriminator", &self.disc_opt);

        let s = self.scheduler.state();
        out.push_str("sched-v1\n");
        out.push_str(&format!("r_g {}\n", fmt_f64(s.r_g)));
        out.push_str(&format!("r_d {}\n", fmt_f64(s.r_d)));
        out.push_str(&format!("prev_l_g {}\n", fmt_f64(s.prev_l_g)));
        out.push_str(&format!("prev_l_d {}\n", fmt_f64(s.prev_l_d)));
        out.push_str(&format!(
            "first_iteration {}\n",
            u8::from(s.first_iteration)
        ));
        out.push_str(&format!("u_g {}\n", s.u_g));
        out.push_str(&format!("u_d {}\n", s.u_d));
        match self.scheduler.fixed_position() {
            Some(p) => out.push_str(&format!("fixed_position {p}\n")),
            None => out.push_str("fixed_position none\n"),
        }

        out.push_str("rng-v1\n");
        write_rng(&mut out, "real", &self.real_rng);
        write_rng(&mut out, "latent", &self.latent_rng);
        write_rng(&mut out, "eval", &self.eval_rng);
        out.push_str("end\n");
        out
    }

    /// Restores a run written by [`Trainer::to_checkpoint`].
    pub fn from_checkpoint(text: &str) -> Result<(Trainer, RunConfig)> {
        let mut r = LineReader::new(text);
        match r.next_line() {
            Ok((_, line)) if line == CHECKPOINT_MAGIC => {}
            Ok((n, line)) => {
                return Err(Error::format(
                    n,
                    format!("not a checkpoint: expected `{CHECKPOINT_MAGIC}`, found `{line}`"),
                ))
            }
            Err(_) => return Err(Error::format(1, "empty checkpoint")),
        }
        let begin = r.expect_exact("config-begin")?;
        let mut config_lines = Vec::new();
        loop {
            let (_, line) = r.next_line()?;
            if line == "config-end" {
                break;
            }
            config_lines.push(line);
        }
        let run = RunConfig::parse(&config_lines.join("\n"))
            .map_err(|e| Error::format(begin, e.to_string()))?;
        let config = run.train.clone();

        let iter = r.expect_uint::<usize>("iteration")?;
        let mut params = |role: &str, spec: &crate::nn::MlpSpec| -> Result<ParamSet> {
            let n = r.expect_exact(role)?;
            let p = ParamSet::read_text(&mut r)?;
            if !p.matches_spec(spec) {
                return Err(Error::format(
                    n,
                    format!("{role} parameters do not match the configured layers"),
                ));
            }
            Ok(p)
        };
        let generator = params("generator", &config.gen_spec)?;
        let discriminator = params("discriminator", &config.disc_spec)?;

        let gen_opt = read_opt(&mut r, "generator")?;
        let disc_opt = read_opt(&mut r, "discriminator")?;
        for (opt, p) in [(&gen_opt, &generator), (&disc_opt, &discriminator)] {
            if !opt.second_moment.same_shape(p) || !opt.first_moment.same_shape(p) {
                return Err(Error::format(
                    0,
                    "optimizer accumulators do not match parameters",
                ));
            }
            if opt.kind != config.optimizer {
                return Err(Error::format(
                    0,
                    "optimizer section disagrees with embedded config",
                ));
            }
        }

        r.expect_exact("sched-v1")?;
        let r_g = r.expect_f64("r_g")?;
        let r_d = r.expect_f64("r_d")?;
        let prev_l_g = r.expect_f64("prev_l_g")?;
        let prev_l_d = r.expect_f64("prev_l_d")?;
        let (n, vals) = r.expect_key("first_iteration")?;
        let first_iteration = parse_bool(vals.first().copied().unwrap_or(""), n)?;
        let u_g = r.expect_uint("u_g")?;
        let u_d = r.expect_uint("u_d")?;
        let (n, vals) = r.expect_key("fixed_position")?;
        let fixed_position = match vals.as_slice() {
            ["none"] => None,
            [p] => Some(parse_uint::<u32>(p, n)?),
            _ => return Err(Error::format(n, "fixed_position takes one value")),
        };
        if u_g + u_d != iter as u64 {
            return Err(Error::format(
                n,
                format!("update counters {u_g}+{u_d} disagree with iteration {iter}"),
            ));
        }
        let state = SchedulerState {
            r_g,
            r_d,
            prev_l_g,
            prev_l_d,
            first_iteration,
            u_g,
            u_d,
        };
        let scheduler = Scheduler::from_parts(config.strategy, state, fixed_position)
            .map_err(|e| Error::format(n, e.to_string()))?;

        r.expect_exact("rng-v1")?;
        let real_rng = read_rng(&mut r, "real", REAL_STREAM)?;
        let latent_rng = read_rng(&mut r, "latent", LATENT_STREAM)?;
        let eval_rng = read_rng(&mut r, "eval", EVAL_STREAM)?;
        r.expect_exact("end")?;
        if let Some((n, line)) = r.peek() {
            return Err(Error::format(n, format!("trailing content `{line}`")));
        }

        let trainer = Trainer {
            config,
            generator,
            discriminator,
            gen_opt,
            disc_opt,
            scheduler,
            real_rng,
            latent_rng,
            eval_rng,
            iter,
        };
        Ok((trainer, run))
    }

    pub fn save_checkpoint(&self, run: &RunConfig, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_checkpoint(run))?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<(Trainer, RunConfig)> {
        Self::from_checkpoint(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sched::Strategy;
    use crate::train::NetShapes;

    fn run_config(strategy: Strategy) -> RunConfig {
        RunConfig {
            train: crate::train::TrainConfig {
                strategy,
                batch_m: 8,
                total_iters: 40,
                eval_interval: 7,
                n_eval: 32,
                n_proj: 5,
                optimizer: OptimizerKind::adam(),
                ..Default::default()
            }
            .with_networks(&NetShapes {
                latent_dim: 2,
                gen_hidden: vec![6],
                disc_hidden: vec![5],
                ..NetShapes::default()
            })
            .unwrap(),
            ..RunConfig::default()
        }
    }

    #[test]
    fn round_trip_is_exact() {
        for strategy in [
            Strategy::adaptive(1.5).unwrap(),
            Strategy::fixed(3, 2).unwrap(),
        ] {
            let run = run_config(strategy);
            let mut t = Trainer::new(run.train.clone()).unwrap();
            for _ in 0..13 {
                t.step().unwrap();
            }
            let text = t.to_checkpoint(&run);
            let (back, run_back) = Trainer::from_checkpoint(&text).unwrap();
            assert_eq!(back, t);
            assert_eq!(run_back, run);
            assert_eq!(back.to_checkpoint(&run_back), text);
        }
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        let run = run_config(Strategy::adaptive(1.0).unwrap());
        let t = Trainer::new(run.train.clone()).unwrap();
        let text = t.to_checkpoint(&run);

        let wrong = text.replacen(CHECKPOINT_MAGIC, "adagan-checkpoint-v0", 1);
        let err = Trainer::from_checkpoint(&wrong).unwrap_err().to_string();
        assert!(err.contains("not a checkpoint"), "{err}");

        let cut: String = text
            .lines()
            .take(text.lines().count() - 3)
            .collect::<Vec<_>>()
            .join("\n");
        let err = Trainer::from_checkpoint(&cut).unwrap_err().to_string();
        assert!(err.contains("end of file"), "{err}");

        assert!(Trainer::from_checkpoint("").is_err());
    }
}
