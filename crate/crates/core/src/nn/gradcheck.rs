use super::mlp::{backward, forward, Gradients, MlpSpec, ParamSet};
use crate::data::{sample_latent, RngStream};
use crate::{Error, Result, Tensor2};

const GRADCHECK_STREAM: u64 = 0x67c;
const BATCH: usize = 4;
/// Minimum distance of every kinked pre-activation from 0.
const KINK_MARGIN: f64 = 1e-3;
const MAX_RESAMPLES: usize = 10_000;

/// Max relative error between `backward` and central differences of
/// `<output_grad, forward(params)>/m` over every parameter.
pub fn grad_check(spec: &MlpSpec, seed: u64, h: f64) -> Result<f64> {
    grad_check_with(spec, seed, h, |_| {})
}

/// As [`grad_check`], with a hook that may alter the analytic gradients before
/// comparison (negative controls).
pub fn grad_check_with(
    spec: &MlpSpec,
    seed: u64,
    h: f64,
    tamper: impl Fn(&mut Gradients),
) -> Result<f64> {
    spec.validate()?;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!(
            "finite-difference step must be > 0, got {h}"
        )));
    }
    let mut rng = RngStream::new(seed, GRADCHECK_STREAM);
    let (params, batch, output_grad) = sample_away_from_kinks(spec, &mut rng)?;

    let (_, cache) = forward(&params, spec, &batch)?;
    let (mut analytic, _) = backward(&params, spec, &cache, &output_grad)?;
    tamper(&mut analytic);

    let m = batch.rows() as f64;
    let objective = |p: &ParamSet| -> Result<f64> {
        let (out, _) = forward(p, spec, &batch)?;
        Ok(out
            .as_slice()
            .iter()
            .zip(output_grad.as_slice())
            .map(|(o, g)| o * g)
            .sum::<f64>()
            / m)
    };

    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for (t_idx, grad_tensor) in analytic.tensors().enumerate() {
        for k in 0..grad_tensor.len() {
            let original = params.tensors().nth(t_idx).expect("congruent").as_slice()[k];
            let slot = |p: &mut ParamSet, v: f64| {
                p.tensors_mut()
                    .nth(t_idx)
                    .expect("congruent")
                    .as_mut_slice()[k] = v;
            };
            slot(&mut probe, original + h);
            let plus = objective(&probe)?;
            slot(&mut probe, original - h);
            let minus = objective(&probe)?;
            slot(&mut probe, original);

            let numeric = (plus - minus) / (2.0 * h);
            let a = grad_tensor.as_slice()[k];
            let denom = a.abs().max(numeric.abs()).max(1e-12);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

fn sample_away_from_kinks(
    spec: &MlpSpec,
    rng: &mut RngStream,
) -> Result<(ParamSet, Tensor2, Tensor2)> {
    for _ in 0..MAX_RESAMPLES {
        let mut params = ParamSet::init(spec, rng)?;
        for layer in &mut params.layers {
            for b in layer.bias.as_mut_slice() {
                *b = rng.uniform_range(-0.5, 0.5);
            }
        }
        let batch = sample_latent(spec.input_dim(), BATCH, rng);
        let output_grad = sample_latent(spec.output_dim(), BATCH, rng);
        if !spec.hidden.has_kink() {
            return Ok((params, batch, output_grad));
        }
        let (_, cache) = forward(&params, spec, &batch)?;
        let hidden = &cache.pre_activations()[..spec.n_layers() - 1];
        let clear = hidden
            .iter()
            .all(|z| z.as_slice().iter().all(|v| v.abs() > KINK_MARGIN));
        if clear {
            return Ok((params, batch, output_grad));
        }
    }
    Err(Error::Config(
        "could not sample a point away from activation kinks".into(),
    ))
}
