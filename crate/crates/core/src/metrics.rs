//! Sample-quality metrics between equal-size point sets.

use crate::data::RngStream;
use crate::{Error, Result, Tensor2};

pub const DEFAULT_TRAIN_PROJECTIONS: usize = 100;
pub const ACCEPTANCE_PROJECTIONS: usize = 2000;

/// One metric evaluation during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub iteration: usize,
    pub sliced_w: f64,
    pub n_samples: usize,
    pub n_projections: usize,
}

/// Exact W1 between two equal-size empirical distributions on the line:
/// the mean absolute difference of the sorted samples.
pub fn wasserstein1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::shape(
            "wasserstein1_1d",
            "two equal non-empty samples",
            format!("{} and {}", a.len(), b.len()),
        ));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(sorted_w1(&a, &b))
}

fn sorted_w1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Uniform direction on the unit sphere in `dim` dimensions.
fn random_direction(dim: usize, rng: &mut RngStream) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn project(points: &Tensor2, dir: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = points
        .row_iter()
        .map(|p| p.iter().zip(dir).map(|(x, d)| x * d).sum())
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Mean of 1-D W1 over `n_proj` random projections.
pub fn sliced_wasserstein(
    a: &Tensor2,
    b: &Tensor2,
    n_proj: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if a.shape() != b.shape() || a.rows() == 0 {
        return Err(Error::shape(
            "sliced_wasserstein",
            format!("{}x{}", a.rows(), a.cols()),
            format!("{}x{}", b.rows(), b.cols()),
        ));
    }
    if n_proj == 0 {
        return Err(Error::Config("sliced_wasserstein needs n_proj >= 1".into()));
    }
    let mut total = 0.0;
    for _ in 0..n_proj {
        let dir = random_direction(a.cols(), rng);
        total += sorted_w1(&project(a, &dir), &project(b, &dir));
    }
    Ok(total / n_proj as f64)
}
