//! Seeded synthetic data: 2-D mixtures for the critic's "real" side and
//! standard-normal latent noise for the generator.
//!
//! Every random draw goes through an [`RngStream`], a ChaCha8 generator keyed
//! by `(seed, stream_id)`. Its position is a plain word counter, which makes
//! streams cheap to checkpoint and restore exactly. Normal variates come from
//! `rand_distr::StandardNormal` (ziggurat over the stream's `u64` output), so
//! sequences are reproducible for a given build of this crate.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result, Tensor2};

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl PartialEq for RngStream {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.stream_id == other.stream_id
            && self.word_pos() == other.word_pos()
    }
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    /// Recreates a stream at a previously saved position.
    pub fn restore(seed: u64, stream_id: u64, word_pos: u128) -> Self {
        let mut s = Self::new(seed, stream_id);
        s.rng.set_word_pos(word_pos);
        s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..=hi)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionSpec {
    /// `k` Gaussians with means evenly spaced on a circle, at angles `2πj/k`.
    Ring {
        k: usize,
        radius: f64,
        sigma: f64,
    },
    /// `side × side` Gaussians on a square lattice centred at the origin.
    Grid {
        side: usize,
        spacing: f64,
        sigma: f64,
    },
    Gaussian {
        mean: [f64; 2],
        sigma: f64,
    },
}

impl Default for DistributionSpec {
    fn default() -> Self {
        DistributionSpec::Ring {
            k: 8,
            radius: 2.0,
            sigma: 0.02,
        }
    }
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match *self {
            DistributionSpec::Ring { k, radius, sigma } => {
                if k == 0 {
                    return bad("ring needs k >= 1".into());
                }
                if !(radius.is_finite() && radius >= 0.0) {
                    return bad(format!("ring radius must be >= 0, got {radius}"));
                }
                check_sigma(sigma, false)
            }
            DistributionSpec::Grid {
                side,
                spacing,
                sigma,
            } => {
                if side == 0 {
                    return bad("grid needs side >= 1".into());
                }
                if !(spacing.is_finite() && spacing > 0.0) {
                    return bad(format!("grid spacing must be > 0, got {spacing}"));
                }
                check_sigma(sigma, false)
            }
            DistributionSpec::Gaussian { mean, sigma } => {
                if !mean.iter().all(|m| m.is_finite()) {
                    return bad("gaussian mean must be finite".into());
                }
                check_sigma(sigma, true)
            }
        }
    }

    /// Mixture component means.
    pub fn means(&self) -> Vec<[f64; 2]> {
        match *self {
            DistributionSpec::Ring { k, radius, .. } => (0..k)
                .map(|j| {
                    let a = 2.0 * PI * j as f64 / k as f64;
                    [radius * a.cos(), radius * a.sin()]
                })
                .collect(),
            DistributionSpec::Grid { side, spacing, .. } => {
                let offset = (side as f64 - 1.0) / 2.0;
                (0..side * side)
                    .map(|idx| {
                        let (i, j) = (idx / side, idx % side);
                        [(i as f64 - offset) * spacing, (j as f64 - offset) * spacing]
                    })
                    .collect()
            }
            DistributionSpec::Gaussian { mean, .. } => vec![mean],
        }
    }

    fn sigma(&self) -> f64 {
        match *self {
            DistributionSpec::Ring { sigma, .. }
            | DistributionSpec::Grid { sigma, .. }
            | DistributionSpec::Gaussian { sigma, .. } => sigma,
        }
    }
}

fn check_sigma(sigma: f64, strictly_positive: bool) -> Result<()> {
    let ok = sigma.is_finite()
        && if strictly_positive {
            sigma > 0.0
        } else {
            sigma >= 0.0
        };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("invalid sigma {sigma}")))
    }
}

/// `n × 2` points: a uniformly chosen component mean plus isotropic noise.
pub fn sample_real(spec: &DistributionSpec, n: usize, rng: &mut RngStream) -> Tensor2 {
    let means = spec.means();
    let sigma = spec.sigma();
    let mut data = Vec::with_capacity(n * 2);
    for _ in 0..n {
        let [mx, my] = means[rng.index(means.len())];
        data.push(mx + sigma * rng.standard_normal());
        data.push(my + sigma * rng.standard_normal());
    }
    Tensor2::from_vec(n, 2, data).expect("length matches by construction")
}

/// `n × dim` i.i.d. standard normal entries.
pub fn sample_latent(dim: usize, n: usize, rng: &mut RngStream) -> Tensor2 {
    let data = (0..n * dim).map(|_| rng.standard_normal()).collect();
    Tensor2::from_vec(n, dim, data).expect("length matches by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_requests() {
        let mut rng = RngStream::new(1, 0);
        assert_eq!(
            sample_real(&DistributionSpec::default(), 0, &mut rng).shape(),
            (0, 2)
        );
        assert_eq!(sample_latent(3, 0, &mut rng).shape(), (0, 3));
    }

    #[test]
    fn degenerate_ring_is_origin() {
        let spec = DistributionSpec::Ring {
            k: 1,
            radius: 0.0,
            sigma: 0.0,
        };
        let x = sample_real(&spec, 5, &mut RngStream::new(3, 1));
        assert!(x.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(x.rows(), 5);
    }

    #[test]
    fn ring_moments() {
        let spec = DistributionSpec::default();
        let x = sample_real(&spec, 10_000, &mut RngStream::new(11, 1));
        let mx = x.column(0).iter().sum::<f64>() / 1e4;
        let my = x.column(1).iter().sum::<f64>() / 1e4;
        let r = x.row_iter().map(|p| p[0].hypot(p[1])).sum::<f64>() / 1e4;
        assert!(mx.abs() < 0.05 && my.abs() < 0.05, "mean ({mx}, {my})");
        assert!((r - 2.0).abs() < 0.05, "radius {r}");
    }

    #[test]
    fn latent_moments() {
        let z = sample_latent(4, 50_000, &mut RngStream::new(5, 2));
        for c in 0..4 {
            let col = z.column(c);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 0.02, "coord {c} mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "coord {c} var {var}");
        }
    }

    #[test]
    fn grid_means_are_centred() {
        let spec = DistributionSpec::Grid {
            side: 3,
            spacing: 1.0,
            sigma: 0.0,
        };
        let means = spec.means();
        assert_eq!(means.len(), 9);
        assert_eq!(means[0], [-1.0, -1.0]);
        assert_eq!(means[4], [0.0, 0.0]);
    }

    #[test]
    fn determinism_and_stream_independence() {
        let spec = DistributionSpec::default();
        let a = sample_real(&spec, 64, &mut RngStream::new(9, 1));
        let b = sample_real(&spec, 64, &mut RngStream::new(9, 1));
        assert_eq!(a, b);

        let mut s1 = RngStream::new(9, 1);
        let mut s2 = RngStream::new(9, 2);
        let untouched = sample_latent(2, 16, &mut RngStream::new(9, 2));
        let _ = sample_latent(2, 1000, &mut s1);
        assert_eq!(sample_latent(2, 16, &mut s2), untouched);
        assert_ne!(
            sample_latent(2, 16, &mut RngStream::new(9, 1)),
            sample_latent(2, 16, &mut RngStream::new(9, 2))
        );
    }

    #[test]
    fn restore_resumes_sequence() {
        let mut s = RngStream::new(42, 7);
        let _ = sample_latent(3, 17, &mut s);
        let mut r = RngStream::restore(42, 7, s.word_pos());
        assert_eq!(r, s);
        assert_eq!(sample_latent(3, 5, &mut s), sample_latent(3, 5, &mut r));
    }

    #[test]
    fn validation() {
        assert!(DistributionSpec::Ring {
            k: 0,
            radius: 1.0,
            sigma: 0.1
        }
        .validate()
        .is_err());
        assert!(DistributionSpec::Gaussian {
            mean: [0.0, 0.0],
            sigma: 0.0
        }
        .validate()
        .is_err());
        assert!(DistributionSpec::Grid {
            side: 2,
            spacing: -1.0,
            sigma: 0.1
        }
        .validate()
        .is_err());
        assert!(DistributionSpec::default().validate().is_ok());
    }
}
