//! Trust-weighted fusion of per-source Normal forecasts and seeded sampling
//! of the empirical scenario set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::types::{FusedDistribution, ScenarioSet, SourceForecast, TrustMatrix};

/// Seed for a reproducible sample stream. Identical seeds produce identical
/// streams; derived seeds give statistically independent streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngSeed {
    /// Derives a new seed for the sub-stream identified by `tag` and `index`.
    pub fn derive(self, tag: u64, index: u64) -> RngSeed {
        let a = splitmix64(self.0 ^ splitmix64(tag));
        RngSeed(splitmix64(a ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93)))
    }

    pub(crate) fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("expected {expected} forecasts, got {got}")]
    SourceCount { expected: usize, got: usize },
    #[error("forecast for source {source_id} covers {got} regions, expected {expected}")]
    RegionCount {
        source_id: usize,
        expected: usize,
        got: usize,
    },
}

/// Fuses the source marginals under the given trust weights: the fused mean
/// is the trust-weighted mean and the fused variance the trust-squared
/// weighted variance, per region.
pub fn fuse_marginals(
    forecasts: &[SourceForecast],
    trust: &TrustMatrix,
) -> Result<FusedDistribution, FusionError> {
    let h = trust.num_sources();
    let k = trust.num_regions();
    if forecasts.len() != h {
        return Err(FusionError::SourceCount {
            expected: h,
            got: forecasts.len(),
        });
    }
    for f in forecasts {
        if f.means.len() != k || f.stds.len() != k {
            return Err(FusionError::RegionCount {
                source_id: f.source_id,
                expected: k,
                got: f.means.len(),
            });
        }
    }
    let mut means = vec![0.0; k];
    let mut vars = vec![0.0; k];
    for (hi, f) in forecasts.iter().enumerate() {
        for region in 0..k {
            let t = trust.get(hi, region);
            means[region] += t * f.means[region];
            vars[region] += t * t * f.stds[region] * f.stds[region];
        }
    }
    Ok(FusedDistribution {
        means,
        stds: vars.into_iter().map(f64::sqrt).collect(),
    })
}

/// Standard-normal sampler using Marsaglia's polar method over a seeded
/// ChaCha stream. The stream depends only on the seed, so two calls with the
/// same seed see the same underlying normals regardless of the distribution
/// parameters they are scaled by.
struct NormalSampler {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalSampler {
    fn new(seed: RngSeed) -> NormalSampler {
        NormalSampler {
            rng: seed.rng(),
            spare: None,
        }
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u: f64 = self.rng.gen_range(-1.0..1.0);
            let v: f64 = self.rng.gen_range(-1.0..1.0);
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }
}

/// Draws `n` i.i.d. scenarios from the fused Normal, one row per scenario,
/// clipping each region into `[0, support_upper]`. Deterministic given `seed`.
pub fn sample_empirical(
    dist: &FusedDistribution,
    n: usize,
    support_upper: &[f64],
    seed: RngSeed,
) -> ScenarioSet {
    let k = dist.means.len();
    debug_assert_eq!(support_upper.len(), k);
    let mut sampler = NormalSampler::new(seed);
    let mut samples = Vec::with_capacity(n * k);
    for _ in 0..n {
        for region in 0..k {
            let z = sampler.next();
            let x = dist.means[region] + dist.stds[region] * z;
            samples.push(x.clamp(0.0, support_upper[region]));
        }
    }
    ScenarioSet::new(n, k, samples)
}
