//! Monte Carlo fading oracle.
//!
//! Pair `i` of a run is a pure function of `(master_seed, i)`: a ChaCha8
//! stream keyed by the master seed is positioned at word `4 i` and yields
//! the two uniforms of that pair. Sums are accumulated over fixed chunks of
//! 4096 indices and the chunk partials are combined in index order, so a
//! result does not depend on how many worker threads ran it.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, FadingPair, GainDistribution, Result};

const CHUNK: usize = 4096;
// Two u64 draws per pair, two 32-bit words each.
const WORDS_PER_PAIR: u128 = 4;

/// Number of Monte Carlo pairs and the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SampleConfig {
    pub n_samples: usize,
    pub seed: u64,
}

impl SampleConfig {
    pub fn new(n_samples: usize, seed: u64) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::Config(
                "at least one Monte Carlo sample is required".into(),
            ));
        }
        Ok(Self { n_samples, seed })
    }
}

fn unit_open_closed(x: u64) -> f64 {
    // 53 random bits mapped to (0, 1].
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn stream(seed: u64, start: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(start as u128 * WORDS_PER_PAIR);
    rng
}

fn next_pair(rng: &mut ChaCha8Rng) -> FadingPair {
    let s1 = -unit_open_closed(rng.next_u64()).ln();
    let s2 = -unit_open_closed(rng.next_u64()).ln();
    FadingPair { s1, s2 }
}

/// Pair number `index` of the stream keyed by `seed`.
pub fn sample_pair(seed: u64, index: usize) -> FadingPair {
    next_pair(&mut stream(seed, index))
}

/// All pairs of a run, in index order.
pub fn sample_pairs(sc: &SampleConfig) -> Vec<FadingPair> {
    let chunks: Vec<Vec<FadingPair>> = (0..sc.n_samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(sc.n_samples);
            let mut rng = stream(sc.seed, start);
            (start..end).map(|_| next_pair(&mut rng)).collect()
        })
        .collect();
    chunks.concat()
}

/// Applies `f` to every pair of the run, in index order.
pub fn map_pairs<T: Send>(
    sc: &SampleConfig,
    f: impl Fn(FadingPair) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let chunks: Vec<Vec<T>> = (0..sc.n_samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(sc.n_samples);
            let mut rng = stream(sc.seed, start);
            (start..end)
                .map(|_| f(next_pair(&mut rng)))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// Jackknife standard error. For a plain mean the leave-one-out
    /// jackknife reduces to `s / sqrt(n)` with the unbiased `s`.
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Monte Carlo mean of `f` over the fading pairs.
pub fn mc_mean(
    sc: &SampleConfig,
    f: impl Fn(FadingPair) -> Result<f64> + Sync,
) -> Result<Estimate> {
    let partials: Vec<(f64, f64)> = (0..sc.n_samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(sc.n_samples);
            let mut rng = stream(sc.seed, start);
            let mut sum = 0.0;
            let mut sq = 0.0;
            for _ in start..end {
                let v = f(next_pair(&mut rng))?;
                sum += v;
                sq += v * v;
            }
            Ok((sum, sq))
        })
        .collect::<Result<_>>()?;
    let n = sc.n_samples as f64;
    let (sum, sq) = partials
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let mean = sum / n;
    let stderr = if sc.n_samples > 1 {
        ((sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(Estimate {
        mean,
        stderr,
        n_samples: sc.n_samples,
        seed: sc.seed,
    })
}

/// Sorted sample of an equivalent gain.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

/// Kolmogorov-Smirnov distance between an empirical and a model cdf.
///
/// The model is evaluated exactly at every `stride`-th order statistic;
/// between those points its monotonicity bounds the gap, so `upper` is a
/// rigorous upper bound on the distance and `lower` a rigorous lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsDistance {
    pub lower: f64,
    pub upper: f64,
    pub model_evaluations: usize,
}

impl EmpiricalCdf {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("empty sample".into()));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::Config("sample contains NaN".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of the sample at or below `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// KS distance to `model`, evaluating the model cdf at every order
    /// statistic.
    pub fn ks_distance(&self, model: &dyn GainDistribution) -> Result<f64> {
        Ok(self.ks_distance_strided(model, 1)?.upper)
    }

    /// KS distance with the model evaluated at every `stride`-th order
    /// statistic (and the largest one).
    pub fn ks_distance_strided(
        &self,
        model: &dyn GainDistribution,
        stride: usize,
    ) -> Result<KsDistance> {
        let n = self.sorted.len();
        let stride = stride.max(1);
        let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
        if *idx.last().unwrap() != n - 1 {
            idx.push(n - 1);
        }
        let fv: Vec<f64> = idx
            .par_iter()
            .map(|&i| model.cdf(self.sorted[i]))
            .collect::<Result<_>>()?;
        let nf = n as f64;
        // Empirical cdf just below and at sample i, accounting for ties.
        let below = |i: usize| self.sorted.partition_point(|&v| v < self.sorted[i]) as f64 / nf;
        let at = |i: usize| self.sorted.partition_point(|&v| v <= self.sorted[i]) as f64 / nf;

        let mut lower = 0.0f64;
        for (k, &i) in idx.iter().enumerate() {
            lower = lower
                .max((at(i) - fv[k]).abs())
                .max((fv[k] - below(i)).abs());
        }
        let mut upper = lower;
        // Before the first evaluated point the model lies in [0, F(x_0)].
        upper = upper.max(fv[0]);
        for k in 0..idx.len() - 1 {
            let (i, j) = (idx[k], idx[k + 1]);
            if j > i + 1 {
                // Samples strictly between: empirical cdf ranges over
                // [at(i), below(j)], model over [F(x_i), F(x_j)].
                upper = upper.max(below(j) - fv[k]).max(fv[k + 1] - at(i));
            }
        }
        Ok(KsDistance {
            lower,
            upper,
            model_evaluations: idx.len(),
        })
    }
}

/// Empirical law of `gain` over the fading pairs.
pub fn empirical_distribution(
    sc: &SampleConfig,
    gain: impl Fn(FadingPair) -> Result<f64> + Sync,
) -> Result<EmpiricalCdf> {
    EmpiricalCdf::from_samples(map_pairs(sc, gain)?)
}

/// KS critical value at 95% for `n` samples.
pub fn ks_critical_95(n: usize) -> f64 {
    1.36 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::{JointUpperBound, Rayleigh};

    #[test]
    fn pairs_are_deterministic_and_indexable() {
        let sc = SampleConfig::new(10_000, 42).unwrap();
        let all = sample_pairs(&sc);
        assert_eq!(all[0], sample_pair(42, 0));
        assert_eq!(all[4097], sample_pair(42, 4097));
        assert_eq!(all, sample_pairs(&sc));
        assert_ne!(sample_pair(43, 0), all[0]);
    }

    #[test]
    fn marginals_are_unit_exponential() {
        let n = 100_000;
        let sc = SampleConfig::new(n, 7).unwrap();
        let m = mc_mean(&sc, |p| Ok(p.s1)).unwrap();
        assert!((m.mean - 1.0).abs() < 3.0 / (n as f64).sqrt());
        let e = empirical_distribution(&sc, |p| Ok(p.s1)).unwrap();
        assert!(e.ks_distance(&Rayleigh).unwrap() < ks_critical_95(n));
        let sum = empirical_distribution(&sc, |p| Ok(p.sum())).unwrap();
        assert!(sum.ks_distance(&JointUpperBound).unwrap() < 0.01);
    }

    #[test]
    fn strided_ks_brackets_exact() {
        let sc = SampleConfig::new(20_000, 3).unwrap();
        let e = empirical_distribution(&sc, |p| Ok(p.s2)).unwrap();
        let exact = e.ks_distance(&Rayleigh).unwrap();
        let b = e.ks_distance_strided(&Rayleigh, 50).unwrap();
        assert!(b.lower <= exact + 1e-15 && exact <= b.upper + 1e-15);
        assert!(b.upper - exact < 50.0 / 20_000.0 + 1e-3);
    }

    #[test]
    fn constant_map_is_a_step() {
        let sc = SampleConfig::new(100, 1).unwrap();
        let e = empirical_distribution(&sc, |_| Ok(2.0)).unwrap();
        assert_eq!(e.cdf(1.999), 0.0);
        assert_eq!(e.cdf(2.0), 1.0);
    }

    #[test]
    fn zero_map_has_zero_mean() {
        let sc = SampleConfig::new(1000, 1).unwrap();
        let m = mc_mean(&sc, |_| Ok(0.0)).unwrap();
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.stderr, 0.0);
    }

    #[test]
    fn stderr_scales_as_inverse_root_n() {
        let se = |n| {
            mc_mean(&SampleConfig::new(n, 11).unwrap(), |p| Ok(p.s1))
                .unwrap()
                .stderr
        };
        let (a, b, c) = (se(1_000), se(10_000), se(100_000));
        let r1 = a / b / 10f64.sqrt();
        let r2 = b / c / 10f64.sqrt();
        assert!(
            (r1 - 1.0).abs() < 0.2 && (r2 - 1.0).abs() < 0.2,
            "{r1} {r2}"
        );
    }

    #[test]
    fn thread_count_does_not_matter() {
        let sc = SampleConfig::new(30_000, 9).unwrap();
        let f = |p: FadingPair| Ok((p.s1 * p.s2).sqrt());
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let three = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let a = one.install(|| mc_mean(&sc, f)).unwrap();
        let b = three.install(|| mc_mean(&sc, f)).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }
}
