//! Seeded Monte Carlo estimates for instances too large to enumerate.
//!
//! Draws are generated in fixed-size chunks. Chunk `i` reads ChaCha8 stream
//! `i` under the run's seed, and chunks are concatenated in index order, so
//! the sample (and every estimate built from it) is bit-identical for any
//! number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{main_theorem_params, subgamma_tail_eps, ConstantsConfig, SubGammaParams};
use crate::error::{Error, Result};
use crate::math::{g_func, Distribution};
use crate::special::pairwise_sum;

/// Draws per RNG stream.
pub const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

impl McEstimate {
    /// |estimate - target| in standard errors. Differences at rounding level
    /// count as zero, so degenerate samples (se = 0) still compare cleanly.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.estimate - target).abs();
        if d <= 1e-12 * target.abs().max(1.0) {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// How many draws, from which seed, on how many threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McRun {
    pub samples: u64,
    pub seed: u64,
    /// `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl McRun {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            threads: None,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

/// Z for one count vector; same summation order as the exact enumeration,
/// so a sampled outcome reproduces its atom's z to the bit.
fn z_of_counts(counts: &[u64], expected: &[f64]) -> f64 {
    let s = counts.iter().zip(expected).fold(0.0, |acc, (&x, &e)| {
        if x == 0 {
            acc
        } else {
            let xf = x as f64;
            acc + xf * (xf / e).ln()
        }
    });
    (2.0 * s).max(0.0)
}

/// One multinomial draw by sequential conditional binomials.
pub(crate) fn draw_counts(rng: &mut ChaCha8Rng, n: u64, probs: &[f64], out: &mut [u64]) {
    let k = probs.len();
    let mut left = n;
    let mut mass = 1.0;
    for i in 0..k - 1 {
        if left == 0 || mass <= 0.0 {
            out[i] = 0;
            continue;
        }
        let q = (probs[i] / mass).clamp(0.0, 1.0);
        let x = if q >= 1.0 {
            left
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        out[i] = x;
        left -= x;
        mass -= probs[i];
    }
    out[k - 1] = left;
}

fn sample_chunk(n: u64, p: &Distribution, seed: u64, chunk: u64, len: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let probs = p.probs();
    let nf = n as f64;
    let expected: Vec<f64> = probs.iter().map(|&pi| nf * pi).collect();
    let mut counts = vec![0u64; probs.len()];
    (0..len)
        .map(|_| {
            draw_counts(&mut rng, n, probs, &mut counts);
            z_of_counts(&counts, &expected)
        })
        .collect()
}

fn run_in_pool<R: Send>(threads: Option<usize>, job: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(job()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::domain(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// `run.samples` independent draws of Z, in stream order.
pub fn sample_z(n: u64, p: &Distribution, run: &McRun) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("sampling needs n >= 1"));
    }
    if run.samples == 0 {
        return Err(Error::domain("sampling needs at least one draw"));
    }
    let chunks = run.samples.div_ceil(CHUNK);
    let seed = run.seed;
    let total = run.samples;
    run_in_pool(run.threads, || {
        let parts: Vec<Vec<f64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let len = CHUNK.min(total - c * CHUNK);
                sample_chunk(n, p, seed, c, len)
            })
            .collect();
        parts.concat()
    })
}

/// Mean and standard error of the mean, with the (m - 1) variance.
fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = pairwise_sum(values) / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&sq) / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn proportion(hits: u64, run: &McRun) -> McEstimate {
    let m = run.samples as f64;
    let ph = hits as f64 / m;
    McEstimate {
        estimate: ph,
        std_error: (ph * (1.0 - ph) / m).sqrt(),
        samples: run.samples,
        seed: run.seed,
    }
}

/// Fraction of draws with Z ≥ t.
pub fn mc_tail(n: u64, p: &Distribution, t: f64, run: &McRun) -> Result<McEstimate> {
    if t <= 0.0 {
        if run.samples == 0 {
            return Err(Error::domain("sampling needs at least one draw"));
        }
        return Ok(proportion(run.samples, run));
    }
    let z = sample_z(n, p, run)?;
    Ok(proportion(z.iter().filter(|&&v| v >= t).count() as u64, run))
}

/// Sample mean of Z^q, or of (Z - 2g)^q when `centered` (exact mean, not the
/// sample mean).
pub fn mc_moment(n: u64, p: &Distribution, q: u32, centered: bool, run: &McRun) -> Result<McEstimate> {
    if centered && run.samples < 2 {
        return Err(Error::domain("centered moments need at least two draws"));
    }
    let shift = if centered { 2.0 * g_func(n, p) } else { 0.0 };
    let y: Vec<f64> = sample_z(n, p, run)?
        .into_iter()
        .map(|z| (z - shift).powi(q as i32))
        .collect();
    let (estimate, std_error) = mean_and_se(&y);
    Ok(McEstimate {
        estimate,
        std_error,
        samples: run.samples,
        seed: run.seed,
    })
}

/// ln of the sample mean of exp(t(Z - 2g)). The standard error is the delta
/// method one, sd(Y)/(√m·Ȳ); the estimator is biased low by O(1/m).
pub fn mc_log_mgf(n: u64, p: &Distribution, t: f64, run: &McRun) -> Result<McEstimate> {
    if run.samples < 100 {
        return Err(Error::domain("log-MGF estimates need at least 100 draws"));
    }
    if !t.is_finite() {
        return Err(Error::domain("t must be finite"));
    }
    if t == 0.0 {
        return Ok(McEstimate {
            estimate: 0.0,
            std_error: 0.0,
            samples: run.samples,
            seed: run.seed,
        });
    }
    let shift = 2.0 * g_func(n, p);
    let w: Vec<f64> = sample_z(n, p, run)?.into_iter().map(|z| t * (z - shift)).collect();
    let top = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let y: Vec<f64> = w.iter().map(|&x| (x - top).exp()).collect();
    let (mean, se) = mean_and_se(&y);
    let estimate = top + mean.ln();
    if !estimate.is_finite() {
        return Err(Error::Overflow(format!("empirical MGF at t = {t}")));
    }
    Ok(McEstimate {
        estimate,
        std_error: se / mean,
        samples: run.samples,
        seed: run.seed,
    })
}

/// Frequency of |Z - 2g| ≤ ε with ε = subgamma_tail_eps(params, δ).
pub fn mc_coverage(n: u64, p: &Distribution, delta: f64, params: &SubGammaParams, run: &McRun) -> Result<McEstimate> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain("delta must lie in (0, 1)"));
    }
    let eps = subgamma_tail_eps(params, delta)?;
    let mean = 2.0 * g_func(n, p);
    let z = sample_z(n, p, run)?;
    Ok(proportion(
        z.iter().filter(|&&v| (v - mean).abs() <= eps).count() as u64,
        run,
    ))
}

/// Sub-Gamma parameters implied by the main theorem: ψ ≤ v t² on |t| ≤ 1/c
/// is dominated by Γ(2v, c).
pub fn main_coverage_params(k: usize, alpha: f64, cfg: &ConstantsConfig) -> Result<SubGammaParams> {
    let mp = main_theorem_params(k, alpha, cfg)?;
    SubGammaParams::new(2.0 * mp.v, mp.c)
}

/// The |t| range on which the main theorem's envelope is claimed.
pub fn mgf_regime_limit(cfg: &ConstantsConfig) -> f64 {
    1.0 / (2.0 * cfg.c_main)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn half() -> Distribution {
        Distribution::new(vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn tail_example() {
        let est = mc_tail(2, &half(), 1.0, &McRun::new(100_000, 42)).unwrap();
        assert!((est.estimate - 0.5).abs() < 4.0 * (0.25f64 / 1e5).sqrt());
        assert_eq!(est.samples, 100_000);
        assert_eq!(est.seed, 42);
        let one = mc_tail(2, &half(), 0.0, &McRun::new(10, 1)).unwrap();
        assert_eq!(one.estimate, 1.0);
        assert_eq!(one.std_error, 0.0);
    }

    #[test]
    fn draws_are_reproducible_across_thread_counts() {
        let p = Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let run = McRun::new(3 * CHUNK + 17, 7);
        let a = sample_z(30, &p, &run.with_threads(1)).unwrap();
        let b = sample_z(30, &p, &run.with_threads(4)).unwrap();
        let c = sample_z(30, &p, &run).unwrap();
        assert_eq!(a.len() as u64, run.samples);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.iter().zip(&c).all(|(x, y)| x.to_bits() == y.to_bits()));
        let d = sample_z(30, &p, &McRun::new(run.samples, 8)).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn marginal_counts_match_n_p() {
        let probs = [0.05, 0.15, 0.3, 0.5];
        let (n, m) = (37u64, 50_000u64);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts = [0u64; 4];
        let mut totals = [0u64; 4];
        for _ in 0..m {
            draw_counts(&mut rng, n, &probs, &mut counts);
            assert_eq!(counts.iter().sum::<u64>(), n);
            for (t, c) in totals.iter_mut().zip(&counts) {
                *t += c;
            }
        }
        // Σ of m draws of X_i ~ Bin(n, p_i) is Bin(mn, p_i).
        for (&t, &pi) in totals.iter().zip(&probs) {
            let trials = (m * n) as f64;
            let sd = (trials * pi * (1.0 - pi)).sqrt();
            assert!((t as f64 - trials * pi).abs() <= 5.0 * sd, "{t} vs {}", trials * pi);
        }
    }

    #[test]
    fn moment_examples() {
        let run = McRun::new(100_000, 3);
        let c1 = mc_moment(2, &half(), 1, true, &run).unwrap();
        assert!(c1.z_score(0.0) < 4.0);
        let r1 = mc_moment(2, &half(), 1, false, &run).unwrap();
        assert!(r1.z_score(2.0 * LN_2) < 4.0);
        let c2 = mc_moment(2, &half(), 2, true, &run).unwrap();
        assert!(c2.z_score((2.0 * LN_2).powi(2)) < 4.0);
        assert!(mc_moment(2, &half(), 2, true, &McRun::new(1, 3)).is_err());
    }

    #[test]
    fn log_mgf_examples() {
        let run = McRun::new(100_000, 11);
        assert_eq!(mc_log_mgf(2, &half(), 0.0, &run).unwrap().estimate, 0.0);
        let target = (0.5 * LN_2).cosh().ln();
        let up = mc_log_mgf(2, &half(), 0.25, &run).unwrap();
        assert!(up.z_score(target) < 4.0, "{up:?} vs {target}");
        let down = mc_log_mgf(2, &half(), -0.25, &run).unwrap();
        assert!(down.z_score(target) < 4.0);
        assert!(mc_log_mgf(2, &half(), 0.25, &McRun::new(99, 1)).is_err());
    }

    #[test]
    fn coverage_examples() {
        let run = McRun::new(20_000, 5);
        let cfg = ConstantsConfig::default();
        let p = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let params = main_coverage_params(3, 0.2, &cfg).unwrap();
        assert_eq!(mc_coverage(10, &p, 0.1, &params, &run).unwrap().estimate, 1.0);
        let zero = SubGammaParams::new(0.0, 0.0).unwrap();
        assert_eq!(mc_coverage(2, &half(), 0.1, &zero, &run).unwrap().estimate, 0.0);
        // ε = 2 covers the whole n = 2 support: |Z - 2 ln 2| = 2 ln 2 < 2.
        let wide = SubGammaParams::new(0.0, 2.0 / (20f64).ln()).unwrap();
        assert_eq!(mc_coverage(2, &half(), 0.1, &wide, &run).unwrap().estimate, 1.0);
    }
}
