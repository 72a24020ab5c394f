use rand::Rng;

use crate::rng::fork;
use crate::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 100_000;

/// Two-sided paired randomization test on per-query metric pairs `(a, b)`.
///
/// Each iteration flips the sign of every difference with probability ½;
/// the p-value is the share of iterations whose absolute mean difference is
/// at least the observed one.
pub fn fisher_randomization_test(pairs: &[(f64, f64)], iterations: usize, seed: u64) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument("randomization test needs at least 2 pairs".into()));
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument("randomization test needs at least 1 iteration".into()));
    }
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("metric pair".into()));
    }
    let n = diffs.len() as f64;
    let observed = (diffs.iter().sum::<f64>() / n).abs();
    // Summation order differs between permutations; absorb the rounding.
    let threshold = observed - 1e-12 * (1.0 + observed);
    let mut rng = fork(seed, "fisher");
    let mut extreme = 0usize;
    for _ in 0..iterations {
        let s: f64 = diffs.iter().map(|&d| if rng.gen::<bool>() { d } else { -d }).sum();
        if (s / n).abs() >= threshold {
            extreme += 1;
        }
    }
    Ok(extreme as f64 / iterations as f64)
}
