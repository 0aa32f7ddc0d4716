//! Small statistics helpers used by the Monte-Carlo experiments.

use alloc::vec::Vec;

use crate::rng::{self, Stream};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (`n - 1` denominator).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

fn ln_choose(n: u64, k: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (lp, lq) = (libm::log(p), libm::log1p(-p));
    (0..=k)
        .map(|i| libm::exp(ln_choose(n, i) + i as f64 * lp + (n - i) as f64 * lq))
        .sum::<f64>()
        .min(1.0)
}

/// One-sided binomial test of `H0: rate >= p0` given `successes` out of `n`.
/// Returns the p-value `P(X <= successes | p0)`.
pub fn binomial_lower_tail(successes: u64, n: u64, p0: f64) -> f64 {
    binomial_cdf(successes, n, p0)
}

/// Paired bootstrap of a statistic difference `stat(a) - stat(b)`.
///
/// Each resample draws indices with replacement and evaluates both statistics on the
/// same indices. Returns the resampled differences, sorted ascending.
pub fn paired_bootstrap(
    a: &[f64],
    b: &[f64],
    stat: fn(&[f64]) -> f64,
    resamples: usize,
    rng: &mut Stream,
) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let n = a.len();
    let mut ra = Vec::with_capacity(n);
    let mut rb = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        ra.clear();
        rb.clear();
        for _ in 0..n {
            let i = rng::index(rng, n);
            ra.push(a[i]);
            rb.push(b[i]);
        }
        out.push(stat(&ra) - stat(&rb));
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Empirical quantile of an ascending sample (nearest-rank).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = libm::floor(q * (sorted.len() - 1) as f64) as usize;
    sorted[idx.min(sorted.len() - 1)]
}
