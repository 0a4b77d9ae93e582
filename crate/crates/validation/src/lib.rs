//! Statistical yardsticks for the acceptance suite.

use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

/// Central `level` band for the number of rejections among `m` replicates of
/// a test with exact size `alpha`, from the binomial quantiles.
pub fn binomial_band(alpha: f64, m: usize, level: f64) -> (u64, u64) {
    let law = Binomial::new(alpha, m as u64).expect("alpha in [0, 1]");
    let tail = (1.0 - level) / 2.0;
    (law.inverse_cdf(tail), law.inverse_cdf(1.0 - tail))
}

/// Kolmogorov–Smirnov distance between the empirical law of `p` and
/// Uniform(0, 1).
pub fn ks_uniform_distance(mut p: Vec<f64>) -> f64 {
    p.sort_by(f64::total_cmp);
    let m = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &u)| ((i + 1) as f64 / m - u).max(u - i as f64 / m))
        .fold(0.0, f64::max)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// The `u` quantile of the two-moment approximation `g χ²_h` to `Σ w_k Z_k²`
/// (same mean and variance).
pub fn satterthwaite_quantile(weights: &[f64], u: f64) -> f64 {
    let s1: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    let (g, h) = (s2 / s1, s1 * s1 / s2);
    g * ChiSquared::new(h).expect("positive weights").inverse_cdf(u)
}
