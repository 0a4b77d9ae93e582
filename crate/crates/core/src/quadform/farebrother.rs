//! Ruben's expansion of `P(Q ≤ x)` as a mixture of central χ² CDFs,
//!
//! ```text
//! P(Q ≤ x) = Σ_k a_k · P(χ²_{m+2k} ≤ x/β),
//! ```
//!
//! with `m` the number of weights, `γ_j = 1 − β/w_j`, `a_0 = Π (β/w_j)^{1/2}`,
//! `g_s = ½ Σ_j γ_j^s` and `a_k = k⁻¹ Σ_{r<k} g_{k−r} a_r`. The `a_k` are the
//! power-series coefficients of `A(z) = a_0 Π (1 − γ_j z)^{-1/2}`.
//!
//! The remainder after term `K` is bounded using `F_{j+1} ≤ q F_j` for the
//! χ² CDFs `F_j = P(χ²_{m+2j} ≤ x/β)`, with `q = (x/2β)/(m/2 + K + 1)`, and a
//! Cauchy estimate `|a_j| ≤ M(r) r^{-j}` on a circle of radius
//! `1 < r < 1/max|γ_j|`:
//!
//! ```text
//! Σ_{j>K} |a_j| F_j ≤ F_K M(r) r^{-K} s / (1 − s),   s = min(q, 1) / r.
//! ```

use super::gamma::{gamma_p, ln_gamma};
use super::{check_args, TailMethod, TailResult, WeightSpectrum};
use crate::error::{Error, Result};

/// Series length after which the expansion is abandoned.
pub const MAX_SERIES_TERMS: usize = 10_000;

/// How often (in terms) the truncation bound is re-evaluated.
const CHECK_EVERY: usize = 8;

/// `P(Q > x)` by the mixture series, to absolute accuracy `tol`.
///
/// The mixing scale is `β = 2 w_min w_max / (w_min + w_max)` (harmonic mean
/// of the extreme positive weights). Fails with [`Error::Convergence`] if the
/// truncation bound is still above `tol` after [`MAX_SERIES_TERMS`] terms,
/// which happens for spectra spanning many orders of magnitude.
pub fn upper_tail_farebrother(spectrum: &WeightSpectrum, x: f64, tol: f64) -> Result<TailResult> {
    check_args(x, tol)?;
    let weights = spectrum.effective()?;
    let done = |p: f64, bound: f64, terms: usize| TailResult {
        p: p.clamp(0.0, 1.0),
        abs_error_bound: bound,
        method: TailMethod::Farebrother,
        terms_or_nodes: terms,
    };
    if x == 0.0 {
        return Ok(done(1.0, 0.0, 0));
    }

    let (w_min, w_max) = weights
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &w| {
            (lo.min(w), hi.max(w))
        });
    let beta = 2.0 * w_min * w_max / (w_min + w_max);
    let gammas: Vec<f64> = weights.iter().map(|w| 1.0 - beta / w).collect();
    let rho = gammas.iter().fold(0.0, |m: f64, g| m.max(g.abs()));
    let ln_a0 = 0.5 * ln_product(weights.iter().map(|w| beta / w));
    if ln_a0 < -700.0 {
        return Err(Error::Convergence {
            method: "farebrother series",
            iterations: 0,
            bound: 1.0,
        });
    }

    let dof = weights.len() as f64;
    let half_y = 0.5 * x / beta;
    let ln_half_y = half_y.ln();
    let mut tail = CauchyTail::new(ln_a0, &gammas, rho);

    // χ²_d CDF at y = x/β, stepped d → d + 2 by subtracting
    // s_d = (y/2)^{d/2} e^{-y/2} / Γ(d/2 + 1). s_d is carried in linear scale
    // and recomputed from its closed form at a check if it may have
    // underflowed.
    let ln_step_at = |half_d: f64| half_d * ln_half_y - half_y - ln_gamma(half_d + 1.0);
    let mut half_d = 0.5 * dof;
    let mut cdf = gamma_p(half_d, half_y);
    let mut step = ln_step_at(half_d).exp();

    let mut conv = Convolution::new(ln_a0.exp());
    let mut powers = gammas.clone();
    let mut lower = ln_a0.exp() * cdf;

    for k in 1..=MAX_SERIES_TERMS {
        let a_k = conv.next(0.5 * sum_and_advance(&mut powers, &gammas));

        cdf -= step;
        step *= half_y / (half_d + 1.0);
        half_d += 1.0;
        cdf = cdf.clamp(0.0, 1.0);

        if k % CHECK_EVERY == 0 || rho == 0.0 {
            if step < 1e-280 {
                step = ln_step_at(half_d).exp();
            }
            let cdf_bound = chisq_cdf_bound(half_d, half_y, step);
            cdf = cdf.min(cdf_bound);
            lower += a_k * cdf;
            let bound = cdf_bound * tail.bound(k, half_y / (half_d + 1.0));
            if bound <= tol {
                return Ok(done(1.0 - lower, bound, k + 1));
            }
        } else {
            lower += a_k * cdf;
        }
    }
    let bound = chisq_cdf_bound(half_d, half_y, ln_step_at(half_d).exp())
        * tail.bound(MAX_SERIES_TERMS, half_y / (half_d + 1.0));
    Err(Error::Convergence {
        method: "farebrother series",
        iterations: MAX_SERIES_TERMS,
        bound,
    })
}

/// The recursion `a_k = k⁻¹ Σ_{r<k} g_{k−r} a_r`. `a_r` sits at index `r`
/// and `g_s` at `sums.len() − PAD − s`, so the sum is a dot product of two
/// contiguous slices. Both buffers are zero past the stored values, which
/// lets the slices be rounded up to a multiple of four.
struct Convolution {
    coeffs: Vec<f64>,
    sums: Vec<f64>,
    k: usize,
}

impl Convolution {
    const PAD: usize = 4;

    fn new(a0: f64) -> Self {
        let mut coeffs = vec![0.0; 64];
        coeffs[0] = a0;
        Convolution {
            coeffs,
            sums: vec![0.0; 64 + Self::PAD],
            k: 0,
        }
    }

    /// Takes `g_k` and returns `a_k`.
    fn next(&mut self, g: f64) -> f64 {
        self.k += 1;
        let k = self.k;
        let padded = k.next_multiple_of(4);
        if padded >= self.coeffs.len() {
            let cap = 2 * self.coeffs.len();
            self.coeffs.resize(cap, 0.0);
            let mut grown = vec![0.0; cap + Self::PAD];
            let old = self.sums.len();
            grown[cap - (k - 1)..].copy_from_slice(&self.sums[old - Self::PAD - (k - 1)..]);
            self.sums = grown;
        }
        let start = self.coeffs.len() - k;
        self.sums[start] = g;
        let a_k = dot(&self.coeffs[..padded], &self.sums[start..start + padded]) * (1.0 / k as f64);
        self.coeffs[k] = a_k;
        a_k
    }
}

/// Returns `Σ p_i`, then replaces each `p_i` by `p_i γ_i`.
fn sum_and_advance(powers: &mut [f64], gammas: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let mut cp = powers.chunks_exact_mut(8);
    let mut cg = gammas.chunks_exact(8);
    for (p, g) in (&mut cp).zip(&mut cg) {
        for i in 0..8 {
            acc[i] += p[i];
            p[i] *= g[i];
        }
    }
    let mut rest = 0.0;
    for (p, g) in cp.into_remainder().iter_mut().zip(cg.remainder()) {
        rest += *p;
        *p *= g;
    }
    acc.iter().sum::<f64>() + rest
}

/// `Σ ln f_i` for factors in `(0, ∞)`, taking one logarithm per ~300
/// orders of magnitude instead of one per factor.
fn ln_product(factors: impl Iterator<Item = f64>) -> f64 {
    let mut ln = 0.0;
    let mut prod = 1.0f64;
    for f in factors {
        prod *= f;
        if !(1e-250..=1e250).contains(&prod) {
            ln += prod.ln();
            prod = 1.0;
        }
    }
    ln + prod.ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
        {
            // SAFETY: the required CPU features were detected at runtime.
            return unsafe { dot_avx2(a, b) };
        }
    }
    dot_portable(a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn dot_avx2(a: &[f64], b: &[f64]) -> f64 {
    use std::arch::x86_64::*;
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (pa, pb) = (a.as_ptr(), b.as_ptr());
    let mut acc = [_mm256_setzero_pd(); 4];
    let mut i = 0;
    while i + 16 <= n {
        for (lane, acc) in acc.iter_mut().enumerate() {
            let off = i + 4 * lane;
            // SAFETY: off + 4 <= n
            let (x, y) = unsafe { (_mm256_loadu_pd(pa.add(off)), _mm256_loadu_pd(pb.add(off))) };
            *acc = _mm256_fmadd_pd(x, y, *acc);
        }
        i += 16;
    }
    let sum = _mm256_add_pd(_mm256_add_pd(acc[0], acc[1]), _mm256_add_pd(acc[2], acc[3]));
    let mut rest = _mm256_setzero_pd();
    while i + 4 <= n {
        // SAFETY: i + 4 <= n
        let (x, y) = unsafe { (_mm256_loadu_pd(pa.add(i)), _mm256_loadu_pd(pb.add(i))) };
        rest = _mm256_fmadd_pd(x, y, rest);
        i += 4;
    }
    let sum = _mm256_add_pd(sum, rest);
    let mut lanes = [0.0; 4];
    // SAFETY: `lanes` holds four f64
    unsafe { _mm256_storeu_pd(lanes.as_mut_ptr(), sum) };
    let tail: f64 = a[i..n].iter().zip(&b[i..n]).map(|(x, y)| x * y).sum();
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

fn dot_portable(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // independent lanes so the sum is not one long dependency chain
    let mut acc = [0.0; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let rest: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    acc.iter().sum::<f64>() + rest
}

/// Upper bound on `P(χ²_d ≤ y)` given `(y/2)^{d/2} e^{-y/2}/Γ(d/2+1)`.
fn chisq_cdf_bound(half_d: f64, half_y: f64, step: f64) -> f64 {
    // P(d/2, y/2) = step · Σ_s (y/2)^s / Π_{t≤s}(d/2 + t) ≤ step / (1 − (y/2)/(d/2 + 1))
    let ratio = half_y / (half_d + 1.0);
    if ratio < 1.0 {
        (step / (1.0 - ratio)).min(1.0)
    } else {
        1.0
    }
}

/// Bound on the series remainder `Σ_{j>k} |a_j| F_j` from Cauchy estimates
/// `|a_j| ≤ M(r) r^{-j}`, `M(r) = a_0 Π (1 − |γ_i| r)^{-1/2}`, on radii
/// `r_t = 1 + (1/ρ − 1)(1 − 2^{-t})`, combined with `F_{j+1} ≤ q F_j`.
/// The grid is filled lazily and searched from the previous optimum
/// outwards, since the best radius grows with `k`.
struct CauchyTail<'a> {
    ln_a0: f64,
    gammas: &'a [f64],
    rho: f64,
    /// `(ln M(r_t), ln r_t, 1/r_t)` for `t = 1, 2, …`
    grid: Vec<(f64, f64, f64)>,
    cursor: usize,
}

impl<'a> CauchyTail<'a> {
    const MAX_RADII: usize = 48;

    fn new(ln_a0: f64, gammas: &'a [f64], rho: f64) -> Self {
        CauchyTail {
            ln_a0,
            gammas,
            rho,
            grid: Vec::new(),
            cursor: 0,
        }
    }

    fn radius(&mut self, t: usize) -> Option<(f64, f64, f64)> {
        while self.grid.len() <= t {
            let i = self.grid.len() + 1;
            if i > Self::MAX_RADII {
                return None;
            }
            let r = 1.0 + (1.0 / self.rho - 1.0) * (1.0 - 0.5f64.powi(i as i32));
            if r <= 1.0 || r * self.rho >= 1.0 {
                return None;
            }
            let ln_m = self.ln_a0 - 0.5 * ln_product(self.gammas.iter().map(|g| 1.0 - g.abs() * r));
            self.grid.push((ln_m, r.ln(), 1.0 / r));
        }
        Some(self.grid[t])
    }

    /// `ln` of the bound on `Σ_{j>k} |a_j| (F_j / F_k)` when consecutive CDF
    /// ratios are at most `q`.
    fn ln_bound_at(&mut self, t: usize, k: usize, q: f64) -> Option<f64> {
        let (ln_m, ln_r, inv_r) = self.radius(t)?;
        let s = q.min(1.0) * inv_r;
        Some(ln_m - k as f64 * ln_r + (s / (1.0 - s)).ln())
    }

    fn bound(&mut self, k: usize, q: f64) -> f64 {
        if self.rho == 0.0 {
            // all weights equal: A(z) is the constant a_0 = 1
            return 0.0;
        }
        let Some(mut best) = self.ln_bound_at(self.cursor, k, q) else {
            return f64::INFINITY;
        };
        while let Some(next) = self.ln_bound_at(self.cursor + 1, k, q) {
            if next >= best {
                break;
            }
            best = next;
            self.cursor += 1;
        }
        best.exp()
    }
}
