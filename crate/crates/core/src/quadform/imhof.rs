//! Imhof's inversion formula,
//!
//! ```text
//! P(Q > x) = ½ + π⁻¹ ∫₀^∞ sin θ(u) / (u ρ(u)) du,
//! θ(u) = ½ Σ atan(w_j u) − ½ x u,   ρ(u) = Π (1 + w_j² u²)^{1/4}.
//! ```
//!
//! The integral is cut at `U` where an analytic tail bound falls below
//! `tol/2`, and `[0, U]` is split into panels spanning at most half an
//! oscillation, each integrated by Romberg (trapezoid with Richardson
//! extrapolation) to its share of the remaining `tol/2`.

use std::f64::consts::PI;

use super::{check_args, TailMethod, TailResult, WeightSpectrum};
use crate::error::{Error, Result};

const MAX_ROMBERG_LEVELS: usize = 14;
const MAX_PANELS: usize = 5_000_000;

struct Integrand<'a> {
    weights: &'a [f64],
    x: f64,
}

impl Integrand<'_> {
    fn eval(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.5 * (self.weights.iter().sum::<f64>() - self.x);
        }
        let mut theta = -0.5 * self.x * u;
        let mut ln_rho = 0.0;
        for &w in self.weights {
            let wu = w * u;
            theta += 0.5 * wu.atan();
            ln_rho += 0.25 * (wu * wu).ln_1p();
        }
        theta.sin() / (u * ln_rho.exp())
    }

    /// `θ'(u) = ½ Σ w_j/(1 + w_j² u²) − x/2`, decreasing in `u`.
    fn theta_prime(&self, u: f64) -> f64 {
        0.5 * self
            .weights
            .iter()
            .map(|w| w / (1.0 + w * w * u * u))
            .sum::<f64>()
            - 0.5 * self.x
    }

    /// Upper bound on `|π⁻¹ ∫_U^∞ sin θ / (uρ)|`.
    fn tail_bound(&self, u: f64) -> f64 {
        let m = self.weights.len() as f64;
        let ln_prod = 0.5 * self.weights.iter().map(|w| w.ln()).sum::<f64>();
        // Imhof: ∫_U^∞ du / (u ρ(u)) ≤ ∫_U^∞ u^{-1-m/2} Π w^{-1/2} du
        let crude = (-(ln_prod + 0.5 * m * u.ln())).exp() / (PI * 0.5 * m);
        // Once θ' < 0 on [U, ∞), 1/(uρ|θ'|) is decreasing and the second
        // mean value theorem gives |∫_U^∞| ≤ 2 / (U ρ(U) |θ'(U)|).
        let slope = self.theta_prime(u);
        if slope < 0.0 {
            let ln_rho: f64 = self
                .weights
                .iter()
                .map(|w| 0.25 * (w * w * u * u).ln_1p())
                .sum();
            let oscillating = 2.0 / (PI * u * ln_rho.exp() * -slope);
            crude.min(oscillating)
        } else {
            crude
        }
    }
}

/// `P(Q > x)` by numerical inversion of the characteristic function.
pub fn upper_tail_imhof(spectrum: &WeightSpectrum, x: f64, tol: f64) -> Result<TailResult> {
    check_args(x, tol)?;
    let weights = spectrum.effective()?;
    if x == 0.0 {
        return Ok(TailResult {
            p: 1.0,
            abs_error_bound: 0.0,
            method: TailMethod::Imhof,
            terms_or_nodes: 0,
        });
    }
    let f = Integrand {
        weights: &weights,
        x,
    };
    let w_max = weights.iter().copied().fold(0.0, f64::max);

    // truncation point: double, then bisect on the (monotone) bound
    let target = 0.5 * tol;
    let mut hi = 1.0 / w_max;
    let mut doublings = 0;
    while f.tail_bound(hi) > target {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::Convergence {
                method: "imhof truncation",
                iterations: doublings,
                bound: f.tail_bound(hi),
            });
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if f.tail_bound(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let upper = hi;
    let truncation = f.tail_bound(upper);

    // Panel breakpoints. |θ'| on [u, ∞) is at most x/2 + ½ Σ w/(1 + w²u²),
    // so a panel of width π / that bound covers at most half a period. Widths
    // are also capped by the distance from the origin so the 1/(uρ) envelope
    // changes by a bounded factor across a panel.
    let mut breaks = vec![0.0];
    let mut u = 0.0;
    let h0 = 1.0 / w_max;
    while u < upper {
        let freq = 0.5 * x
            + 0.5
                * weights
                    .iter()
                    .map(|w| w / (1.0 + w * w * u * u))
                    .sum::<f64>();
        let width = (PI / freq).min(u.max(h0));
        u = (u + width).min(upper);
        breaks.push(u);
        if breaks.len() > MAX_PANELS {
            return Err(Error::Convergence {
                method: "imhof panels",
                iterations: breaks.len(),
                bound: truncation,
            });
        }
    }

    // p-error budget tol/2 becomes an integral budget π·tol/2
    let panel_tol = PI * target / (breaks.len() - 1) as f64;
    let mut integral = 0.0;
    let mut quad_error = 0.0;
    let mut evals = 0;
    for pair in breaks.windows(2) {
        let (value, err, n) = romberg(|t| f.eval(t), pair[0], pair[1], panel_tol);
        integral += value;
        quad_error += err;
        evals += n;
    }
    let abs_error_bound = truncation + quad_error / PI;
    if abs_error_bound > tol {
        return Err(Error::Convergence {
            method: "imhof quadrature",
            iterations: evals,
            bound: abs_error_bound,
        });
    }
    Ok(TailResult {
        p: (0.5 + integral / PI).clamp(0.0, 1.0),
        abs_error_bound,
        method: TailMethod::Imhof,
        terms_or_nodes: evals,
    })
}

/// Romberg integration; returns (value, error estimate, evaluations).
fn romberg(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64, usize) {
    let mut prev_row = [0.0; MAX_ROMBERG_LEVELS + 1];
    let mut row = [0.0; MAX_ROMBERG_LEVELS + 1];
    let h0 = b - a;
    prev_row[0] = 0.5 * h0 * (f(a) + f(b));
    let mut evals = 2;
    let mut err = f64::INFINITY;
    for level in 1..=MAX_ROMBERG_LEVELS {
        let n_new = 1usize << (level - 1);
        let h = h0 / (1usize << level) as f64;
        let mid_sum: f64 = (0..n_new).map(|k| f(a + (2 * k + 1) as f64 * h)).sum();
        evals += n_new;
        row[0] = 0.5 * prev_row[0] + h * mid_sum;
        let mut factor = 1.0;
        for j in 1..=level {
            factor *= 4.0;
            row[j] = row[j - 1] + (row[j - 1] - prev_row[j - 1]) / (factor - 1.0);
        }
        err = (row[level] - prev_row[level - 1]).abs();
        std::mem::swap(&mut row, &mut prev_row);
        if level >= 3 && err <= tol {
            return (prev_row[level], err, evals);
        }
    }
    (prev_row[MAX_ROMBERG_LEVELS], err, evals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadform::{chisq_upper_tail, upper_tail_farebrother};

    fn spec(w: &[f64]) -> WeightSpectrum {
        WeightSpectrum::new(w.to_vec()).unwrap()
    }

    #[test]
    fn closed_form_two_unit_weights() {
        let r = upper_tail_imhof(&spec(&[1.0, 1.0]), 2.0, 1e-9).unwrap();
        assert!((r.p - (-1.0f64).exp()).abs() < 1e-9);
        assert!(r.abs_error_bound <= 1e-9);
    }

    #[test]
    fn zero_quantile_has_full_mass() {
        for w in [vec![1.0], vec![0.2, 5.0, 1.0]] {
            assert_eq!(upper_tail_imhof(&spec(&w), 0.0, 1e-8).unwrap().p, 1.0);
        }
    }

    #[test]
    fn single_weight_matches_chisq1() {
        for x in [0.01, 0.5, 3.841_459, 12.0] {
            let r = upper_tail_imhof(&spec(&[1.0]), x, 1e-8).unwrap();
            assert!((r.p - chisq_upper_tail(1, x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn agrees_with_series() {
        let s = spec(&[2.0, 1.0, 0.5]);
        let a = upper_tail_imhof(&s, 5.0, 1e-9).unwrap().p;
        let b = upper_tail_farebrother(&s, 5.0, 1e-9).unwrap().p;
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn handles_wide_spectra() {
        let w: Vec<f64> = (0..40)
            .map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 39.0))
            .collect();
        let s = spec(&w);
        let r = upper_tail_imhof(&s, s.mean(), 1e-9).unwrap();
        assert!(r.p > 0.0 && r.p < 1.0);
    }
}
