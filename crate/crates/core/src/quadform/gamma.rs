//! Log-gamma and the regularized incomplete gamma functions.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + k as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// `exp(a ln x − x − ln Γ(a))`, the common prefactor of both gamma ratios.
fn prefactor(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

/// Series for P(a, x); converges for any x but quickly only for x < a + 1.
fn lower_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    let max_iter = 1000 + (10.0 * a.sqrt()) as usize + x as usize;
    for _ in 0..max_iter {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * prefactor(a, x)
}

/// Modified Lentz continued fraction for Q(a, x), x ≥ a + 1.
fn upper_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    let max_iter = 1000 + (10.0 * a.sqrt()) as usize;
    for i in 1..=max_iter {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    prefactor(a, x) * h
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        0.0
    } else if x < a + 1.0 {
        lower_series(a, x).min(1.0)
    } else {
        (1.0 - upper_fraction(a, x)).max(0.0)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 − P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        1.0
    } else if x < a + 1.0 {
        (1.0 - lower_series(a, x)).max(0.0)
    } else {
        upper_fraction(a, x).min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-14);
        // ln 10! = 15.104412573075516
        assert!((ln_gamma(11.0) - 15.104_412_573_075_516).abs() < 1e-12);
        for x in [0.1, 0.7, 3.3, 17.5, 250.0, 1e5] {
            let oracle = statrs::function::gamma::ln_gamma(x);
            assert!(
                (ln_gamma(x) - oracle).abs() <= 1e-12 * oracle.abs().max(1.0),
                "x={x}"
            );
        }
    }

    #[test]
    fn exponential_special_case() {
        // a = 1: Q(1, x) = e^{-x}
        for x in [0.0, 0.3, 1.0, 2.5, 10.0, 40.0] {
            assert!((gamma_q(1.0, x) - (-x).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn half_integer_matches_erfc() {
        // Q(1/2, x) = erfc(√x); statrs' erfc is only good to a few 1e-11
        for x in [1e-6f64, 0.01, 0.5, 1.0, 1.920_729_5, 8.0, 30.0] {
            let oracle = statrs::function::erf::erfc(x.sqrt());
            let ours = gamma_q(0.5, x);
            assert!(
                (ours - oracle).abs() < 1e-10,
                "x={x}: {ours:e} vs {oracle:e}"
            );
        }
        // P(|Z| > 1) and P(|Z| > 2) to full precision
        assert!((gamma_q(0.5, 0.5) - 0.317_310_507_862_914_1).abs() < 1e-15);
        assert!((gamma_q(0.5, 2.0) - 0.045_500_263_896_358_42).abs() < 1e-15);
    }

    #[test]
    fn agrees_with_statrs_on_grid() {
        for &a in &[0.5, 1.0, 3.0, 10.5, 32.0, 200.0, 5000.0] {
            for &r in &[0.01, 0.3, 0.9, 1.0, 1.1, 2.0, 5.0] {
                let x = a * r;
                let ours = gamma_q(a, x);
                let oracle = statrs::function::gamma::gamma_ur(a, x);
                assert!(
                    (ours - oracle).abs() < 1e-10,
                    "a={a} x={x}: {ours} vs {oracle}"
                );
                assert!((gamma_p(a, x) + ours - 1.0).abs() < 1e-14);
            }
        }
    }
}
