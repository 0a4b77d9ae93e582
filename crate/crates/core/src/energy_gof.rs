//! Energy goodness-of-fit test for a fully specified categorical null.
//!
//! Under the discrete metric, `n` times the energy distance between the
//! empirical distribution and `p0` is
//!
//! ```text
//! E_n = n⁻¹ Σ_i (n_i − n p_i)²,
//! ```
//!
//! which under the null converges to `Σ λ_i Z_i²` with `λ` the eigenvalues of
//! `diag(p0) − p0 p0ᵀ`. The null is fixed, so nothing is estimated.

use serde::{Deserialize, Serialize};

use crate::dcov::multinomial_eigenvalues;
use crate::error::{input, Error, Result};
use crate::outcome::{Calibration, TestMethod, TestOutcome};
use crate::quadform::{chisq_upper_tail, upper_tail, TailResult, WeightSpectrum};
use crate::tables::{CategoricalSample, ProbabilityVector};

fn check_counts(counts: &[u64], p0: &ProbabilityVector) -> Result<u64> {
    if counts.len() != p0.len() {
        return input(format!(
            "{} counts but the null has {} categories",
            counts.len(),
            p0.len()
        ));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return input("counts sum to zero");
    }
    Ok(n)
}

/// `E_n = n⁻¹ Σ (n_i − n p_i)²`.
pub fn estat(counts: &[u64], p0: &ProbabilityVector) -> Result<f64> {
    let n = check_counts(counts, p0)? as f64;
    let ss: f64 = counts
        .iter()
        .zip(p0.probs())
        .map(|(&c, &p)| {
            let d = c as f64 - n * p;
            d * d
        })
        .sum();
    Ok(ss / n)
}

/// `n · (2 E d(x, X) − E d(x, x′) − E d(X, X′))` with the sample terms
/// averaged over all observations and pairs, `O(n²)`.
pub fn estat_from_definition(sample: &CategoricalSample, p0: &ProbabilityVector) -> Result<f64> {
    if sample.y().is_some() {
        return input("goodness of fit takes a single-variable sample");
    }
    if sample.levels_x() != p0.len() {
        return input(format!(
            "sample has {} levels but the null has {} categories",
            sample.levels_x(),
            p0.len()
        ));
    }
    let x = sample.x();
    let n = x.len() as f64;
    let p = p0.probs();

    let cross: f64 = x.iter().map(|&xl| 1.0 - p[xl]).sum::<f64>() / n;
    let mut within = 0.0;
    for &a in x {
        for &b in x {
            if a != b {
                within += 1.0;
            }
        }
    }
    within /= n * n;
    let null_self = 1.0 - p.iter().map(|q| q * q).sum::<f64>();
    Ok(n * (2.0 * cross - within - null_self))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GofMethod {
    Energy,
    Pearson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GofCalibration {
    Spectrum {
        weights: WeightSpectrum,
        tail: TailResult,
    },
    ChiSquared {
        df: usize,
    },
    /// Counts fell on categories the null gives probability zero.
    SupportViolation {
        categories: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofTestOutcome {
    pub method: GofMethod,
    pub statistic: f64,
    pub p_value: f64,
    pub calibration: GofCalibration,
}

impl From<GofTestOutcome> for TestOutcome {
    fn from(o: GofTestOutcome) -> Self {
        let method = match o.method {
            GofMethod::Energy => TestMethod::Energy,
            GofMethod::Pearson => TestMethod::PearsonGof,
        };
        let calibration = match o.calibration {
            GofCalibration::Spectrum { weights, tail } => Calibration::Spectrum {
                weights,
                tail_method: tail.method,
                abs_error_bound: tail.abs_error_bound,
            },
            GofCalibration::ChiSquared { df } => Calibration::ChiSquared { df },
            GofCalibration::SupportViolation { categories } => {
                Calibration::SupportViolation { categories }
            }
        };
        TestOutcome {
            method,
            statistic: o.statistic,
            p_value: o.p_value,
            calibration,
        }
    }
}

/// Null weights: nonzero eigenvalues of `diag(p0) − p0 p0ᵀ`.
pub fn gof_spectrum(p0: &ProbabilityVector) -> Result<WeightSpectrum> {
    let all = multinomial_eigenvalues(p0);
    let spectrum = WeightSpectrum::new(all.into_iter().filter(|&w| w > 0.0).collect())?;
    if spectrum.is_empty() {
        return Err(Error::Degenerate(
            "the null puts all mass on one category".to_string(),
        ));
    }
    Ok(spectrum)
}

/// Energy test of `counts ~ Multinomial(n, p0)`.
///
/// Counts on a category with `p0_i = 0` make the null impossible; the
/// outcome then reports `p = 0` with [`GofCalibration::SupportViolation`].
pub fn energy_gof_test(counts: &[u64], p0: &ProbabilityVector) -> Result<GofTestOutcome> {
    let statistic = estat(counts, p0)?;
    let weights = gof_spectrum(p0)?;
    let violations = support_violations(counts, p0);
    if !violations.is_empty() {
        return Ok(GofTestOutcome {
            method: GofMethod::Energy,
            statistic,
            p_value: 0.0,
            calibration: GofCalibration::SupportViolation {
                categories: violations,
            },
        });
    }
    let tail = upper_tail(&weights, statistic)?;
    Ok(GofTestOutcome {
        method: GofMethod::Energy,
        statistic,
        p_value: tail.p,
        calibration: GofCalibration::Spectrum { weights, tail },
    })
}

fn support_violations(counts: &[u64], p0: &ProbabilityVector) -> Vec<usize> {
    counts
        .iter()
        .zip(p0.probs())
        .enumerate()
        .filter(|(_, (&c, &p))| c > 0 && p == 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Pearson's X² goodness-of-fit test on `I − 1` degrees of freedom.
pub fn pearson_gof_test(counts: &[u64], p0: &ProbabilityVector) -> Result<GofTestOutcome> {
    let n = check_counts(counts, p0)? as f64;
    if let Some(i) = p0.probs().iter().position(|&p| p == 0.0) {
        return input(format!("category {i} has zero expected count"));
    }
    let statistic: f64 = counts
        .iter()
        .zip(p0.probs())
        .map(|(&c, &p)| {
            let e = n * p;
            let d = c as f64 - e;
            d * d / e
        })
        .sum();
    let df = p0.len() - 1;
    if df == 0 {
        return Err(Error::Degenerate(
            "a single category has nothing to test".to_string(),
        ));
    }
    Ok(GofTestOutcome {
        method: GofMethod::Pearson,
        statistic,
        p_value: chisq_upper_tail(df, statistic),
        calibration: GofCalibration::ChiSquared { df },
    })
}
