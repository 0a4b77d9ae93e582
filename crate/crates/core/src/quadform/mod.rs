//! Upper-tail probabilities of `Q = Σ w_k Z_k²` with `w_k ≥ 0` and `Z_k` iid
//! standard normal.
//!
//! Two independent evaluators are provided: the Ruben mixture-of-χ² series
//! in the form popularised by Farebrother ([`upper_tail_farebrother`]) and
//! Imhof's inversion of the characteristic function ([`upper_tail_imhof`]).
//! [`upper_tail`] runs the series first and falls back to Imhof when the
//! series would need more than [`MAX_SERIES_TERMS`] terms.

mod farebrother;
pub mod gamma;
mod imhof;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

pub use farebrother::{upper_tail_farebrother, MAX_SERIES_TERMS};
pub use imhof::upper_tail_imhof;

/// Weights below this fraction of the largest weight count as exact zeros.
pub const RELATIVE_ZERO: f64 = 1e-14;

/// Tolerance [`upper_tail`] requests from the series.
pub const SERIES_TOL: f64 = 1e-9;
/// Tolerance [`upper_tail`] requests from Imhof when the series gives up.
pub const IMHOF_TOL: f64 = 1e-8;

/// Nonnegative weights of a quadratic form in independent standard normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightSpectrum {
    weights: Vec<f64>,
}

impl WeightSpectrum {
    /// Accepts any finite nonnegative weights; zeros are allowed.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return input(format!("weights must be finite and nonnegative, got {w}"));
        }
        Ok(WeightSpectrum { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// `E Q = Σ w_k`.
    pub fn mean(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Var Q = 2 Σ w_k²`.
    pub fn variance(&self) -> f64 {
        2.0 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// The weights that affect the law, i.e. those above
    /// `RELATIVE_ZERO · max`. Errors if nothing is left.
    pub fn effective(&self) -> Result<Vec<f64>> {
        let max = self.max_weight();
        if max <= 0.0 {
            return Err(Error::Degenerate(
                "all weights are zero; the quadratic form is identically zero".into(),
            ));
        }
        let cutoff = RELATIVE_ZERO * max;
        let mut kept = Vec::with_capacity(self.weights.len());
        kept.extend(self.weights.iter().copied().filter(|&w| w > cutoff));
        Ok(kept)
    }
}

impl TryFrom<Vec<f64>> for WeightSpectrum {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        WeightSpectrum::new(v)
    }
}

impl From<WeightSpectrum> for Vec<f64> {
    fn from(s: WeightSpectrum) -> Self {
        s.weights
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailMethod {
    Farebrother,
    Imhof,
}

impl std::str::FromStr for TailMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "farebrother" => Ok(TailMethod::Farebrother),
            "imhof" => Ok(TailMethod::Imhof),
            _ => input(format!("unknown tail method `{s}` (farebrother|imhof)")),
        }
    }
}

/// `P(Q > x)` with its error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailResult {
    pub p: f64,
    pub abs_error_bound: f64,
    pub method: TailMethod,
    /// Series terms used, or integrand evaluations for Imhof.
    pub terms_or_nodes: usize,
}

pub(crate) fn check_args(x: f64, tol: f64) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return input(format!("quantile must be finite and nonnegative, got {x}"));
    }
    if !(tol > 0.0 && tol <= 1e-2) {
        return input(format!("tolerance must lie in (0, 1e-2], got {tol}"));
    }
    Ok(())
}

/// `P(Q > x)`: Farebrother at 1e-9, then Imhof at 1e-8 if the series fails.
pub fn upper_tail(spectrum: &WeightSpectrum, x: f64) -> Result<TailResult> {
    let series_err = match upper_tail_farebrother(spectrum, x, SERIES_TOL) {
        Ok(r) => return Ok(r),
        Err(e @ (Error::Input(_) | Error::Degenerate(_))) => return Err(e),
        Err(e) => e,
    };
    upper_tail_imhof(spectrum, x, IMHOF_TOL)
        .map_err(|imhof_err| Error::Evaluation(format!("series: {series_err}; imhof: {imhof_err}")))
}

/// Same as [`upper_tail`] with an explicit method and tolerance.
pub fn upper_tail_with(
    spectrum: &WeightSpectrum,
    x: f64,
    method: TailMethod,
    tol: f64,
) -> Result<TailResult> {
    match method {
        TailMethod::Farebrother => upper_tail_farebrother(spectrum, x, tol),
        TailMethod::Imhof => upper_tail_imhof(spectrum, x, tol),
    }
}

/// χ² survival function `Q(df/2, x/2)`.
pub fn chisq_upper_tail(df: usize, x: f64) -> f64 {
    assert!(df >= 1, "chi-squared needs at least one degree of freedom");
    if x <= 0.0 {
        return 1.0;
    }
    gamma::gamma_q(df as f64 / 2.0, x / 2.0)
}
