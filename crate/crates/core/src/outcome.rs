//! The JSON-stable result envelope shared by every test.

use serde::{Deserialize, Serialize};

use crate::quadform::{TailMethod, WeightSpectrum};

/// Which test produced an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    Dcov,
    DcovPerm,
    Pearson,
    PearsonPerm,
    GTest,
    FisherExact,
    FisherMc,
    Energy,
    PearsonGof,
}

impl TestMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TestMethod::Dcov => "dcov",
            TestMethod::DcovPerm => "dcov-perm",
            TestMethod::Pearson => "pearson",
            TestMethod::PearsonPerm => "pearson-perm",
            TestMethod::GTest => "g-test",
            TestMethod::FisherExact => "fisher-exact",
            TestMethod::FisherMc => "fisher-mc",
            TestMethod::Energy => "energy",
            TestMethod::PearsonGof => "pearson-gof",
        }
    }
}

/// How the p-value was calibrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Calibration {
    /// Weighted χ²₁ limit law.
    Spectrum {
        weights: WeightSpectrum,
        tail_method: TailMethod,
        abs_error_bound: f64,
    },
    /// Plain χ² limit law.
    ChiSquared { df: usize },
    /// Resampling with `resamples` fixed-margin tables; `mc_se` is the
    /// binomial standard error of the p-value estimate.
    Resampling { resamples: usize, mc_se: f64 },
    /// Full enumeration of tables with the observed margins.
    Exact { tables: usize },
    /// No calibration needed: the data are impossible under the null.
    SupportViolation { categories: Vec<usize> },
    /// The statistic is exactly zero, so `p = 1` whatever the null law.
    NoEvidence,
}

/// Result of any test in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub method: TestMethod,
    pub statistic: f64,
    pub p_value: f64,
    pub calibration: Calibration,
}

impl TestOutcome {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}
