//! Conditional (fixed-margin) Monte Carlo calibration of table statistics.

use rand::Rng;

use super::patefield::PatefieldSampler;
use crate::error::{input, Result};
use crate::outcome::{Calibration, TestMethod, TestOutcome};
use crate::tables::ContingencyTable;

/// Statistics that can be recomputed on resampled tables. Larger means more
/// evidence against independence for all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableStatistic {
    /// Pearson's X², skipping cells whose expected count is zero.
    Pearson,
    /// `Σ (n_ij − e_ij)²`, i.e. `n² V̂`.
    DcovV,
    /// `Σ ln n_ij!`, which orders tables by decreasing hypergeometric
    /// probability given the margins.
    NegLogProb,
}

/// Relative slack when comparing resampled statistics with the observed
/// one, so that tables tied with the observed one count as tied.
const TIE_SLACK: f64 = 1e-9;

/// Probability slack for [`TableStatistic::NegLogProb`]: tables with
/// `P* ≤ P·(1 + 1e-7)` count as at least as extreme.
const PROB_SLACK: f64 = 1e-7;

/// Precomputed margins for fast repeated evaluation.
struct Evaluator {
    statistic: TableStatistic,
    expected: Vec<f64>,
    ln_fact: Vec<f64>,
}

impl Evaluator {
    fn eval(&self, counts: &[u64]) -> f64 {
        match self.statistic {
            TableStatistic::Pearson => counts
                .iter()
                .zip(&self.expected)
                .filter(|(_, &e)| e > 0.0)
                .map(|(&o, &e)| {
                    let d = o as f64 - e;
                    d * d / e
                })
                .sum(),
            TableStatistic::DcovV => counts
                .iter()
                .zip(&self.expected)
                .map(|(&o, &e)| {
                    let d = o as f64 - e;
                    d * d
                })
                .sum(),
            TableStatistic::NegLogProb => counts.iter().map(|&o| self.ln_fact[o as usize]).sum(),
        }
    }
}

fn expected_flat(table: &ContingencyTable) -> Vec<f64> {
    let n = table.total() as f64;
    let mut e = Vec::with_capacity(table.rows() * table.cols());
    for &r in table.row_sums() {
        for &c in table.col_sums() {
            e.push(r as f64 * c as f64 / n);
        }
    }
    e
}

/// Resampling p-value and its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationPValue {
    pub observed: f64,
    pub p_value: f64,
    pub exceedances: usize,
    pub resamples: usize,
    pub mc_se: f64,
}

/// `p = (1 + #{T* ≥ T}) / (B + 1)` over `resamples` Patefield tables.
pub fn permutation_p_value<R: Rng + ?Sized>(
    table: &ContingencyTable,
    statistic: TableStatistic,
    resamples: usize,
    rng: &mut R,
) -> Result<PermutationPValue> {
    if resamples == 0 {
        return input("need at least one resample");
    }
    let mut sampler = PatefieldSampler::new(table.row_sums(), table.col_sums())?;
    let ln_fact = match statistic {
        TableStatistic::NegLogProb => sampler.log_factorials().to_vec(),
        _ => Vec::new(),
    };
    let eval = Evaluator {
        statistic,
        expected: expected_flat(table),
        ln_fact,
    };
    let observed = eval.eval(table.counts());
    let threshold = match statistic {
        TableStatistic::NegLogProb => observed - PROB_SLACK.ln_1p(),
        _ => observed - TIE_SLACK * observed.abs().max(1.0),
    };
    let mut buf = vec![0u64; table.rows() * table.cols()];
    let mut exceedances = 0;
    for _ in 0..resamples {
        sampler.sample_into(rng, &mut buf);
        if eval.eval(&buf) >= threshold {
            exceedances += 1;
        }
    }
    let p_value = (1 + exceedances) as f64 / (resamples + 1) as f64;
    let mc_se = (p_value * (1.0 - p_value) / resamples as f64).sqrt();
    Ok(PermutationPValue {
        observed,
        p_value,
        exceedances,
        resamples,
        mc_se,
    })
}

/// Resampling test of independence with the given statistic. Requires at
/// least two rows and two columns.
pub fn permutation_test<R: Rng + ?Sized>(
    table: &ContingencyTable,
    statistic: TableStatistic,
    resamples: usize,
    rng: &mut R,
) -> Result<TestOutcome> {
    table.require_two_way()?;
    let perm = permutation_p_value(table, statistic, resamples, rng)?;
    let method = match statistic {
        TableStatistic::Pearson => TestMethod::PearsonPerm,
        TableStatistic::DcovV => TestMethod::DcovPerm,
        TableStatistic::NegLogProb => TestMethod::FisherMc,
    };
    // report the dcov statistic on its usual n·V̂ scale
    let statistic = match statistic {
        TableStatistic::DcovV => perm.observed / table.total() as f64,
        _ => perm.observed,
    };
    Ok(TestOutcome {
        method,
        statistic,
        p_value: perm.p_value,
        calibration: Calibration::Resampling {
            resamples,
            mc_se: perm.mc_se,
        },
    })
}

/// Pearson's X² with a fixed-margin resampling p-value. Cells with zero
/// expected count (empty margins) are skipped.
pub fn pearson_permutation_test<R: Rng + ?Sized>(
    table: &ContingencyTable,
    resamples: usize,
    rng: &mut R,
) -> Result<TestOutcome> {
    permutation_test(table, TableStatistic::Pearson, resamples, rng)
}
