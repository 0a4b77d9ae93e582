//! Classical tests of independence used as baselines: Pearson's X², the
//! likelihood-ratio G test and Fisher's exact test, plus the fixed-margin
//! resampling machinery shared with the distance-covariance test.

use rand::Rng;

use crate::error::{input, Result};
use crate::outcome::{Calibration, TestMethod, TestOutcome};
use crate::quadform::chisq_upper_tail;
use crate::tables::ContingencyTable;

pub mod patefield;
pub mod permutation;

pub use patefield::{patefield_sample, PatefieldSampler};
pub use permutation::{
    pearson_permutation_test, permutation_p_value, permutation_test, PermutationPValue,
    TableStatistic,
};

/// Pearson's X². Cells with zero expected count are skipped (0/0 := 0).
pub fn pearson_statistic(table: &ContingencyTable) -> f64 {
    let e = table.expected_counts();
    let mut x2 = 0.0;
    for i in 0..table.rows() {
        for j in 0..table.cols() {
            let ex = e[(i, j)];
            if ex > 0.0 {
                let d = table.get(i, j) as f64 - ex;
                x2 += d * d / ex;
            }
        }
    }
    x2
}

fn independence_df(table: &ContingencyTable) -> usize {
    (table.rows() - 1) * (table.cols() - 1)
}

/// Pearson's X² test with the χ²_{(I−1)(J−1)} limit. Rejects tables with an
/// empty row or column, where some expected count is zero; use
/// [`pearson_permutation_test`] for those.
pub fn pearson_independence_test(table: &ContingencyTable) -> Result<TestOutcome> {
    table.require_two_way()?;
    if let Some(i) = table.row_sums().iter().position(|&r| r == 0) {
        return input(format!("row {i} is empty, so expected counts vanish"));
    }
    if let Some(j) = table.col_sums().iter().position(|&c| c == 0) {
        return input(format!("column {j} is empty, so expected counts vanish"));
    }
    Ok(pearson_full_df(table))
}

/// Pearson's X² on the table as given, empty margins included, with the
/// nominal df. Used by the simulation harness, where the table shape is
/// fixed by design.
pub(crate) fn pearson_full_df(table: &ContingencyTable) -> TestOutcome {
    let df = independence_df(table);
    let statistic = pearson_statistic(table);
    TestOutcome {
        method: TestMethod::Pearson,
        statistic,
        p_value: chisq_upper_tail(df, statistic),
        calibration: Calibration::ChiSquared { df },
    }
}

/// `G = 2 Σ n_ij ln(n_ij / e_ij)` over nonzero cells.
pub fn g_statistic(table: &ContingencyTable) -> f64 {
    let e = table.expected_counts();
    let mut g = 0.0;
    for i in 0..table.rows() {
        for j in 0..table.cols() {
            let o = table.get(i, j);
            if o > 0 {
                g += o as f64 * (o as f64 / e[(i, j)]).ln();
            }
        }
    }
    (2.0 * g).max(0.0)
}

/// Likelihood-ratio test with the χ²_{(I−1)(J−1)} limit. Empty rows and
/// columns are kept and contribute nothing to `G` (0 ln 0 := 0), but still
/// count towards the degrees of freedom.
pub fn g_test(table: &ContingencyTable) -> Result<TestOutcome> {
    table.require_two_way()?;
    let df = independence_df(table);
    let statistic = g_statistic(table);
    Ok(TestOutcome {
        method: TestMethod::GTest,
        statistic,
        p_value: chisq_upper_tail(df, statistic),
        calibration: Calibration::ChiSquared { df },
    })
}

/// Two-sided Fisher exact test for a 2×2 table: the total probability of all
/// tables with the observed margins that are no more likely than the
/// observed one (up to a relative slack of 1e-7).
pub fn fisher_exact_2x2(table: &ContingencyTable) -> Result<TestOutcome> {
    if table.rows() != 2 || table.cols() != 2 {
        return input(format!(
            "exact enumeration is implemented for 2x2 tables, got {}x{}",
            table.rows(),
            table.cols()
        ));
    }
    let (r0, c0, n) = (table.row_sums()[0], table.col_sums()[0], table.total());
    let ln_fact = patefield::log_factorials(n);
    let lf = |k: u64| ln_fact[k as usize];
    let ln_p = |a: u64| {
        lf(r0) + lf(n - r0) + lf(c0) + lf(n - c0)
            - lf(n)
            - lf(a)
            - lf(r0 - a)
            - lf(c0 - a)
            - lf(n - r0 - c0 + a)
    };
    let lo = (r0 + c0).saturating_sub(n);
    let hi = r0.min(c0);
    let observed = ln_p(table.get(0, 0));
    let cutoff = observed + 1e-7f64.ln_1p();
    let p: f64 = (lo..=hi)
        .map(ln_p)
        .filter(|&l| l <= cutoff)
        .map(f64::exp)
        .sum();
    Ok(TestOutcome {
        method: TestMethod::FisherExact,
        statistic: -observed,
        p_value: p.min(1.0),
        calibration: Calibration::Exact {
            tables: (hi - lo + 1) as usize,
        },
    })
}

/// Fisher's test for general `I × J` tables with a Monte Carlo p-value over
/// `resamples` fixed-margin tables. The statistic is `−ln P(table | margins)`.
pub fn fisher_mc<R: Rng + ?Sized>(
    table: &ContingencyTable,
    resamples: usize,
    rng: &mut R,
) -> Result<TestOutcome> {
    table.require_two_way()?;
    let perm = permutation_p_value(table, TableStatistic::NegLogProb, resamples, rng)?;
    let ln_fact = patefield::log_factorials(table.total());
    let lf = |k: &u64| ln_fact[*k as usize];
    let ln_prob = table.row_sums().iter().map(lf).sum::<f64>()
        + table.col_sums().iter().map(lf).sum::<f64>()
        - lf(&table.total())
        - table.counts().iter().map(lf).sum::<f64>();
    Ok(TestOutcome {
        method: TestMethod::FisherMc,
        statistic: -ln_prob,
        p_value: perm.p_value,
        calibration: Calibration::Resampling {
            resamples,
            mc_se: perm.mc_se,
        },
    })
}

/// Exact test for 2×2 tables, Monte Carlo otherwise.
pub fn fisher_test<R: Rng + ?Sized>(
    table: &ContingencyTable,
    resamples: usize,
    rng: &mut R,
) -> Result<TestOutcome> {
    if table.rows() == 2 && table.cols() == 2 {
        fisher_exact_2x2(table)
    } else {
        fisher_mc(table, resamples, rng)
    }
}
