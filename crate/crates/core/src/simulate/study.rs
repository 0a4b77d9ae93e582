use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{ExperimentReport, MethodTiming, RateRow, StudyKind};
use super::{decaying_null, perturbed, sample_table, DecayingModel};
use crate::baselines::{
    fisher_test, g_test, pearson_full_df, pearson_independence_test, permutation_test,
    TableStatistic,
};
use crate::dcov::{dcov_independence_test, dcov_permutation_test};
use crate::error::{input, Error, Result};
use crate::outcome::TestOutcome;
use crate::rng::RngStream;
use crate::tables::ContingencyTable;

/// Independence tests available to the CLI and the studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dcov,
    DcovPerm,
    Pearson,
    PearsonPerm,
    G,
    Fisher,
    /// Fixed-margin permutation test of the distance-covariance statistic,
    /// standing in for the U-statistic USP test.
    UspPerm,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Dcov,
        Method::DcovPerm,
        Method::Pearson,
        Method::PearsonPerm,
        Method::G,
        Method::Fisher,
        Method::UspPerm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dcov => "dcov",
            Method::DcovPerm => "dcov-perm",
            Method::Pearson => "pearson",
            Method::PearsonPerm => "pearson-perm",
            Method::G => "g",
            Method::Fisher => "fisher",
            Method::UspPerm => "usp-perm",
        }
    }

    pub fn uses_resampling(self) -> bool {
        matches!(
            self,
            Method::DcovPerm | Method::PearsonPerm | Method::Fisher | Method::UspPerm
        )
    }

    /// Runs the test on a table. `resamples` is ignored by asymptotic tests
    /// and by Fisher on 2×2 tables.
    pub fn run<R: Rng + ?Sized>(
        self,
        table: &ContingencyTable,
        resamples: usize,
        rng: &mut R,
    ) -> Result<TestOutcome> {
        match self {
            Method::Dcov => dcov_independence_test(table).map(Into::into),
            Method::DcovPerm | Method::UspPerm => {
                dcov_permutation_test(table, resamples, rng).map(Into::into)
            }
            Method::Pearson => pearson_independence_test(table),
            Method::PearsonPerm => permutation_test(table, TableStatistic::Pearson, resamples, rng),
            Method::G => g_test(table),
            Method::Fisher => fisher_test(table, resamples, rng),
        }
    }

    /// As [`Method::run`], except asymptotic Pearson keeps empty margins
    /// (0/0 := 0) on the nominal df, since simulated tables of a fixed shape
    /// regularly leave a sparse row or column empty.
    fn run_in_study<R: Rng + ?Sized>(
        self,
        table: &ContingencyTable,
        resamples: usize,
        rng: &mut R,
    ) -> Result<f64> {
        match self {
            Method::Pearson => Ok(pearson_full_df(table).p_value),
            Method::DcovPerm | Method::UspPerm => {
                Ok(permutation_test(table, TableStatistic::DcovV, resamples, rng)?.p_value)
            }
            _ => Ok(self.run(table, resamples, rng)?.p_value),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| {
                let known: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
                Error::Input(format!(
                    "unknown method '{s}' (expected one of {})",
                    known.join(", ")
                ))
            })
    }
}

/// Settings shared by calibration and power studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub methods: Vec<Method>,
    pub rows: usize,
    pub cols: usize,
    /// Observations per table.
    pub n: u64,
    /// Replicate tables per grid point (`M`).
    pub replicates: usize,
    /// Resamples per permutation or Monte Carlo test (`B`).
    pub resamples: usize,
    pub seed: u64,
    /// Record wall-clock timings in the report. Off by default because
    /// timings break byte-identical reruns.
    #[serde(skip)]
    pub record_timings: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            methods: vec![Method::Dcov, Method::PearsonPerm, Method::G],
            rows: 4,
            cols: 8,
            n: 100,
            replicates: 2000,
            resamples: 999,
            seed: 0,
            record_timings: false,
        }
    }
}

impl StudyConfig {
    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return input("no methods selected");
        }
        if self.replicates == 0 {
            return input("need at least one replicate");
        }
        if self.n == 0 {
            return input("tables need n >= 1");
        }
        if self.resamples == 0 && self.methods.iter().any(|m| m.uses_resampling()) {
            return input("resampling methods need B >= 1");
        }
        if self.methods.len() > 255 {
            return input("too many methods");
        }
        Ok(())
    }
}

/// Per-replicate random streams: the table is drawn on slot 0 and method
/// `k` uses slot `k + 1`, so results do not depend on scheduling or on
/// which other methods are selected alongside.
fn stream_index(point: usize, replicate: usize, slot: usize) -> u64 {
    ((point as u64) << 40) | ((replicate as u64) << 8) | slot as u64
}

fn method_slot(m: Method) -> usize {
    Method::ALL.iter().position(|&x| x == m).unwrap() + 1
}

struct PointResult {
    /// `p_values[k][r]`, `NaN` where the method failed.
    p_values: Vec<Vec<f64>>,
    seconds: Vec<f64>,
}

fn simulate_point(cfg: &StudyConfig, model: &DecayingModel, point: usize) -> Result<PointResult> {
    let stream = RngStream::new(cfg.seed);
    let per_replicate: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut table_rng = stream.substream(stream_index(point, r, 0));
            let table = sample_table(model, cfg.n, &mut table_rng)?;
            let mut ps = Vec::with_capacity(cfg.methods.len());
            let mut secs = Vec::with_capacity(cfg.methods.len());
            for &m in &cfg.methods {
                let mut rng = stream.substream(stream_index(point, r, method_slot(m)));
                let start = Instant::now();
                let p = m
                    .run_in_study(&table, cfg.resamples, &mut rng)
                    .unwrap_or(f64::NAN);
                secs.push(start.elapsed().as_secs_f64());
                ps.push(p);
            }
            Ok((ps, secs))
        })
        .collect();

    let k = cfg.methods.len();
    let mut p_values = vec![Vec::with_capacity(cfg.replicates); k];
    let mut seconds = vec![0.0; k];
    for item in per_replicate {
        let (ps, secs) = item?;
        for j in 0..k {
            p_values[j].push(ps[j]);
            seconds[j] += secs[j];
        }
    }
    Ok(PointResult { p_values, seconds })
}

fn rate_row(method: Method, grid_value: f64, p_values: &[f64], alpha: f64) -> RateRow {
    let failures = p_values.iter().filter(|p| p.is_nan()).count();
    let rejections = p_values.iter().filter(|&&p| p <= alpha).count();
    RateRow::new(method, grid_value, rejections, failures, p_values.len())
}

fn timings(
    cfg: &StudyConfig,
    totals: &[f64],
    tests_per_method: usize,
) -> Option<Vec<MethodTiming>> {
    cfg.record_timings.then(|| {
        cfg.methods
            .iter()
            .zip(totals)
            .map(|(&method, &total)| MethodTiming {
                method,
                seconds_per_test: total / tests_per_method as f64,
            })
            .collect()
    })
}

/// Empirical size of each method under the decaying null, one row per
/// method and nominal level.
pub fn run_calibration(cfg: &StudyConfig, alphas: &[f64]) -> Result<ExperimentReport> {
    cfg.validate()?;
    if alphas.is_empty() || alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return input("alphas must be a nonempty list of levels in [0, 1]");
    }
    let model = decaying_null(cfg.rows, cfg.cols)?;
    let point = simulate_point(cfg, &model, 0)?;
    let mut rows = Vec::new();
    for (k, &m) in cfg.methods.iter().enumerate() {
        for &a in alphas {
            rows.push(rate_row(m, a, &point.p_values[k], a));
        }
    }
    Ok(ExperimentReport {
        kind: StudyKind::Calibration,
        config: cfg.clone(),
        alpha: None,
        rows,
        timings: timings(cfg, &point.seconds, cfg.replicates),
    })
}

/// Rejection rate at level `alpha` of each method along a grid of
/// perturbation sizes.
pub fn run_power(cfg: &StudyConfig, eps_grid: &[f64], alpha: f64) -> Result<ExperimentReport> {
    cfg.validate()?;
    if eps_grid.is_empty() {
        return input("the eps grid is empty");
    }
    if !(0.0..=1.0).contains(&alpha) {
        return input(format!("alpha must lie in [0, 1], got {alpha}"));
    }
    let models: Vec<DecayingModel> = eps_grid
        .iter()
        .map(|&e| perturbed(cfg.rows, cfg.cols, e))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut seconds = vec![0.0; cfg.methods.len()];
    for (point, model) in models.iter().enumerate() {
        let res = simulate_point(cfg, model, point)?;
        for (k, &m) in cfg.methods.iter().enumerate() {
            rows.push(rate_row(m, model.eps(), &res.p_values[k], alpha));
            seconds[k] += res.seconds[k];
        }
    }
    // keep rows grouped by method, then by eps
    rows.sort_by_key(|r| cfg.methods.iter().position(|&m| m == r.method));
    Ok(ExperimentReport {
        kind: StudyKind::Power,
        config: cfg.clone(),
        alpha: Some(alpha),
        rows,
        timings: timings(cfg, &seconds, cfg.replicates * eps_grid.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::chronicity;

    fn small(methods: Vec<Method>) -> StudyConfig {
        StudyConfig {
            methods,
            replicates: 40,
            resamples: 49,
            seed: 17,
            ..StudyConfig::default()
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
        }
        assert!("chi2".parse::<Method>().is_err());
    }

    #[test]
    fn every_method_runs_on_chronicity() {
        let mut rng = RngStream::new(1).rng();
        for m in Method::ALL {
            let o = m.run(&chronicity(), 199, &mut rng).unwrap();
            assert!(o.p_value > 0.0 && o.p_value < 0.2, "{m}: {}", o.p_value);
        }
    }

    #[test]
    fn calibration_report_shape() {
        let cfg = small(vec![Method::Dcov, Method::G]);
        let r = run_calibration(&cfg, &[0.01, 0.05, 0.1]).unwrap();
        assert_eq!(r.rows.len(), 6);
        for row in &r.rows {
            assert!((0.0..=1.0).contains(&row.rate));
            assert_eq!(row.replicates, 40);
        }
        assert!(r.timings.is_none());
    }

    #[test]
    fn studies_are_deterministic() {
        let cfg = small(vec![Method::Dcov, Method::PearsonPerm]);
        let a = run_power(&cfg, &[0.0, 0.12], 0.05).unwrap();
        let b = run_power(&cfg, &[0.0, 0.12], 0.05).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn method_results_do_not_depend_on_companions() {
        let alone = run_calibration(&small(vec![Method::PearsonPerm]), &[0.05]).unwrap();
        let with =
            run_calibration(&small(vec![Method::Dcov, Method::PearsonPerm]), &[0.05]).unwrap();
        assert_eq!(alone.rows[0], with.rows[1]);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(run_calibration(&small(vec![]), &[0.05]).is_err());
        assert!(run_calibration(&small(vec![Method::Dcov]), &[]).is_err());
        assert!(run_power(&small(vec![Method::Dcov]), &[0.5], 0.05).is_err());
        let mut cfg = small(vec![Method::Fisher]);
        cfg.resamples = 0;
        assert!(run_calibration(&cfg, &[0.05]).is_err());
    }
}
