//! Distance-covariance test of independence for two categorical variables.
//!
//! With the discrete metric on both supports the V-statistic estimator of
//! squared distance covariance reduces to
//!
//! ```text
//! V̂ = n⁻² Σ_ij (n_ij − n_i· n_·j / n)²
//! ```
//!
//! and, under independence, `n V̂` converges in law to `Σ_ij λ_i μ_j Z_ij²`
//! where `λ` and `μ` are the eigenvalues of the multinomial covariance
//! matrices `diag(q) − q qᵀ` and `diag(r) − r rᵀ` of the two margins. The
//! asymptotic test plugs in the empirical margins.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::permutation::{permutation_p_value, TableStatistic};
use crate::error::{input, Error, Result};
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::outcome::{Calibration, TestMethod, TestOutcome};
use crate::quadform::{upper_tail, TailResult, WeightSpectrum};
use crate::tables::{CategoricalSample, ContingencyTable, ProbabilityVector};

/// Eigenvalues within this distance of zero are snapped to exactly zero.
pub const EIGEN_ZERO_TOL: f64 = 1e-12;

/// `V̂ = n⁻² Σ (n_ij − n*_ij)²`.
pub fn vstat(table: &ContingencyTable) -> f64 {
    let n = table.total() as f64;
    squared_deviation(table.counts(), table.row_sums(), table.col_sums()) / (n * n)
}

/// `Σ_ij (n_ij − n_i· n_·j / n)²` on raw row-major counts.
pub(crate) fn squared_deviation(counts: &[u64], row_sums: &[u64], col_sums: &[u64]) -> f64 {
    let n: u64 = row_sums.iter().sum();
    let inv_n = 1.0 / n as f64;
    let cols = col_sums.len();
    let mut acc = 0.0;
    for (i, &r) in row_sums.iter().enumerate() {
        let r = r as f64 * inv_n;
        for (j, &c) in col_sums.iter().enumerate() {
            let d = counts[i * cols + j] as f64 - r * c as f64;
            acc += d * d;
        }
    }
    acc
}

/// `V̂ = T̂₁ − 2T̂₂ + T̂₃` evaluated literally from pairwise discrete
/// distances, `O(n²)`. Independent of the table-based [`vstat`].
pub fn vstat_from_definition(sample: &CategoricalSample) -> Result<f64> {
    let Some(y) = sample.y() else {
        return input("distance covariance needs a paired sample");
    };
    let x = sample.x();
    let n = x.len();
    let d = |a: usize, b: usize| if a == b { 0.0 } else { 1.0 };

    let mut t1 = 0.0;
    let mut t2 = 0.0;
    let mut sum_dx = 0.0;
    let mut sum_dy = 0.0;
    for i in 0..n {
        let mut row_dx = 0.0;
        let mut row_dy = 0.0;
        for j in 0..n {
            let dx = d(x[i], x[j]);
            let dy = d(y[i], y[j]);
            t1 += dx * dy;
            row_dx += dx;
            row_dy += dy;
        }
        t2 += row_dx * row_dy;
        sum_dx += row_dx;
        sum_dy += row_dy;
    }
    let nf = n as f64;
    let t1 = t1 / (nf * nf);
    let t2 = t2 / (nf * nf * nf);
    let t3 = sum_dx * sum_dy / (nf * nf * nf * nf);
    Ok(t1 - 2.0 * t2 + t3)
}

/// `diag(p) − p pᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialCov {
    matrix: Matrix,
}

impl MultinomialCov {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

pub fn multinomial_cov(p: &ProbabilityVector) -> MultinomialCov {
    let p = p.probs();
    let k = p.len();
    MultinomialCov {
        matrix: Matrix::from_fn(k, k, |i, j| {
            if i == j {
                p[i] - p[i] * p[i]
            } else {
                -p[i] * p[j]
            }
        }),
    }
}

/// All eigenvalues in descending order, with round-off negatives and
/// near-zeros snapped to zero.
pub fn eigen_spectrum(m: &MultinomialCov) -> Result<WeightSpectrum> {
    let mut values = symmetric_eigenvalues(&m.matrix)?;
    for v in values.iter_mut() {
        if *v < -EIGEN_ZERO_TOL {
            return Err(Error::Input(format!(
                "matrix is not positive semidefinite (eigenvalue {v:e})"
            )));
        }
        if v.abs() <= EIGEN_ZERO_TOL {
            *v = 0.0;
        }
    }
    values.sort_by(|a, b| b.total_cmp(a));
    WeightSpectrum::new(values)
}

/// Eigenvalues of `diag(p) − p pᵀ` in descending order, without forming the
/// matrix.
///
/// Zero probabilities and the direction `1` give exact zeros, a value shared
/// by `c` categories is an eigenvalue of multiplicity `c − 1`, and the rest
/// are the roots of `1 = Σ_v c_v v² / (v − λ)` over the distinct positive
/// values `v`, one strictly between each consecutive pair.
pub fn multinomial_eigenvalues(p: &ProbabilityVector) -> Vec<f64> {
    let mut positive = Vec::with_capacity(p.len());
    positive.extend(p.probs().iter().copied().filter(|&v| v > 0.0));
    positive.sort_by(f64::total_cmp);
    let mut values = Vec::with_capacity(p.len());
    values.resize(p.len() - positive.len() + 1, 0.0);
    // (value, multiplicity · value²)
    let mut poles: Vec<(f64, f64)> = Vec::with_capacity(positive.len());
    for v in positive {
        match poles.last_mut() {
            Some(last) if last.0 == v => {
                last.1 += v * v;
                values.push(v);
            }
            _ => poles.push((v, v * v)),
        }
    }
    secular_roots(&poles, &mut values);
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Roots of `1 − Σ w / (v − λ)`, one between each pair of adjacent poles.
///
/// Each step replaces the poles on either side of a root by a single pole
/// plus a constant matching value and slope at the current iterate, and
/// takes the root of that two-pole model. The start keeps the two adjacent
/// poles exact and freezes the others at the midpoint. A bisection bracket
/// guards every step. The roots are iterated in lockstep since they are
/// independent.
fn secular_roots(poles: &[(f64, f64)], out: &mut Vec<f64>) {
    let mut roots: Vec<SecularRoot> = (0..poles.len().saturating_sub(1))
        .map(|left| SecularRoot::start(poles, left))
        .collect();
    for _ in 0..100 {
        let mut pending = false;
        for root in roots.iter_mut().filter(|r| !r.done) {
            root.step(poles);
            pending |= !root.done;
        }
        if !pending {
            break;
        }
    }
    out.extend(roots.iter().map(|r| r.origin + r.t));
}

/// Iterate for the root between poles `left` and `left + 1`, held as an
/// offset `t` from the left pole inside the bracket `(lo, hi)`.
struct SecularRoot {
    left: usize,
    origin: f64,
    gap: f64,
    t: f64,
    lo: f64,
    hi: f64,
    done: bool,
}

impl SecularRoot {
    fn start(poles: &[(f64, f64)], left: usize) -> Self {
        let origin = poles[left].0;
        let gap = poles[left + 1].0 - origin;
        let mid = 0.5 * gap;
        let others =
            pole_sums(&poles[..left], origin, mid).0 + pole_sums(&poles[left + 2..], origin, mid).0;
        let t = two_pole_root(1.0 - others, poles[left].1, poles[left + 1].1, gap);
        SecularRoot {
            left,
            origin,
            gap,
            t: if t > 0.0 && t < gap { t } else { mid },
            lo: 0.0,
            hi: gap,
            done: false,
        }
    }

    fn step(&mut self, poles: &[(f64, f64)]) {
        let SecularRoot {
            left,
            origin,
            gap,
            t,
            ..
        } = *self;
        // f = 1 − ψ − φ with ψ over poles at or left of the origin
        let (psi, dpsi) = pole_sums(&poles[..=left], origin, t);
        let (phi, dphi) = pole_sums(&poles[left + 1..], origin, t);
        let f = 1.0 - psi - phi;
        if f.abs() <= 8.0 * f64::EPSILON * (1.0 + phi - psi) {
            self.done = true;
            return;
        }
        // f decreases from +∞ to −∞ across the bracket
        if f > 0.0 {
            self.lo = t;
        } else {
            self.hi = t;
        }
        // ψ ≈ a − b/τ and φ ≈ c + d/(gap − τ) near t
        let b = dpsi * t * t;
        let d = dphi * (gap - t) * (gap - t);
        let e = 1.0 - (psi + b / t) - (phi - d / (gap - t));
        let model = two_pole_root(e, b, d, gap);
        let next = if model > self.lo && model < self.hi {
            model
        } else {
            0.5 * (self.lo + self.hi)
        };
        self.done = (next - t).abs() <= 4.0 * f64::EPSILON * (origin + next)
            || self.hi - self.lo <= 2.0 * f64::EPSILON * (origin + self.hi);
        self.t = next;
    }
}

/// `(Σ w/(v − λ), Σ w/(v − λ)²)` at `λ = origin + t`.
fn pole_sums(poles: &[(f64, f64)], origin: f64, t: f64) -> (f64, f64) {
    poles.iter().fold((0.0, 0.0), |(s, ds), &(v, w)| {
        let r = 1.0 / ((v - origin) - t);
        (s + w * r, ds + w * r * r)
    })
}

/// The root in `(0, gap)` of `e + b/τ − d/(gap − τ)` for `b, d > 0`, i.e. of
/// `e τ² − (e·gap − b − d) τ − b·gap`.
fn two_pole_root(e: f64, b: f64, d: f64, gap: f64) -> f64 {
    let lin = -(e * gap - b - d);
    let cst = -b * gap;
    let q = -0.5 * (lin + lin.signum() * (lin * lin - 4.0 * e * cst).max(0.0).sqrt());
    if lin >= 0.0 {
        cst / q
    } else {
        q / e
    }
}

/// Products `λ_i μ_j` of two spectra, zero products dropped.
pub fn product_spectrum(a: &WeightSpectrum, b: &WeightSpectrum) -> WeightSpectrum {
    let mut products = Vec::with_capacity(a.len() * b.len());
    products.extend(
        a.weights()
            .iter()
            .flat_map(|l| b.weights().iter().map(move |m| l * m))
            .filter(|&w| w > 0.0),
    );
    WeightSpectrum::new(products).expect("products of nonnegative weights")
}

/// Spectrum of the null limit law for a table's empirical margins.
pub fn null_spectrum(table: &ContingencyTable) -> Result<WeightSpectrum> {
    let rows = WeightSpectrum::new(multinomial_eigenvalues(&table.row_distribution()))?;
    let cols = WeightSpectrum::new(multinomial_eigenvalues(&table.col_distribution()))?;
    Ok(product_spectrum(&rows, &cols))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DcovCalibration {
    Asymptotic { tail: TailResult },
    Permutation { resamples: usize, mc_se: f64 },
}

/// Outcome of the distance-covariance independence test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceTestOutcome {
    /// `n V̂`.
    pub statistic: f64,
    pub vhat: f64,
    pub p_value: f64,
    /// The `λ_i μ_j` products of the plug-in limit law.
    pub spectrum: WeightSpectrum,
    pub calibration: DcovCalibration,
}

impl From<IndependenceTestOutcome> for TestOutcome {
    fn from(o: IndependenceTestOutcome) -> Self {
        let (method, calibration) = match o.calibration {
            DcovCalibration::Asymptotic { tail } => (
                TestMethod::Dcov,
                Calibration::Spectrum {
                    weights: o.spectrum,
                    tail_method: tail.method,
                    abs_error_bound: tail.abs_error_bound,
                },
            ),
            DcovCalibration::Permutation { resamples, mc_se } => (
                TestMethod::DcovPerm,
                Calibration::Resampling { resamples, mc_se },
            ),
        };
        TestOutcome {
            method,
            statistic: o.statistic,
            p_value: o.p_value,
            calibration,
        }
    }
}

fn degenerate_check(table: &ContingencyTable, spectrum: &WeightSpectrum) -> Result<()> {
    if spectrum.is_empty() {
        let rows = table.row_sums().iter().filter(|&&r| r > 0).count();
        let cols = table.col_sums().iter().filter(|&&c| c > 0).count();
        return Err(Error::Degenerate(format!(
            "only {rows} nonempty row(s) and {cols} nonempty column(s); \
             a variable with a single observed category carries no evidence \
             about dependence"
        )));
    }
    Ok(())
}

/// Asymptotic distance-covariance test.
pub fn dcov_independence_test(table: &ContingencyTable) -> Result<IndependenceTestOutcome> {
    table.require_two_way()?;
    let spectrum = null_spectrum(table)?;
    degenerate_check(table, &spectrum)?;
    let vhat = vstat(table);
    let statistic = table.total() as f64 * vhat;
    let tail = upper_tail(&spectrum, statistic)?;
    Ok(IndependenceTestOutcome {
        statistic,
        vhat,
        p_value: tail.p,
        spectrum,
        calibration: DcovCalibration::Asymptotic { tail },
    })
}

/// Same statistic calibrated by `resamples` Patefield tables with the
/// observed margins, `p = (1 + #{V* ≥ V̂}) / (B + 1)`.
pub fn dcov_permutation_test<R: Rng + ?Sized>(
    table: &ContingencyTable,
    resamples: usize,
    rng: &mut R,
) -> Result<IndependenceTestOutcome> {
    table.require_two_way()?;
    let spectrum = null_spectrum(table)?;
    degenerate_check(table, &spectrum)?;
    let vhat = vstat(table);
    let perm = permutation_p_value(table, TableStatistic::DcovV, resamples, rng)?;
    Ok(IndependenceTestOutcome {
        statistic: table.total() as f64 * vhat,
        vhat,
        p_value: perm.p_value,
        spectrum,
        calibration: DcovCalibration::Permutation {
            resamples,
            mc_se: perm.mc_se,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::chronicity;
    use crate::tables::table_from_samples;
    use proptest::prelude::*;

    fn table(rows: Vec<Vec<u64>>) -> ContingencyTable {
        ContingencyTable::from_rows(rows).unwrap()
    }

    #[test]
    fn vstat_examples() {
        assert_eq!(vstat(&table(vec![vec![5, 5], vec![5, 5]])), 0.0);
        assert!((vstat(&table(vec![vec![2, 0], vec![0, 2]])) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn definition_matches_on_small_samples() {
        let s = CategoricalSample::paired(vec![0, 1, 0, 1], vec![0, 1, 0, 1], 2, 2).unwrap();
        assert!((vstat_from_definition(&s).unwrap() - 0.25).abs() < 1e-15);
        let constant_y = CategoricalSample::paired(vec![0, 1, 2, 1, 0], vec![1; 5], 3, 2).unwrap();
        assert_eq!(vstat_from_definition(&constant_y).unwrap(), 0.0);
        let single = CategoricalSample::single(vec![0, 1], 2).unwrap();
        assert!(vstat_from_definition(&single).is_err());
    }

    #[test]
    fn multinomial_cov_examples() {
        let m = multinomial_cov(&ProbabilityVector::new(vec![0.5, 0.5]).unwrap());
        assert_eq!(
            m.matrix().to_rows(),
            vec![vec![0.25, -0.25], vec![-0.25, 0.25]]
        );
        let zero = multinomial_cov(&ProbabilityVector::new(vec![1.0, 0.0]).unwrap());
        assert!(zero.matrix().as_slice().iter().all(|&v| v == 0.0));
        for k in 2..9 {
            let u = multinomial_cov(&ProbabilityVector::uniform(k).unwrap());
            assert!((u.trace() - (1.0 - 1.0 / k as f64)).abs() < 1e-14);
            assert!(u.matrix().is_symmetric(0.0));
            for i in 0..k {
                assert!(u.matrix().row(i).iter().sum::<f64>().abs() < 1e-15);
            }
        }
    }

    #[test]
    fn eigen_spectrum_examples() {
        let s = eigen_spectrum(&multinomial_cov(
            &ProbabilityVector::new(vec![0.5, 0.5]).unwrap(),
        ))
        .unwrap();
        assert!((s.weights()[0] - 0.5).abs() < 1e-14);
        assert_eq!(s.weights()[1], 0.0);

        for k in [2usize, 3, 5, 10] {
            let s =
                eigen_spectrum(&multinomial_cov(&ProbabilityVector::uniform(k).unwrap())).unwrap();
            for w in &s.weights()[..k - 1] {
                assert!((w - 1.0 / k as f64).abs() < 1e-13);
            }
            assert_eq!(s.weights()[k - 1], 0.0);
        }

        let point = ProbabilityVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let s = eigen_spectrum(&multinomial_cov(&point)).unwrap();
        assert!(s.weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn secular_examples() {
        let half = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(multinomial_eigenvalues(&half), vec![0.5, 0.0]);
        let point = ProbabilityVector::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(multinomial_eigenvalues(&point), vec![0.0; 3]);
        // p = (1/6, 1/3, 1/2): nonzero eigenvalues have sum 11/18 (the trace)
        // and product 1/12 (sum of 2x2 principal minors), so (11 ± √13)/36
        let p = ProbabilityVector::new(vec![1.0 / 6.0, 1.0 / 3.0, 0.5]).unwrap();
        let fast = multinomial_eigenvalues(&p);
        let r = 13f64.sqrt();
        assert!((fast[0] - (11.0 + r) / 36.0).abs() < 1e-15);
        assert!((fast[1] - (11.0 - r) / 36.0).abs() < 1e-15);
        assert_eq!(fast[2], 0.0);
        // ties: (0.25, 0.25, 0.5) has 0.25 once from the tie
        let tied = ProbabilityVector::new(vec![0.25, 0.5, 0.25]).unwrap();
        let ev = multinomial_eigenvalues(&tied);
        assert!(ev.contains(&0.25));
        assert!((ev.iter().sum::<f64>() - (1.0 - 0.375)).abs() < 1e-15);
    }

    #[test]
    fn chronicity_asymptotic_p_value() {
        let o = dcov_independence_test(&chronicity()).unwrap();
        assert!((o.statistic - 1.054_529_306_9).abs() < 1e-9);
        assert!((o.p_value - 0.044).abs() < 0.005, "p = {}", o.p_value);
        assert_eq!(o.spectrum.len(), 6);
    }

    #[test]
    fn exact_independence_gives_unit_p() {
        let o = dcov_independence_test(&table(vec![vec![5, 5], vec![5, 5]])).unwrap();
        assert_eq!(o.statistic, 0.0);
        assert_eq!(o.p_value, 1.0);
    }

    #[test]
    fn single_nonempty_row_is_degenerate() {
        let t = table(vec![vec![3, 4, 5], vec![0, 0, 0]]);
        assert_eq!(vstat(&t), 0.0);
        assert!(matches!(
            dcov_independence_test(&t),
            Err(Error::Degenerate(_))
        ));
        let one_row = table(vec![vec![3, 4, 5]]);
        assert!(dcov_independence_test(&one_row).is_err());
    }

    #[test]
    fn spectrum_sum_is_product_of_traces() {
        let t = chronicity();
        let s = null_spectrum(&t).unwrap();
        let q = t.row_distribution().collision_probability();
        let r = t.col_distribution().collision_probability();
        assert!((s.mean() - (1.0 - q) * (1.0 - r)).abs() < 1e-9);
    }

    #[test]
    fn permutation_variant_on_chronicity() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let o = dcov_permutation_test(&chronicity(), 2999, &mut rng).unwrap();
        // the paper's USP permutation p-value is 0.047; the V-statistic
        // permutation p should land in the same neighbourhood
        assert!(o.p_value > 0.03 && o.p_value < 0.065, "p = {}", o.p_value);
        assert!(matches!(
            o.calibration,
            DcovCalibration::Permutation {
                resamples: 2999,
                ..
            }
        ));
    }

    fn small_table() -> impl Strategy<Value = ContingencyTable> {
        (2usize..6, 2usize..6).prop_flat_map(|(i, j)| {
            proptest::collection::vec(0u64..15, i * j)
                .prop_filter("nonempty", |v| v.iter().sum::<u64>() > 0)
                .prop_map(move |v| ContingencyTable::new(i, j, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn definition_equals_table_formula(
            (i, j, pairs) in (1usize..6, 1usize..6).prop_flat_map(|(i, j)| {
                (Just(i), Just(j), proptest::collection::vec((0..i, 0..j), 1..61))
            })
        ) {
            let (x, y): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let s = CategoricalSample::paired(x, y, i, j).unwrap();
            let lhs = vstat_from_definition(&s).unwrap();
            let rhs = vstat(&table_from_samples(&s).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-12, "{} vs {}", lhs, rhs);
        }

        #[test]
        fn invariant_under_relabelling(t in small_table(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut rows: Vec<usize> = (0..t.rows()).collect();
            let mut cols: Vec<usize> = (0..t.cols()).collect();
            rows.shuffle(&mut rng);
            cols.shuffle(&mut rng);
            let p = t.permuted(&rows, &cols).unwrap();
            prop_assert!((vstat(&t) - vstat(&p)).abs() < 1e-14);
            match (dcov_independence_test(&t), dcov_independence_test(&p)) {
                (Ok(a), Ok(b)) => prop_assert!((a.p_value - b.p_value).abs() < 1e-9),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn spectrum_trace_identity(t in small_table()) {
            let s = null_spectrum(&t).unwrap();
            let q = t.row_distribution().collision_probability();
            let r = t.col_distribution().collision_probability();
            prop_assert!((s.mean() - (1.0 - q) * (1.0 - r)).abs() < 1e-9);
        }

        #[test]
        fn secular_roots_match_jacobi(
            counts in proptest::collection::vec(0u64..50, 2..16)
                .prop_filter("nonempty", |v| v.iter().sum::<u64>() > 0)
        ) {
            let p = ProbabilityVector::from_counts(&counts).unwrap();
            let fast = multinomial_eigenvalues(&p);
            let jacobi = eigen_spectrum(&multinomial_cov(&p)).unwrap();
            prop_assert_eq!(fast.len(), jacobi.len());
            for (a, b) in fast.iter().zip(jacobi.weights()) {
                prop_assert!((a - b).abs() <= 1e-13, "{:?} vs {:?}", fast, jacobi.weights());
            }
        }

        #[test]
        fn multinomial_spectrum_is_psd_and_rank_deficient(
            counts in proptest::collection::vec(0u64..50, 2..12)
                .prop_filter("nonempty", |v| v.iter().sum::<u64>() > 0)
        ) {
            let p = ProbabilityVector::from_counts(&counts).unwrap();
            let s = eigen_spectrum(&multinomial_cov(&p)).unwrap();
            prop_assert!(s.weights().iter().all(|&w| w >= 0.0));
            prop_assert!(s.weights().windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(s.weights().contains(&0.0));
            prop_assert!((s.mean() - (1.0 - p.collision_probability())).abs() < 1e-12);
        }
    }
}
