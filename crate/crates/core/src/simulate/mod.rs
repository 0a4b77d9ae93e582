//! Simulation harness for the decaying-marginals model: table generation,
//! calibration and power studies, and their reports.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::tables::ContingencyTable;

mod report;
mod study;

pub use report::{CsvRow, ExperimentReport, MethodTiming, RateRow, StudyKind};
pub use study::{run_calibration, run_power, Method, StudyConfig};

/// Cell probabilities `p_ij` of an `I × J` table, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayingModel {
    rows: usize,
    cols: usize,
    eps: f64,
    cell_probs: Vec<f64>,
}

fn normalizer(rows: usize, cols: usize) -> f64 {
    (1.0 - 0.5f64.powi(rows as i32)) * (1.0 - 0.5f64.powi(cols as i32))
}

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows < 2 || cols < 2 {
        return input(format!("the model needs I, J >= 2, got {rows}x{cols}"));
    }
    if rows > 1000 || cols > 1000 {
        return input("the model is limited to 1000 rows and columns");
    }
    Ok(())
}

/// Largest perturbation keeping every cell probability in `[0, 1]`:
/// `min{[8c]⁻¹, 1 − [4c]⁻¹}` with `c = (1 − 2^{−I})(1 − 2^{−J})`.
pub fn epsilon_max(rows: usize, cols: usize) -> f64 {
    let c = normalizer(rows, cols);
    (1.0 / (8.0 * c)).min(1.0 - 1.0 / (4.0 * c))
}

/// Independent geometric margins, `p_ij = 2^{−(i+j)} / c` with 1-based `i, j`.
pub fn decaying_null(rows: usize, cols: usize) -> Result<DecayingModel> {
    perturbed(rows, cols, 0.0)
}

/// The null with `+ε` on cells (1,1), (2,2) and `−ε` on (1,2), (2,1).
/// Both margins are unchanged.
pub fn perturbed(rows: usize, cols: usize, eps: f64) -> Result<DecayingModel> {
    check_shape(rows, cols)?;
    let max = epsilon_max(rows, cols);
    if !(0.0..=max).contains(&eps) {
        return input(format!(
            "eps must lie in [0, {max:.6}] for {rows}x{cols}, got {eps}"
        ));
    }
    let c = normalizer(rows, cols);
    let mut cell_probs = Vec::with_capacity(rows * cols);
    for i in 1..=rows {
        for j in 1..=cols {
            cell_probs.push(0.5f64.powi((i + j) as i32) / c);
        }
    }
    cell_probs[0] += eps;
    cell_probs[cols + 1] += eps;
    cell_probs[1] -= eps;
    cell_probs[cols] -= eps;
    for p in &mut cell_probs {
        // rounding at the boundary ε = ε_max
        *p = p.clamp(0.0, 1.0);
    }
    Ok(DecayingModel {
        rows,
        cols,
        eps,
        cell_probs,
    })
}

impl DecayingModel {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cell_probs(&self) -> &[f64] {
        &self.cell_probs
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.cell_probs[i * self.cols + j]
    }

    pub fn row_margin(&self) -> Vec<f64> {
        self.cell_probs
            .chunks(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_margin(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.prob(i, j)).sum())
            .collect()
    }
}

/// `Multinomial(n, probs)` by sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(probs: &[f64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() {
            out[k] = left;
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let draw = Binomial::new(left, q).expect("q is in [0, 1]").sample(rng);
        out[k] = draw;
        left -= draw;
        mass -= p;
    }
    out
}

/// One multinomial table of `n` observations from the model.
pub fn sample_table<R: Rng + ?Sized>(
    model: &DecayingModel,
    n: u64,
    rng: &mut R,
) -> Result<ContingencyTable> {
    if n == 0 {
        return input("tables need n >= 1");
    }
    let counts = sample_multinomial(&model.cell_probs, n, rng);
    ContingencyTable::new(model.rows, model.cols, counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    #[test]
    fn null_values() {
        let m = decaying_null(4, 8).unwrap();
        assert!((m.prob(0, 0) - 0.267_71).abs() < 1e-5);
        let c = (1.0 - 1.0 / 16.0) * (1.0 - 1.0 / 256.0);
        assert!((m.prob(0, 0) - 0.25 / c).abs() < 1e-15);
        let total: f64 = m.cell_probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_is_rank_one() {
        let m = decaying_null(4, 8).unwrap();
        let (r, c) = (m.row_margin(), m.col_margin());
        for i in 0..4 {
            for j in 0..8 {
                assert!((m.prob(i, j) - r[i] * c[j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn epsilon_bounds() {
        // the binding constraint is the (1,2) cell: ε ≤ p_12 = 1/(8c)
        assert!((epsilon_max(4, 8) - 0.133_856).abs() < 1e-6);
        assert!((epsilon_max(5, 8) - 0.129_538).abs() < 1e-6);
        assert!((epsilon_max(60, 60) - 0.125).abs() < 1e-12);
        for i in 2..20 {
            for j in 2..20 {
                assert!(epsilon_max(i, j) > 0.0);
            }
        }
    }

    #[test]
    fn perturbation_at_the_limit_stays_valid() {
        let m = perturbed(4, 8, epsilon_max(4, 8)).unwrap();
        assert!(m.cell_probs().iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(perturbed(4, 8, 0.2).is_err());
        assert!(perturbed(4, 8, -0.01).is_err());
        assert_eq!(perturbed(4, 8, 0.0).unwrap(), decaying_null(4, 8).unwrap());
        assert!(decaying_null(1, 8).is_err());
    }

    #[test]
    fn multinomial_means() {
        let m = perturbed(3, 3, 0.05).unwrap();
        let n = 50u64;
        let draws = 100_000;
        let mut rng = RngStream::new(21).rng();
        let mut sums = [0u64; 9];
        for _ in 0..draws {
            let t = sample_table(&m, n, &mut rng).unwrap();
            assert_eq!(t.total(), n);
            for (s, c) in sums.iter_mut().zip(t.counts()) {
                *s += c;
            }
        }
        for (k, &s) in sums.iter().enumerate() {
            let p = m.cell_probs()[k];
            let mean = s as f64 / draws as f64;
            let se = (n as f64 * p * (1.0 - p) / draws as f64).sqrt();
            assert!((mean - n as f64 * p).abs() < 3.0 * se, "cell {k}");
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = decaying_null(4, 8).unwrap();
        let a = sample_table(&m, 100, &mut RngStream::new(5).substream(3)).unwrap();
        let b = sample_table(&m, 100, &mut RngStream::new(5).substream(3)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn perturbation_keeps_margins(rows in 2usize..10, cols in 2usize..10, frac in 0.0f64..=1.0) {
            let eps = frac * epsilon_max(rows, cols);
            let null = decaying_null(rows, cols).unwrap();
            let alt = perturbed(rows, cols, eps).unwrap();
            for (a, b) in null.row_margin().iter().zip(alt.row_margin()) {
                prop_assert!((a - b).abs() < 1e-15);
            }
            for (a, b) in null.col_margin().iter().zip(alt.col_margin()) {
                prop_assert!((a - b).abs() < 1e-15);
            }
            let total: f64 = alt.cell_probs().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
