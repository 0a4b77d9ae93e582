//! Random tables with fixed margins (Patefield's algorithm).
//!
//! Cells are filled row by row, left to right. Given what has been placed so
//! far, the count in cell `(l, m)` is hypergeometric: row `l` still needs `a`
//! items, column `m` still has `c`, and `E` items remain in columns `m..`
//! of rows `l..`. Each draw inverts the hypergeometric CDF starting from the
//! mode and stepping outward, with probabilities from a log-factorial table.
//! The result is a draw from the conditional law of the table given both
//! margins under independence (the multiple hypergeometric law), which is
//! the permutation null.

use rand::Rng;

use crate::error::{input, Result};
use crate::tables::ContingencyTable;

/// `ln k!` for `k = 0..=n`.
pub fn log_factorials(n: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Reusable sampler for one pair of margins.
#[derive(Debug, Clone)]
pub struct PatefieldSampler {
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    ln_fact: Vec<f64>,
    col_left: Vec<u64>,
}

impl PatefieldSampler {
    pub fn new(row_sums: &[u64], col_sums: &[u64]) -> Result<Self> {
        let n: u64 = row_sums.iter().sum();
        let m: u64 = col_sums.iter().sum();
        if n != m {
            return input(format!("row margins sum to {n} but column margins to {m}"));
        }
        if n == 0 || row_sums.is_empty() || col_sums.is_empty() {
            return input("margins must describe a nonempty table");
        }
        Ok(PatefieldSampler {
            row_sums: row_sums.to_vec(),
            col_sums: col_sums.to_vec(),
            ln_fact: log_factorials(n),
            col_left: vec![0; col_sums.len()],
        })
    }

    pub fn rows(&self) -> usize {
        self.row_sums.len()
    }

    pub fn cols(&self) -> usize {
        self.col_sums.len()
    }

    pub fn log_factorials(&self) -> &[f64] {
        &self.ln_fact
    }

    /// Fills `out` (row-major, `rows × cols`) with a random table.
    pub fn sample_into<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [u64]) {
        let rows = self.row_sums.len();
        let cols = self.col_sums.len();
        debug_assert_eq!(out.len(), rows * cols);
        self.col_left.copy_from_slice(&self.col_sums);
        let mut remaining: u64 = self.row_sums.iter().sum();

        for l in 0..rows - 1 {
            let mut need = self.row_sums[l];
            let mut pool = remaining;
            remaining -= need;
            let row = &mut out[l * cols..(l + 1) * cols];
            for m in 0..cols - 1 {
                let avail = self.col_left[m];
                let x = if need == 0 {
                    0
                } else {
                    hypergeometric(&self.ln_fact, pool, avail, need, rng)
                };
                row[m] = x;
                need -= x;
                pool -= avail;
                self.col_left[m] -= x;
            }
            row[cols - 1] = need;
            self.col_left[cols - 1] -= need;
        }
        out[(rows - 1) * cols..].copy_from_slice(&self.col_left);
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> ContingencyTable {
        let mut out = vec![0u64; self.rows() * self.cols()];
        self.sample_into(rng, &mut out);
        ContingencyTable::new(self.rows(), self.cols(), out).expect("margins are nonempty")
    }
}

/// One-shot draw of a table with the given margins.
pub fn patefield_sample<R: Rng + ?Sized>(
    row_sums: &[u64],
    col_sums: &[u64],
    rng: &mut R,
) -> Result<ContingencyTable> {
    Ok(PatefieldSampler::new(row_sums, col_sums)?.sample(rng))
}

/// Successes among `draws` items taken without replacement from `pool`
/// items of which `marked` are successes.
fn hypergeometric<R: Rng + ?Sized>(
    ln_fact: &[f64],
    pool: u64,
    marked: u64,
    draws: u64,
    rng: &mut R,
) -> u64 {
    let unmarked = pool - marked;
    let lo = draws.saturating_sub(unmarked);
    let hi = draws.min(marked);
    if lo == hi {
        return lo;
    }
    let lf = |k: u64| ln_fact[k as usize];
    let ln_pmf = |x: u64| {
        lf(marked) - lf(x) - lf(marked - x) + lf(unmarked)
            - lf(draws - x)
            - lf(unmarked + x - draws)
            - lf(pool)
            + lf(draws)
            + lf(pool - draws)
    };
    // mode of the hypergeometric law
    let mode = (((draws + 1) as f64 * (marked + 1) as f64) / (pool + 2) as f64).floor() as u64;
    let mode = mode.clamp(lo, hi);

    let u: f64 = rng.random();
    let p_mode = ln_pmf(mode).exp();
    let mut cum = p_mode;
    if u <= cum {
        return mode;
    }
    // walk outward, always taking the more probable neighbour next
    let (mut up, mut p_up) = (mode, p_mode);
    let (mut down, mut p_down) = (mode, p_mode);
    loop {
        let next_up = (up < hi).then(|| {
            let x = up;
            p_up * ((marked - x) as f64 * (draws - x) as f64)
                / ((x + 1) as f64 * (unmarked + x + 1 - draws) as f64)
        });
        let next_down = (down > lo).then(|| {
            let x = down;
            p_down * (x as f64 * (unmarked + x - draws) as f64)
                / ((marked - x + 1) as f64 * (draws - x + 1) as f64)
        });
        match (next_up, next_down) {
            (Some(pu), Some(pd)) if pu >= pd => {
                up += 1;
                p_up = pu;
                cum += pu;
                if u <= cum {
                    return up;
                }
            }
            (_, Some(pd)) => {
                down -= 1;
                p_down = pd;
                cum += pd;
                if u <= cum {
                    return down;
                }
            }
            (Some(pu), None) => {
                up += 1;
                p_up = pu;
                cum += pu;
                if u <= cum {
                    return up;
                }
            }
            // rounding left u just above the accumulated mass
            (None, None) => return mode,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_unit_margins_split_evenly() {
        let mut rng = RngStream::new(1).rng();
        let mut sampler = PatefieldSampler::new(&[1, 1], &[1, 1]).unwrap();
        let draws = 100_000;
        let mut diag = 0;
        for _ in 0..draws {
            let t = sampler.sample(&mut rng);
            if t.get(0, 0) == 1 {
                diag += 1;
            }
        }
        let freq = diag as f64 / draws as f64;
        let se = (0.25 / draws as f64).sqrt();
        assert!((freq - 0.5).abs() < 3.0 * se, "freq {freq}");
    }

    #[test]
    fn two_by_two_margins_two_match_hypergeometric() {
        let mut rng = RngStream::new(2).rng();
        let mut sampler = PatefieldSampler::new(&[2, 2], &[2, 2]).unwrap();
        let draws = 100_000;
        let mut hist = [0usize; 3];
        for _ in 0..draws {
            hist[sampler.sample(&mut rng).get(0, 0) as usize] += 1;
        }
        for (k, expected) in [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0].iter().enumerate() {
            let freq = hist[k] as f64 / draws as f64;
            let se = (expected * (1.0 - expected) / draws as f64).sqrt();
            assert!(
                (freq - expected).abs() < 3.0 * se,
                "n11={k}: {freq} vs {expected}"
            );
        }
    }

    #[test]
    fn three_by_three_matches_enumerated_law() {
        // all tables with margins (2,1,1) x (2,1,1), weights ∝ 1/Π n_ij!
        let rows = [2u64, 1, 1];
        let cols = [2u64, 1, 1];
        let mut tables: Vec<(Vec<u64>, f64)> = Vec::new();
        for a in 0..=2u64 {
            for b in 0..=1u64 {
                for c in 0..=1u64 {
                    for d in 0..=1u64 {
                        for e in 0..=1u64 {
                            for f in 0..=1u64 {
                                let r0 = [a, b, c];
                                let r1 = [d, e, f];
                                if r0.iter().sum::<u64>() != 2 || r1.iter().sum::<u64>() != 1 {
                                    continue;
                                }
                                let r2: Vec<i64> = (0..3)
                                    .map(|j| cols[j] as i64 - r0[j] as i64 - r1[j] as i64)
                                    .collect();
                                if r2.iter().any(|&v| v < 0) || r2.iter().sum::<i64>() != 1 {
                                    continue;
                                }
                                let mut cells: Vec<u64> = r0.to_vec();
                                cells.extend_from_slice(&r1);
                                cells.extend(r2.iter().map(|&v| v as u64));
                                let w: f64 = cells
                                    .iter()
                                    .map(|&k| 1.0 / (1..=k).product::<u64>() as f64)
                                    .product();
                                tables.push((cells, w));
                            }
                        }
                    }
                }
            }
        }
        let total: f64 = tables.iter().map(|t| t.1).sum();
        let mut sampler = PatefieldSampler::new(&rows, &cols).unwrap();
        let mut rng = RngStream::new(3).rng();
        let draws = 200_000;
        let mut counts = vec![0usize; tables.len()];
        for _ in 0..draws {
            let t = sampler.sample(&mut rng);
            let k = tables.iter().position(|(c, _)| c == t.counts()).unwrap();
            counts[k] += 1;
        }
        for ((_, w), &hits) in tables.iter().zip(&counts) {
            let p = w / total;
            let freq = hits as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() < 4.0 * se, "{freq} vs {p}");
        }
    }

    #[test]
    fn rejects_inconsistent_margins() {
        assert!(PatefieldSampler::new(&[1, 2], &[1, 1]).is_err());
        assert!(PatefieldSampler::new(&[0, 0], &[0, 0]).is_err());
    }

    proptest! {
        #[test]
        fn margins_are_exact(
            rows in proptest::collection::vec(0u64..40, 1..7),
            cols_shape in proptest::collection::vec(1u64..10, 1..8),
            seed in any::<u64>(),
        ) {
            let n: u64 = rows.iter().sum();
            prop_assume!(n > 0);
            // spread n over the columns proportionally to cols_shape
            let w: u64 = cols_shape.iter().sum();
            let mut cols: Vec<u64> = cols_shape.iter().map(|c| c * n / w).collect();
            let short = n - cols.iter().sum::<u64>();
            cols[0] += short;
            let mut rng = RngStream::new(seed).rng();
            let t = patefield_sample(&rows, &cols, &mut rng).unwrap();
            prop_assert_eq!(t.row_sums(), rows.as_slice());
            prop_assert_eq!(t.col_sums(), cols.as_slice());
        }
    }
}
