//! Shared fixtures for the benchmarks.

use catenergy::simulate::{decaying_null, sample_table};
use catenergy::{ContingencyTable, RngStream, WeightSpectrum};

/// `count` tables of `n` observations drawn from the `rows × cols` null model.
pub fn null_tables(
    rows: usize,
    cols: usize,
    n: u64,
    count: usize,
    seed: u64,
) -> Vec<ContingencyTable> {
    let model = decaying_null(rows, cols).expect("valid shape");
    let stream = RngStream::new(seed);
    (0..count as u64)
        .map(|r| sample_table(&model, n, &mut stream.substream(r)).expect("n >= 1"))
        .collect()
}

/// `dim` weights spaced geometrically from 1 down to `1 / spread`.
pub fn geometric_spectrum(dim: usize, spread: f64) -> WeightSpectrum {
    let ratio = if dim > 1 {
        spread.powf(-1.0 / (dim - 1) as f64)
    } else {
        1.0
    };
    WeightSpectrum::new((0..dim).map(|k| ratio.powi(k as i32)).collect()).expect("positive weights")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_the_requested_shape() {
        let tables = null_tables(4, 8, 100, 3, 1);
        assert_eq!(tables.len(), 3);
        assert!(tables
            .iter()
            .all(|t| t.rows() == 4 && t.cols() == 8 && t.total() == 100));
        let s = geometric_spectrum(5, 100.0);
        assert_eq!(s.weights()[0], 1.0);
        assert!((s.weights()[4] - 0.01).abs() < 1e-12);
    }
}
