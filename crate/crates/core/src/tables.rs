//! Categorical samples, two-way contingency tables and probability vectors.
//!
//! Category codes are dense and zero-based: a variable with `I` levels takes
//! values `0..I`. Empty rows and columns are kept; they change neither the
//! distance-covariance statistic nor its limit law, but they do change the
//! degrees of freedom of the χ²-based baselines.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::linalg::Matrix;

/// Tolerance on `Σ p = 1` for a [`ProbabilityVector`].
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// An IID sample of one categorical variable, or of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalSample {
    x: Vec<usize>,
    y: Option<Vec<usize>>,
    levels_x: usize,
    levels_y: Option<usize>,
    names_x: Vec<String>,
    names_y: Vec<String>,
}

impl CategoricalSample {
    /// Single-variable sample with codes in `0..levels`.
    pub fn single(x: Vec<usize>, levels: usize) -> Result<Self> {
        check_codes(&x, levels, "x")?;
        Ok(CategoricalSample {
            x,
            y: None,
            levels_x: levels,
            levels_y: None,
            names_x: default_names(levels),
            names_y: Vec::new(),
        })
    }

    /// Paired sample; `x[m]` and `y[m]` are the m-th observation.
    pub fn paired(x: Vec<usize>, y: Vec<usize>, levels_x: usize, levels_y: usize) -> Result<Self> {
        if x.len() != y.len() {
            return input(format!(
                "label sequences differ in length: {} vs {}",
                x.len(),
                y.len()
            ));
        }
        check_codes(&x, levels_x, "x")?;
        check_codes(&y, levels_y, "y")?;
        Ok(CategoricalSample {
            x,
            y: Some(y),
            levels_x,
            levels_y: Some(levels_y),
            names_x: default_names(levels_x),
            names_y: default_names(levels_y),
        })
    }

    fn with_names(mut self, names_x: Vec<String>, names_y: Vec<String>) -> Self {
        self.names_x = names_x;
        self.names_y = names_y;
        self
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[usize] {
        &self.x
    }

    pub fn y(&self) -> Option<&[usize]> {
        self.y.as_deref()
    }

    pub fn levels_x(&self) -> usize {
        self.levels_x
    }

    pub fn levels_y(&self) -> Option<usize> {
        self.levels_y
    }

    /// Original labels of the x categories, indexed by code.
    pub fn names_x(&self) -> &[String] {
        &self.names_x
    }

    pub fn names_y(&self) -> &[String] {
        &self.names_y
    }

    /// Per-category counts of the x variable.
    pub fn counts_x(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.levels_x];
        for &c in &self.x {
            counts[c] += 1;
        }
        counts
    }
}

fn check_codes(codes: &[usize], levels: usize, which: &str) -> Result<()> {
    if codes.is_empty() {
        return input("sample must contain at least one observation");
    }
    if let Some((m, &c)) = codes.iter().enumerate().find(|(_, &c)| c >= levels) {
        return input(format!(
            "{which}[{m}] = {c} is outside the category range 0..{levels}"
        ));
    }
    Ok(())
}

fn default_names(levels: usize) -> Vec<String> {
    (1..=levels).map(|k| k.to_string()).collect()
}

/// Observed `I × J` counts with cached margins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u64>>", into = "Vec<Vec<u64>>")]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    /// Builds a table from row-major counts. The total must be positive.
    pub fn new(rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return input("a contingency table needs at least one row and one column");
        }
        if counts.len() != rows * cols {
            return input(format!(
                "expected {} counts for a {rows}x{cols} table, got {}",
                rows * cols,
                counts.len()
            ));
        }
        let mut row_sums = vec![0u64; rows];
        let mut col_sums = vec![0u64; cols];
        for i in 0..rows {
            for j in 0..cols {
                let c = counts[i * cols + j];
                row_sums[i] += c;
                col_sums[j] += c;
            }
        }
        let total: u64 = row_sums.iter().sum();
        if total == 0 {
            return input("contingency table is empty (total count 0)");
        }
        Ok(ContingencyTable {
            rows,
            cols,
            counts,
            row_sums,
            col_sums,
            total,
        })
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
            return input(format!(
                "ragged table: row {} has {} entries, expected {ncols}",
                i + 1,
                rows[i].len()
            ));
        }
        let nrows = rows.len();
        Self::new(nrows, ncols, rows.into_iter().flatten().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `n_ij`.
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    /// Row-major counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.counts[i * self.cols..(i + 1) * self.cols]
    }

    /// `n_i·`.
    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    /// `n_·j`.
    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    /// `n`.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// `n*_ij = n_i· n_·j / n`.
    pub fn expected_counts(&self) -> Matrix {
        let n = self.total as f64;
        Matrix::from_fn(self.rows, self.cols, |i, j| {
            self.row_sums[i] as f64 * self.col_sums[j] as f64 / n
        })
    }

    /// Maximum-likelihood row distribution `n_i· / n`.
    pub fn row_distribution(&self) -> ProbabilityVector {
        ProbabilityVector::from_counts(&self.row_sums).expect("total is positive")
    }

    pub fn col_distribution(&self) -> ProbabilityVector {
        ProbabilityVector::from_counts(&self.col_sums).expect("total is positive")
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> ContingencyTable {
        let counts = (0..self.cols)
            .flat_map(|j| (0..self.rows).map(move |i| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        ContingencyTable::new(self.cols, self.rows, counts).expect("same total")
    }

    /// Rows and columns reordered: new row `k` is old row `row_order[k]`.
    pub fn permuted(&self, row_order: &[usize], col_order: &[usize]) -> Result<ContingencyTable> {
        if !is_permutation(row_order, self.rows) || !is_permutation(col_order, self.cols) {
            return input("row/column orders must be permutations of the table's indices");
        }
        let counts = row_order
            .iter()
            .flat_map(|&i| col_order.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        ContingencyTable::new(self.rows, self.cols, counts)
    }

    pub(crate) fn require_two_way(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return input(format!(
                "independence testing needs at least a 2x2 table, got {}x{}",
                self.rows, self.cols
            ));
        }
        Ok(())
    }
}

fn is_permutation(order: &[usize], len: usize) -> bool {
    let mut seen = vec![false; len];
    order.len() == len
        && order
            .iter()
            .all(|&k| k < len && !std::mem::replace(&mut seen[k], true))
}

impl TryFrom<Vec<Vec<u64>>> for ContingencyTable {
    type Error = Error;

    fn try_from(rows: Vec<Vec<u64>>) -> Result<Self> {
        ContingencyTable::from_rows(rows)
    }
}

impl From<ContingencyTable> for Vec<Vec<u64>> {
    fn from(t: ContingencyTable) -> Self {
        t.to_rows()
    }
}

impl fmt::Display for ContingencyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(u64::to_string).collect();
            writeln!(f, "{} | {}", cells.join(" "), self.row_sums[i])?;
        }
        let cols: Vec<String> = self.col_sums.iter().map(u64::to_string).collect();
        write!(f, "{} | {}", cols.join(" "), self.total)
    }
}

/// Cross-tabulates a paired sample into an `levels_x × levels_y` table.
pub fn table_from_samples(sample: &CategoricalSample) -> Result<ContingencyTable> {
    let (Some(y), Some(levels_y)) = (sample.y(), sample.levels_y()) else {
        return input("cross-tabulation needs a paired sample");
    };
    let cols = levels_y;
    let mut counts = vec![0u64; sample.levels_x() * cols];
    for (&xi, &yi) in sample.x().iter().zip(y) {
        counts[xi * cols + yi] += 1;
    }
    ContingencyTable::new(sample.levels_x(), cols, counts)
}

/// A distribution on `0..K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Validates nonnegativity and `|Σ p − 1| ≤ 1e-12`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return input("probability vector is empty");
        }
        if let Some(p) = probs
            .iter()
            .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            return input(format!("probability {p} is outside [0, 1]"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            return input(format!("probabilities sum to {sum}, not 1"));
        }
        Ok(ProbabilityVector(probs))
    }

    /// Relative frequencies of `counts`.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return input("cannot form frequencies from an all-zero count vector");
        }
        Self::new(counts.iter().map(|&c| c as f64 / n as f64).collect())
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return input("uniform distribution needs at least one category");
        }
        Ok(ProbabilityVector(vec![1.0 / k as f64; k]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// `Σ p_i²`, the probability that two independent draws coincide.
    pub fn collision_probability(&self) -> f64 {
        self.0.iter().map(|p| p * p).sum()
    }
}

impl<'de> Deserialize<'de> for ProbabilityVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        ProbabilityVector::new(v).map_err(serde::de::Error::custom)
    }
}

/// Reads a headerless CSV of nonnegative integer counts, one table row per line.
pub fn read_table_csv(path: impl AsRef<Path>) -> Result<ContingencyTable> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_table_csv(file)
}

/// Parses the table CSV format from any reader.
pub fn parse_table_csv(reader: impl std::io::Read) -> Result<ContingencyTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for field in record.iter() {
            let value: i64 = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("`{field}` is not an integer count"),
            })?;
            if value < 0 {
                return Err(Error::Parse {
                    line,
                    msg: format!("negative count {value}"),
                });
            }
            row.push(value as u64);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("ragged row: {} fields, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "no table rows found".into(),
        });
    }
    ContingencyTable::from_rows(rows)
}

/// Reads a count vector: a table CSV with a single row or a single column.
pub fn read_counts_csv(path: impl AsRef<Path>) -> Result<Vec<u64>> {
    let table = read_table_csv(path)?;
    if table.rows() == 1 || table.cols() == 1 {
        Ok(table.counts().to_vec())
    } else {
        input(format!(
            "expected a single row or column of counts, got a {}x{} table",
            table.rows(),
            table.cols()
        ))
    }
}

/// Reads a long-format sample file with header `x,y` (paired) or `x`.
///
/// Labels that all parse as positive integers are taken as 1-based category
/// indices, so the number of levels is the largest label and unobserved
/// categories below it are kept. Otherwise labels are treated as strings and
/// coded in sorted order.
pub fn read_samples_csv(path: impl AsRef<Path>) -> Result<CategoricalSample> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_samples_csv(file)
}

pub fn parse_samples_csv(reader: impl std::io::Read) -> Result<CategoricalSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_ascii_lowercase).collect();
    let paired = match header.as_slice() {
        [x] if x == "x" => false,
        [x, y] if x == "x" && y == "y" => true,
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header `x,y` or `x`, got `{}`", header.join(",")),
            })
        }
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse {
                line,
                msg: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| -> Result<String> {
            match record.get(k) {
                Some(s) if !s.is_empty() => Ok(s.to_string()),
                _ => Err(Error::Parse {
                    line,
                    msg: "missing label".into(),
                }),
            }
        };
        xs.push(field(0)?);
        if paired {
            ys.push(field(1)?);
        }
    }
    if xs.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "sample file has no observations".into(),
        });
    }
    let (x, names_x) = encode_labels(&xs);
    if paired {
        let (y, names_y) = encode_labels(&ys);
        let sample = CategoricalSample::paired(x, y, names_x.len(), names_y.len())?;
        Ok(sample.with_names(names_x, names_y))
    } else {
        let sample = CategoricalSample::single(x, names_x.len())?;
        Ok(sample.with_names(names_x, Vec::new()))
    }
}

fn encode_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let numeric: Option<Vec<usize>> = raw
        .iter()
        .map(|s| s.parse::<usize>().ok().filter(|&v| v >= 1))
        .collect();
    if let Some(values) = numeric {
        let levels = values.iter().copied().max().unwrap_or(0);
        let codes = values.into_iter().map(|v| v - 1).collect();
        return (codes, default_names(levels));
    }
    let mut names: Vec<String> = raw.to_vec();
    names.sort();
    names.dedup();
    let codes = raw
        .iter()
        .map(|s| names.binary_search(s).expect("label is present"))
        .collect();
    (codes, names)
}
