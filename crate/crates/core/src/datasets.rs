//! Reference data.

use crate::tables::ContingencyTable;

/// Chronicity of schizophrenia (rows: low, middle-low, middle-high, high)
/// against polygenic risk score tercile (columns: T1, T2, T3), n = 427.
pub fn chronicity() -> ContingencyTable {
    ContingencyTable::from_rows(vec![
        vec![12, 9, 4],
        vec![37, 20, 29],
        vec![40, 58, 44],
        vec![53, 55, 66],
    ])
    .expect("static table is valid")
}

/// Row labels of [`chronicity`].
pub const CHRONICITY_ROWS: [&str; 4] = ["Low", "Middle-low", "Middle-high", "High"];
/// Column labels of [`chronicity`].
pub const CHRONICITY_COLS: [&str; 3] = ["T1", "T2", "T3"];
