use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::study::{Method, StudyConfig};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Calibration,
    Power,
}

/// Rejection count for one method at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub method: Method,
    /// Nominal level for calibration studies, ε for power studies.
    pub grid_value: f64,
    pub rejections: usize,
    /// Replicates on which the method returned an error; counted as
    /// non-rejections.
    pub failures: usize,
    pub replicates: usize,
    pub rate: f64,
    /// `sqrt(rate (1 − rate) / M)`.
    pub se: f64,
}

impl RateRow {
    pub fn new(
        method: Method,
        grid_value: f64,
        rejections: usize,
        failures: usize,
        replicates: usize,
    ) -> Self {
        let rate = rejections as f64 / replicates as f64;
        RateRow {
            method,
            grid_value,
            rejections,
            failures,
            replicates,
            rate,
            se: (rate * (1.0 - rate) / replicates as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: Method,
    pub seconds_per_test: f64,
}

/// Result of a calibration or power study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: StudyKind,
    pub config: StudyConfig,
    /// Level used for power studies.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    pub rows: Vec<RateRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<Vec<MethodTiming>>,
}

/// One line of the tidy CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub method: Method,
    pub eps_or_alpha: f64,
    pub rate: f64,
    pub se: f64,
}

impl ExperimentReport {
    pub fn rate(&self, method: Method, grid_value: f64) -> Option<&RateRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.grid_value == grid_value)
    }

    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &RateRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Writes `method,eps_or_alpha,rate,se`, one row per method and grid point.
    pub fn write_csv_to(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(CsvRow {
                method: r.method,
                eps_or_alpha: r.grid_value,
                rate: r.rate,
                se: r.se,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> ExperimentReport {
        ExperimentReport {
            kind: StudyKind::Power,
            config: StudyConfig::default(),
            alpha: Some(0.05),
            rows: vec![
                RateRow::new(Method::Dcov, 0.0, 5, 0, 100),
                RateRow::new(Method::Dcov, 0.1, 60, 1, 100),
            ],
            timings: None,
        }
    }

    #[test]
    fn se_formula() {
        let r = RateRow::new(Method::G, 0.05, 25, 0, 100);
        assert_eq!(r.rate, 0.25);
        assert!((r.se - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let r = report();
        assert_eq!(
            ExperimentReport::from_json(&r.to_json().unwrap()).unwrap(),
            r
        );
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        report().write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "method,eps_or_alpha,rate,se");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("dcov,0.1,0.6,"));
    }
}
