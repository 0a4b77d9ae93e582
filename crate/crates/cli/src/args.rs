use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use catenergy::simulate::Method;

/// Distance-covariance and energy tests for categorical data.
#[derive(Debug, Parser)]
#[command(name = "catenergy", version, about, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a hypothesis test on observed data.
    #[command(subcommand)]
    Test(TestCommand),
    /// Upper-tail probability of a weighted sum of χ²₁ variables.
    Quadform(QuadformArgs),
    /// Monte Carlo calibration and power studies on the decaying-marginals model.
    #[command(subcommand)]
    Simulate(SimulateCommand),
}

#[derive(Debug, Subcommand)]
pub enum TestCommand {
    /// Test independence of the rows and columns of a contingency table.
    Independence(IndependenceArgs),
    /// Test a vector of category counts against a fixed distribution.
    Gof(GofArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Print the JSON outcome to standard output instead of a summary.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON outcome to this file.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IndependenceMethod {
    Dcov,
    DcovPerm,
    Pearson,
    PearsonPerm,
    G,
    /// Exact for 2x2 tables, Monte Carlo otherwise.
    Fisher,
    /// Monte Carlo even for 2x2 tables.
    FisherMc,
    UspPerm,
}

impl IndependenceMethod {
    /// The library method, or `None` for `fisher-mc`.
    pub fn study_method(self) -> Option<Method> {
        Some(match self {
            IndependenceMethod::Dcov => Method::Dcov,
            IndependenceMethod::DcovPerm => Method::DcovPerm,
            IndependenceMethod::Pearson => Method::Pearson,
            IndependenceMethod::PearsonPerm => Method::PearsonPerm,
            IndependenceMethod::G => Method::G,
            IndependenceMethod::Fisher => Method::Fisher,
            IndependenceMethod::FisherMc => return None,
            IndependenceMethod::UspPerm => Method::UspPerm,
        })
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("data").required(true).args(["input", "samples"])))]
pub struct IndependenceArgs {
    /// Table CSV: one line per row, comma-separated counts, no header.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Long-format CSV with header `x,y`, one observation per line.
    #[arg(long, value_name = "PATH")]
    pub samples: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dcov")]
    pub method: IndependenceMethod,
    /// Resampled tables for permutation and Monte Carlo methods.
    #[arg(
        long = "B",
        alias = "resamples",
        value_name = "B",
        default_value_t = 999
    )]
    pub resamples: usize,
    #[arg(long, env = "CATENERGY_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GofMethodArg {
    Energy,
    Pearson,
}

#[derive(Debug, Args)]
pub struct GofArgs {
    /// Counts CSV: a single row or a single column.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Null probabilities, comma-separated; uniform when omitted.
    #[arg(long, value_delimiter = ',', value_name = "P1,P2,...")]
    pub null: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "energy")]
    pub method: GofMethodArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TailMethodArg {
    Farebrother,
    Imhof,
}

#[derive(Debug, Args)]
pub struct QuadformArgs {
    /// Nonnegative weights, comma-separated.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_negative_numbers = true
    )]
    pub weights: Vec<f64>,
    /// The point at which to evaluate P(Q > x).
    #[arg(long, allow_negative_numbers = true)]
    pub x: f64,
    /// Force one evaluator; by default the series runs first with Imhof as fallback.
    #[arg(long, value_enum)]
    pub method: Option<TailMethodArg>,
    /// Absolute error target for the forced evaluator.
    #[arg(long, requires = "method")]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Empirical size at each nominal level under the null model.
    Calibration(CalibrationArgs),
    /// Rejection rate along a grid of perturbations.
    Power(PowerArgs),
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Comma-separated methods: dcov, dcov-perm, pearson, pearson-perm, g, fisher, usp-perm.
    #[arg(long, value_delimiter = ',', default_value = "dcov,pearson-perm,g")]
    pub methods: Vec<Method>,
    #[arg(long = "I", alias = "rows", value_name = "I", default_value_t = 4)]
    pub rows: usize,
    #[arg(long = "J", alias = "cols", value_name = "J", default_value_t = 8)]
    pub cols: usize,
    /// Observations per table.
    #[arg(long, default_value_t = 100)]
    pub n: u64,
    /// Replicate tables per grid point.
    #[arg(
        long = "M",
        alias = "replicates",
        value_name = "M",
        default_value_t = 2000
    )]
    pub replicates: usize,
    /// Use 10000 replicates per grid point.
    #[arg(long, conflicts_with = "replicates")]
    pub full: bool,
    #[arg(
        long = "B",
        alias = "resamples",
        value_name = "B",
        default_value_t = 999
    )]
    pub resamples: usize,
    #[arg(long, env = "CATENERGY_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Record mean wall-clock seconds per test (makes the output run-dependent).
    #[arg(long)]
    pub timings: bool,
    /// Write the JSON report here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Write the tidy CSV (method,eps_or_alpha,rate,se) here.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Print the JSON report to standard output instead of a summary.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CalibrationArgs {
    #[command(flatten)]
    pub study: StudyArgs,
    /// Nominal levels, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1")]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[command(flatten)]
    pub study: StudyArgs,
    /// `start:stop:points` for an evenly spaced grid, or a comma-separated list.
    #[arg(long, value_parser = parse_grid, default_value = "0:0.1295:14")]
    pub eps: Grid,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let number = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{t}` is not a number"))
    };
    if let [a, b, k] = s.split(':').collect::<Vec<_>>()[..] {
        let (a, b) = (number(a)?, number(b)?);
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| format!("`{k}` is not a point count"))?;
        return match k {
            0 => Err("a grid needs at least one point".into()),
            1 => Ok(Grid(vec![a])),
            _ => {
                let step = (b - a) / (k - 1) as f64;
                let mut v: Vec<f64> = (0..k - 1).map(|i| a + step * i as f64).collect();
                v.push(b);
                Ok(Grid(v))
            }
        };
    }
    if s.contains(':') {
        return Err("expected start:stop:points".into());
    }
    s.split(',').map(number).collect::<Result<_, _>>().map(Grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("0:1:3").unwrap(), Grid(vec![0.0, 0.5, 1.0]));
        assert_eq!(parse_grid("0.2").unwrap(), Grid(vec![0.2]));
        assert_eq!(parse_grid("0, 0.1").unwrap(), Grid(vec![0.0, 0.1]));
        let g = parse_grid("0:0.1295:8").unwrap().0;
        assert_eq!(g.len(), 8);
        assert_eq!(*g.last().unwrap(), 0.1295);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("a,b").is_err());
    }
}
