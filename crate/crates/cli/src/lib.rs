//! The `catenergy` command line: argument definitions and dispatch.

pub mod args;

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use catenergy::baselines::fisher_mc;
use catenergy::energy_gof::{energy_gof_test, pearson_gof_test};
use catenergy::quadform::upper_tail_with;
use catenergy::simulate::{run_calibration, run_power, ExperimentReport, StudyConfig};
use catenergy::tables::{read_counts_csv, read_samples_csv, read_table_csv, table_from_samples};
use catenergy::{
    upper_tail, Calibration, ContingencyTable, Error, ProbabilityVector, RngStream, TailMethod,
    TestOutcome, WeightSpectrum,
};

pub use args::Cli;
use args::{
    Command, GofArgs, GofMethodArg, IndependenceArgs, OutputArgs, QuadformArgs, SimulateCommand,
    StudyArgs, TailMethodArg, TestCommand,
};

/// Exit status for bad arguments or unreadable input.
pub const USAGE: u8 = 2;
/// Exit status for failures while computing.
pub const COMPUTATION: u8 = 1;

/// Test outcome plus the seed, for methods that draw random tables.
#[derive(Debug, Serialize)]
struct Envelope {
    #[serde(flatten)]
    outcome: TestOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

/// Bad input data or arguments are usage errors; anything that goes wrong
/// while computing is a computation error.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Input(_) | Error::Parse { .. } | Error::Csv(_) | Error::Io(_)) => USAGE,
        Some(_) => COMPUTATION,
        None => COMPUTATION,
    }
}

/// Runs a parsed command, writing its report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::Test(TestCommand::Independence(a)) => independence(a, out),
        Command::Test(TestCommand::Gof(a)) => gof(a, out),
        Command::Quadform(a) => quadform(a, out),
        Command::Simulate(SimulateCommand::Calibration(a)) => {
            let cfg = study_config(&a.study);
            let report = run_calibration(&cfg, &a.alphas)?;
            emit_report(&report, &a.study, out)
        }
        Command::Simulate(SimulateCommand::Power(a)) => {
            let cfg = study_config(&a.study);
            let report = run_power(&cfg, &a.eps.0, a.alpha)?;
            emit_report(&report, &a.study, out)
        }
    }
}

fn load_table(a: &IndependenceArgs) -> anyhow::Result<ContingencyTable> {
    if let Some(path) = &a.input {
        return read_table_csv(path).with_context(|| format!("reading {}", path.display()));
    }
    let path = a.samples.as_ref().expect("clap enforces one data source");
    let sample = read_samples_csv(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(table_from_samples(&sample)?)
}

fn independence(a: IndependenceArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let table = load_table(&a)?;
    let mut rng = RngStream::new(a.seed).rng();
    let outcome = match a.method.study_method() {
        Some(m) => m.run(&table, a.resamples, &mut rng)?,
        None => fisher_mc(&table, a.resamples, &mut rng)?,
    };
    let seed = matches!(outcome.calibration, Calibration::Resampling { .. }).then_some(a.seed);
    emit_outcome(&Envelope { outcome, seed }, &a.output, out)
}

fn gof(a: GofArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let counts =
        read_counts_csv(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let null = match a.null {
        Some(p) => ProbabilityVector::new(p)?,
        None => ProbabilityVector::uniform(counts.len())?,
    };
    let outcome = match a.method {
        GofMethodArg::Energy => energy_gof_test(&counts, &null)?,
        GofMethodArg::Pearson => pearson_gof_test(&counts, &null)?,
    };
    emit_outcome(
        &Envelope {
            outcome: outcome.into(),
            seed: None,
        },
        &a.output,
        out,
    )
}

fn quadform(a: QuadformArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let spectrum = WeightSpectrum::new(a.weights)?;
    let result = match a.method {
        None => upper_tail(&spectrum, a.x)?,
        Some(m) => {
            let method = match m {
                TailMethodArg::Farebrother => TailMethod::Farebrother,
                TailMethodArg::Imhof => TailMethod::Imhof,
            };
            let tol = a.tol.unwrap_or(match method {
                TailMethod::Farebrother => catenergy::quadform::SERIES_TOL,
                TailMethod::Imhof => catenergy::quadform::IMHOF_TOL,
            });
            upper_tail_with(&spectrum, a.x, method, tol)?
        }
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&result)?)?;
    Ok(())
}

fn emit_outcome(
    envelope: &Envelope,
    output: &OutputArgs,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    let json = serde_json::to_string_pretty(envelope)? + "\n";
    if let Some(path) = &output.out {
        write_file(path, json.as_bytes())?;
    }
    if output.json {
        out.write_all(json.as_bytes())?;
    } else {
        out.write_all(summary(envelope).as_bytes())?;
    }
    Ok(())
}

fn summary(e: &Envelope) -> String {
    let o = &e.outcome;
    let mut s = String::new();
    let _ = writeln!(s, "method       {}", o.method.as_str());
    let _ = writeln!(s, "statistic    {:.6}", o.statistic);
    let _ = writeln!(s, "p-value      {:.6}", o.p_value);
    let calibration = match &o.calibration {
        Calibration::Spectrum {
            weights,
            tail_method,
            abs_error_bound,
        } => format!(
            "weighted chi-squared, {} weights ({}, error bound {abs_error_bound:.1e})",
            weights.len(),
            match tail_method {
                TailMethod::Farebrother => "farebrother",
                TailMethod::Imhof => "imhof",
            }
        ),
        Calibration::ChiSquared { df } => format!("chi-squared, {df} df"),
        Calibration::Resampling { resamples, mc_se } => {
            format!("{resamples} resampled tables (MC standard error {mc_se:.2e})")
        }
        Calibration::Exact { tables } => format!("exact enumeration of {tables} tables"),
        Calibration::SupportViolation { categories } => {
            format!("counts on zero-probability categories {categories:?}")
        }
        Calibration::NoEvidence => "statistic is zero".into(),
    };
    let _ = writeln!(s, "calibration  {calibration}");
    if let Some(seed) = e.seed {
        let _ = writeln!(s, "seed         {seed}");
    }
    s
}

fn study_config(a: &StudyArgs) -> StudyConfig {
    StudyConfig {
        methods: a.methods.clone(),
        rows: a.rows,
        cols: a.cols,
        n: a.n,
        replicates: if a.full { 10_000 } else { a.replicates },
        resamples: a.resamples,
        seed: a.seed,
        record_timings: a.timings,
    }
}

fn emit_report(
    report: &ExperimentReport,
    a: &StudyArgs,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    if let Some(path) = &a.out {
        write_file(path, report.to_json()?.as_bytes())?;
    }
    if let Some(path) = &a.csv {
        let mut buf = Vec::new();
        report.write_csv_to(&mut buf)?;
        write_file(path, &buf)?;
    }
    if a.json {
        out.write_all(report.to_json()?.as_bytes())?;
    } else {
        out.write_all(report_summary(report).as_bytes())?;
    }
    Ok(())
}

fn report_summary(r: &ExperimentReport) -> String {
    let grid = match r.alpha {
        Some(alpha) => format!("eps (alpha = {alpha})"),
        None => "alpha".into(),
    };
    let mut s = format!("{:<14} {:>22} {:>8} {:>8}\n", "method", grid, "rate", "se");
    for row in &r.rows {
        let _ = write!(
            s,
            "{:<14} {:>22.4} {:>8.4} {:>8.4}",
            row.method.as_str(),
            row.grid_value,
            row.rate,
            row.se
        );
        if row.failures > 0 {
            let _ = write!(s, "  ({} failed)", row.failures);
        }
        s.push('\n');
    }
    for t in r.timings.iter().flatten() {
        let _ = writeln!(
            s,
            "{:<14} {:.3e} s per test",
            t.method.as_str(),
            t.seconds_per_test
        );
    }
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    std::fs::write(path, bytes)
        .map_err(Error::from)
        .with_context(|| format!("writing {}", path.display()))
}
