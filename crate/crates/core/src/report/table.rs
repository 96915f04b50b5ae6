use std::io::{Read, Write};

use crate::dgm::{NonComplierTypes, TrialConfig};
use crate::estimators::Method;
use crate::montecarlo::StudySummary;
use crate::outcomes::{ComplianceMode, ThresholdCase};
use crate::scenarios::Scenario;

use super::ReportError;

pub const CSV_HEADER: [&str; 16] = [
    "scenario",
    "compliance",
    "noncompliers",
    "delta",
    "threshold",
    "effect",
    "method",
    "truth",
    "estimate",
    "bias",
    "bias_se",
    "mse",
    "coverage_pct",
    "n_reps",
    "n_divergent",
    "excluded_divergent",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

/// One method's summary in one grid cell. Reals are held already rounded to
/// the four decimals that get printed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: Scenario,
    pub compliance: ComplianceMode,
    pub noncompliers: NonComplierTypes,
    pub delta: f64,
    pub threshold: ThresholdCase,
    pub effect: f64,
    pub method: Method,
    pub truth: f64,
    pub estimate: f64,
    pub bias: f64,
    pub bias_se: f64,
    pub mse: f64,
    pub coverage_pct: f64,
    pub n_reps: usize,
    pub n_divergent: usize,
    pub excluded_divergent: bool,
}

/// Rounds to four decimals, folding negative zero into zero.
pub fn round4(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let r: f64 = format!("{x:.4}").parse().unwrap_or(x);
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn fmt4(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{:.4}", round4(x))
    }
}

impl ResultRow {
    pub fn from_summary(config: &TrialConfig, summary: &StudySummary) -> Self {
        ResultRow {
            scenario: config.scenario,
            compliance: config.compliance,
            noncompliers: config.noncompliers,
            delta: round4(config.delta),
            threshold: config.threshold,
            effect: round4(config.effect),
            method: summary.method,
            truth: round4(summary.truth_mean),
            estimate: round4(summary.estimate_mean),
            bias: round4(summary.bias),
            bias_se: round4(summary.bias_mc_se),
            mse: round4(summary.mse),
            coverage_pct: round4(summary.coverage_pct),
            n_reps: summary.n_reps,
            n_divergent: summary.n_divergent,
            excluded_divergent: summary.excluded_divergent,
        }
    }

    /// Placeholder for a method with no usable replications.
    pub fn empty(config: &TrialConfig, method: Method, n_divergent: usize, excluded_divergent: bool) -> Self {
        ResultRow {
            scenario: config.scenario,
            compliance: config.compliance,
            noncompliers: config.noncompliers,
            delta: round4(config.delta),
            threshold: config.threshold,
            effect: round4(config.effect),
            method,
            truth: f64::NAN,
            estimate: f64::NAN,
            bias: f64::NAN,
            bias_se: f64::NAN,
            mse: f64::NAN,
            coverage_pct: f64::NAN,
            n_reps: 0,
            n_divergent,
            excluded_divergent,
        }
    }

    pub fn fields(&self) -> [String; 16] {
        [
            self.scenario.to_string(),
            self.compliance.to_string(),
            self.noncompliers.to_string(),
            fmt4(self.delta),
            self.threshold.to_string(),
            fmt4(self.effect),
            self.method.to_string(),
            fmt4(self.truth),
            fmt4(self.estimate),
            fmt4(self.bias),
            fmt4(self.bias_se),
            fmt4(self.mse),
            fmt4(self.coverage_pct),
            self.n_reps.to_string(),
            self.n_divergent.to_string(),
            self.excluded_divergent.to_string(),
        ]
    }

    fn from_fields(record: &csv::StringRecord) -> Result<Self, ReportError> {
        if record.len() != CSV_HEADER.len() {
            return Err(ReportError::Parse(format!(
                "expected {} fields, found {}",
                CSV_HEADER.len(),
                record.len()
            )));
        }
        let f = |i: usize| &record[i];
        let real = |i: usize| -> Result<f64, ReportError> {
            f(i).parse::<f64>()
                .map_err(|e| ReportError::Parse(format!("{}: {e}", CSV_HEADER[i])))
        };
        let count = |i: usize| -> Result<usize, ReportError> {
            f(i).parse::<usize>()
                .map_err(|e| ReportError::Parse(format!("{}: {e}", CSV_HEADER[i])))
        };
        Ok(ResultRow {
            scenario: text(0, f(0).parse())?,
            compliance: text(1, f(1).parse())?,
            noncompliers: text(2, f(2).parse())?,
            delta: real(3)?,
            threshold: text(4, f(4).parse())?,
            effect: real(5)?,
            method: text(6, f(6).parse())?,
            truth: real(7)?,
            estimate: real(8)?,
            bias: real(9)?,
            bias_se: real(10)?,
            mse: real(11)?,
            coverage_pct: real(12)?,
            n_reps: count(13)?,
            n_divergent: count(14)?,
            excluded_divergent: text(15, f(15).parse::<bool>().map_err(|e| e.to_string()))?,
        })
    }
}

fn text<T>(i: usize, r: Result<T, String>) -> Result<T, ReportError> {
    r.map_err(|e| ReportError::Parse(format!("{}: {e}", CSV_HEADER[i])))
}

pub fn emit_table<W: Write>(rows: &[ResultRow], format: TableFormat, out: W) -> Result<(), ReportError> {
    match format {
        TableFormat::Csv => emit_csv(rows, out),
        TableFormat::Markdown => emit_markdown(rows, out),
    }
}

fn emit_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), ReportError> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for row in rows {
        writer.write_record(row.fields())?;
    }
    writer.flush()?;
    Ok(())
}

/// One pipe table per scenario, scenarios in order of first appearance.
fn emit_markdown<W: Write>(rows: &[ResultRow], mut out: W) -> Result<(), ReportError> {
    let mut scenarios: Vec<Scenario> = Vec::new();
    for row in rows {
        if !scenarios.contains(&row.scenario) {
            scenarios.push(row.scenario);
        }
    }
    let columns = &CSV_HEADER[1..];
    for (i, scenario) in scenarios.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        writeln!(out, "### Scenario {scenario}")?;
        writeln!(out)?;
        writeln!(out, "| {} |", columns.join(" | "))?;
        writeln!(out, "|{}", "---|".repeat(columns.len()))?;
        for row in rows.iter().filter(|r| r.scenario == *scenario) {
            writeln!(out, "| {} |", row.fields()[1..].join(" | "))?;
        }
    }
    Ok(())
}

/// Reads rows back from the CSV form written by [`emit_table`].
pub fn parse_csv<R: Read>(input: R) -> Result<Vec<ResultRow>, ReportError> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(ReportError::Parse("unexpected header".to_string()));
    }
    reader
        .records()
        .map(|rec| ResultRow::from_fields(&rec?))
        .collect()
}
