//! ITT, per-protocol and IV/2SLS estimates from one realised trial.

mod regression;

pub use regression::SimpleRegressionFit;

use std::fmt;
use std::str::FromStr;

use crate::dgm::Trial;
use crate::error::{ConfigError, EstimateError};
use crate::outcomes::{Arm, Dose, ThresholdCase, TruthRecord};

/// Two-sided 95% normal critical value.
pub const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Itt,
    PerProtocol,
    InstrumentalVariables,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Itt, Method::PerProtocol, Method::InstrumentalVariables];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Itt => "ITT",
            Method::PerProtocol => "PP",
            Method::InstrumentalVariables => "IV",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub method: Method,
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub n_used: usize,
    /// Difference in mean dose between arms; IV only.
    pub first_stage: Option<f64>,
    pub divergent: bool,
}

impl EstimateRecord {
    fn with_normal_ci(method: Method, estimate: f64, se: f64, n_used: usize) -> Self {
        EstimateRecord {
            method,
            estimate,
            se,
            ci_lower: estimate - Z_975 * se,
            ci_upper: estimate + Z_975 * se,
            n_used,
            first_stage: None,
            divergent: false,
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }
}

/// Difference of sample means with the unpooled standard error.
pub fn difference_in_means(group1: &[f64], group0: &[f64]) -> Result<(f64, f64), EstimateError> {
    let (n1, n0) = (group1.len(), group0.len());
    if n1 < 2 || n0 < 2 {
        return Err(EstimateError::SampleTooSmall { n1, n0 });
    }
    let (m1, v1) = mean_and_variance(group1);
    let (m0, v0) = mean_and_variance(group0);
    Ok((m1 - m0, (v1 / n1 as f64 + v0 / n0 as f64).sqrt()))
}

/// Mean and unbiased variance.
fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

fn outcomes_where(trial: &Trial, keep: impl Fn(Arm, Dose) -> bool) -> Vec<f64> {
    trial
        .participants
        .iter()
        .filter(|p| keep(p.arm, p.dose_observed))
        .map(|p| p.y_observed)
        .collect()
}

pub fn itt(trial: &Trial) -> Result<EstimateRecord, EstimateError> {
    let treated = outcomes_where(trial, |arm, _| arm == Arm::Treatment);
    let control = outcomes_where(trial, |arm, _| arm == Arm::Control);
    if treated.is_empty() || control.is_empty() {
        return Err(EstimateError::EmptyArm);
    }
    let (estimate, se) = difference_in_means(&treated, &control)?;
    Ok(EstimateRecord::with_normal_ci(
        Method::Itt,
        estimate,
        se,
        treated.len() + control.len(),
    ))
}

/// Difference in mean outcome between observed compliers of each arm.
pub fn per_protocol(trial: &Trial, threshold: ThresholdCase) -> Result<EstimateRecord, EstimateError> {
    let treated = outcomes_where(trial, |arm, dose| arm == Arm::Treatment && threshold.admits(dose));
    let control = outcomes_where(trial, |arm, dose| arm == Arm::Control && dose == Dose::NONE);
    if treated.is_empty() || control.is_empty() {
        return Err(EstimateError::EmptySubgroup {
            treated: treated.len(),
            control: control.len(),
        });
    }
    let (estimate, se) = difference_in_means(&treated, &control)?;
    Ok(EstimateRecord::with_normal_ci(
        Method::PerProtocol,
        estimate,
        se,
        treated.len() + control.len(),
    ))
}

/// Both stages of the 2SLS fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStageFit {
    /// Dose on assignment.
    pub first: SimpleRegressionFit,
    /// Outcome on fitted dose.
    pub second: SimpleRegressionFit,
}

fn columns(trial: &Trial) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = trial.participants.len();
    let mut z = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for p in &trial.participants {
        z.push(p.arm.indicator());
        d.push(p.dose_observed.fraction());
        y.push(p.y_observed);
    }
    (z, d, y)
}

pub fn two_stage_fit(trial: &Trial) -> Result<TwoStageFit, EstimateError> {
    let (z, d, y) = columns(trial);
    let first = SimpleRegressionFit::fit(&z, &d)?;
    if first.slope == 0.0 {
        return Err(EstimateError::IrrelevantInstrument);
    }
    let fitted: Vec<f64> = z.iter().map(|&zi| first.predict(zi)).collect();
    let second = SimpleRegressionFit::fit(&fitted, &y)?;
    Ok(TwoStageFit { first, second })
}

/// Wald ratio of ITT effects on outcome and on dose, with the 2SLS standard error.
pub fn iv_two_stage(trial: &Trial) -> Result<EstimateRecord, EstimateError> {
    let mut sums = [[0.0f64; 2]; 2];
    let mut counts = [0usize; 2];
    for p in &trial.participants {
        let k = usize::from(p.arm == Arm::Treatment);
        sums[k][0] += p.y_observed;
        sums[k][1] += p.dose_observed.fraction();
        counts[k] += 1;
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(EstimateError::EmptyArm);
    }
    let mean = |k: usize, j: usize| sums[k][j] / counts[k] as f64;
    let first_stage = mean(1, 1) - mean(0, 1);
    if first_stage == 0.0 {
        return Err(EstimateError::IrrelevantInstrument);
    }
    let estimate = (mean(1, 0) - mean(0, 0)) / first_stage;

    let fit = two_stage_fit(trial)?;
    let (_, d, y) = columns(trial);
    let rss: f64 = d
        .iter()
        .zip(&y)
        .map(|(&di, &yi)| {
            let u = yi - fit.second.intercept - fit.second.slope * di;
            u * u
        })
        .sum();
    let n = trial.participants.len();
    let se = (rss / (n as f64 - 2.0) / fit.second.regressor_centered_sum_squares).sqrt();

    let mut record = EstimateRecord::with_normal_ci(Method::InstrumentalVariables, estimate, se, n);
    record.first_stage = Some(first_stage);
    Ok(record)
}

/// Thresholds that mark an IV replication as divergent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceCriterion {
    pub min_first_stage: f64,
    pub bias_multiple: f64,
}

impl Default for DivergenceCriterion {
    fn default() -> Self {
        DivergenceCriterion {
            min_first_stage: 0.01,
            bias_multiple: 5.0,
        }
    }
}

impl DivergenceCriterion {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.min_first_stage.is_finite() && self.min_first_stage >= 0.0) {
            return Err(ConfigError::NotPositive {
                field: "min-first-stage",
                value: self.min_first_stage,
            });
        }
        if !(self.bias_multiple > 0.0) {
            return Err(ConfigError::NotPositive {
                field: "bias-multiple",
                value: self.bias_multiple,
            });
        }
        Ok(())
    }
}

/// Near-zero first stage, or an estimate implausibly far from the truth.
pub fn detect_divergent(
    record: &EstimateRecord,
    truth: Option<&TruthRecord>,
    criterion: &DivergenceCriterion,
) -> bool {
    let weak = record
        .first_stage
        .is_some_and(|fs| fs.abs() < criterion.min_first_stage);
    let extreme = truth.is_some_and(|t| {
        (record.estimate - t.cace).abs() > criterion.bias_multiple * t.cace.abs().max(1.0)
    });
    weak || extreme || !record.estimate.is_finite()
}
