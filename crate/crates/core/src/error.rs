use thiserror::Error;

use crate::outcomes::Dose;

/// Invalid trial or study configuration. Each variant names the offending field.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("n: a trial needs at least one participant per arm on average (got {0})")]
    TooFewParticipants(usize),
    #[error("reps: at least one replication is required")]
    NoReplications,
    #[error("{field}: must be finite (got {value})")]
    NotFinite { field: &'static str, value: f64 },
    #[error("{field}: must be positive (got {value})")]
    NotPositive { field: &'static str, value: f64 },
    #[error("delta: bands collapse unless delta > 0.35 (got {0})")]
    DeltaTooSmall(f64),
    #[error("{field}: proportions must be non-negative (got {value})")]
    NegativeProportion { field: &'static str, value: f64 },
    #[error("{field}: proportions must sum to 1 (got {sum})")]
    ProportionsDoNotSum { field: &'static str, sum: f64 },
    #[error("binary-props: never-taker plus always-taker share exceeds 1 (got {0})")]
    NonComplierShareTooLarge(f64),
    #[error("binary-props: always-takers are not allowed with never-taker-only non-compliance")]
    AlwaysTakersWithoutType,
    #[error("scenario {scenario}: requires both never-takers and always-takers")]
    ScenarioNeedsAlwaysTakers { scenario: char },
    #[error("scenario {scenario}: requires partial compliance")]
    ScenarioNeedsPartial { scenario: char },
    #[error("threshold: cases other than I apply to partial compliance only")]
    ThresholdNeedsPartial,
}

/// A condition band scheme was asked for with a non-positive or degenerate delta.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BandError {
    #[error("delta must exceed 0.35 for non-degenerate bands (got {0})")]
    DegenerateDelta(f64),
}

/// Stratum classification applied outside binary compliance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ModeError {
    #[error("stratum undefined for non-binary doses ({under_treatment}, {under_control})")]
    NonBinaryDose {
        under_treatment: Dose,
        under_control: Dose,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EstimandError {
    #[error("trial has no participants")]
    EmptyTrial,
    #[error("complier set is empty (n_true_compliers = {n_true_compliers})")]
    NoCompliers { n_true_compliers: usize },
    #[error(transparent)]
    Mode(#[from] ModeError),
}

/// Failures while generating the random non-compliance layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocationError {
    #[error("quota proportions sum to {0}, expected 1")]
    ProportionsDoNotSum(f64),
    #[error("quota for the largest class would be negative for a group of {group_size}")]
    QuotaExceedsGroup { group_size: usize },
}

/// Why an estimator could not produce a number for one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EstimateError {
    #[error("sample too small for a variance estimate (sizes {n1} and {n0})")]
    SampleTooSmall { n1: usize, n0: usize },
    #[error("an arm is empty")]
    EmptyArm,
    #[error("an observed-complier subgroup is empty (treatment {treated}, control {control})")]
    EmptySubgroup { treated: usize, control: usize },
    #[error("first stage is exactly zero; the instrument is irrelevant")]
    IrrelevantInstrument,
    #[error("regressor has no variation")]
    DegenerateRegressor,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SummaryError {
    #[error("no usable replications for {method}")]
    NoUsableReplications { method: &'static str },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RequiredSimulationsError {
    #[error("{field}: must be positive (got {value})")]
    NotPositive { field: &'static str, value: f64 },
    #[error("alpha: must lie in (0, 1) (got {0})")]
    AlphaOutOfRange(f64),
}
