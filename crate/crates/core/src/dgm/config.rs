use crate::error::ConfigError;
use crate::estimators::DivergenceCriterion;
use crate::outcomes::{ComplianceMode, ThresholdCase};
use crate::scenarios::Scenario;

/// Which kinds of non-complier the trial admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NonComplierTypes {
    NeverTakersOnly,
    NeverAndAlwaysTakers,
}

/// Shares of the whole cohort that are never-takers and always-takers under
/// binary compliance. Everyone else complies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryProps {
    pub p_nt: f64,
    pub p_at: f64,
}

impl BinaryProps {
    pub fn main(types: NonComplierTypes) -> Self {
        match types {
            NonComplierTypes::NeverTakersOnly => BinaryProps { p_nt: 0.40, p_at: 0.0 },
            NonComplierTypes::NeverAndAlwaysTakers => BinaryProps { p_nt: 0.25, p_at: 0.15 },
        }
    }

    pub fn sensitivity(types: NonComplierTypes) -> Self {
        match types {
            NonComplierTypes::NeverTakersOnly => BinaryProps { p_nt: 0.60, p_at: 0.0 },
            NonComplierTypes::NeverAndAlwaysTakers => BinaryProps { p_nt: 0.40, p_at: 0.20 },
        }
    }

    pub fn p_noncomplier(&self) -> f64 {
        self.p_nt + self.p_at
    }

    pub fn p_complier(&self) -> f64 {
        1.0 - self.p_noncomplier()
    }
}

/// Probability of each dose level `0, 1/4, 1/2, 3/4, 1`, in that order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoseDistribution(pub [f64; 5]);

impl DoseDistribution {
    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn mean_dose(&self) -> f64 {
        self.0
            .iter()
            .enumerate()
            .map(|(q, p)| p * q as f64 / 4.0)
            .sum()
    }
}

/// Per-arm dose distributions for the random layer under partial compliance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialDoseProps {
    pub control: DoseDistribution,
    pub treatment: DoseDistribution,
}

impl PartialDoseProps {
    pub fn main() -> Self {
        PartialDoseProps {
            control: DoseDistribution([0.5, 0.2, 0.1, 0.1, 0.1]),
            treatment: DoseDistribution([0.1, 0.1, 0.1, 0.2, 0.5]),
        }
    }

    pub fn sensitivity() -> Self {
        PartialDoseProps {
            control: DoseDistribution([0.6, 0.1, 0.1, 0.1, 0.1]),
            treatment: DoseDistribution([0.3, 0.1, 0.1, 0.1, 0.4]),
        }
    }
}

/// Every knob of one simulated trial design.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub n: usize,
    /// Probability of assignment to treatment.
    pub p_treatment: f64,
    pub mu0: f64,
    pub sd0: f64,
    /// Mean treatment effect, `mu1 - mu0`.
    pub effect: f64,
    pub sd1: f64,
    pub compliance: ComplianceMode,
    pub noncompliers: NonComplierTypes,
    pub scenario: Scenario,
    pub delta: f64,
    pub threshold: ThresholdCase,
    pub binary_props: BinaryProps,
    pub partial_props: PartialDoseProps,
    pub reps: usize,
    pub master_seed: u64,
    pub divergence: DivergenceCriterion,
}

pub const DEFAULT_SEED: u64 = 20230401;

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig::design(
            ComplianceMode::Binary,
            NonComplierTypes::NeverAndAlwaysTakers,
            Scenario::Random,
        )
    }
}

impl TrialConfig {
    /// Main-analysis defaults for the given design cell.
    pub fn design(
        compliance: ComplianceMode,
        noncompliers: NonComplierTypes,
        scenario: Scenario,
    ) -> Self {
        TrialConfig {
            n: 350,
            p_treatment: 0.5,
            mu0: 74.0,
            sd0: 1.0,
            effect: -5.0,
            sd1: 1.0,
            compliance,
            noncompliers,
            scenario,
            delta: 0.5,
            threshold: ThresholdCase::I,
            binary_props: BinaryProps::main(noncompliers),
            partial_props: PartialDoseProps::main(),
            reps: 500,
            master_seed: DEFAULT_SEED,
            divergence: DivergenceCriterion::default(),
        }
    }

    /// Switches to the larger non-complier shares of the proportions sensitivity analysis.
    pub fn with_sensitivity_proportions(mut self) -> Self {
        self.binary_props = BinaryProps::sensitivity(self.noncompliers);
        self.partial_props = PartialDoseProps::sensitivity();
        self
    }

    pub fn mu1(&self) -> f64 {
        self.mu0 + self.effect
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 2 {
            return Err(ConfigError::TooFewParticipants(self.n));
        }
        if self.reps == 0 {
            return Err(ConfigError::NoReplications);
        }
        for (field, value) in [("mu0", self.mu0), ("effect", self.effect)] {
            if !value.is_finite() {
                return Err(ConfigError::NotFinite { field, value });
            }
        }
        for (field, value) in [("sd0", self.sd0), ("sd1", self.sd1)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::NotPositive { field, value });
            }
        }
        if !(self.p_treatment > 0.0 && self.p_treatment < 1.0) {
            return Err(ConfigError::NotPositive {
                field: "p_treatment",
                value: self.p_treatment,
            });
        }
        if !(self.delta.is_finite() && self.delta > 0.35) {
            return Err(ConfigError::DeltaTooSmall(self.delta));
        }
        self.validate_props()?;
        self.scenario
            .check_applicability(self.compliance, self.noncompliers)?;
        if self.compliance == ComplianceMode::Binary && self.threshold != ThresholdCase::I {
            return Err(ConfigError::ThresholdNeedsPartial);
        }
        self.divergence.validate()?;
        Ok(())
    }

    fn validate_props(&self) -> Result<(), ConfigError> {
        match self.compliance {
            ComplianceMode::Binary => {
                let BinaryProps { p_nt, p_at } = self.binary_props;
                for (field, value) in [("binary-props p_nt", p_nt), ("binary-props p_at", p_at)] {
                    if !(value.is_finite() && value >= 0.0) {
                        return Err(ConfigError::NegativeProportion { field, value });
                    }
                }
                if self.binary_props.p_noncomplier() > 1.0 + 1e-12 {
                    return Err(ConfigError::NonComplierShareTooLarge(
                        self.binary_props.p_noncomplier(),
                    ));
                }
                if self.noncompliers == NonComplierTypes::NeverTakersOnly && p_at > 0.0 {
                    return Err(ConfigError::AlwaysTakersWithoutType);
                }
            }
            ComplianceMode::Partial => {
                check_distribution("props control", &self.partial_props.control)?;
                check_distribution("props treatment", &self.partial_props.treatment)?;
            }
        }
        Ok(())
    }
}

fn check_distribution(field: &'static str, dist: &DoseDistribution) -> Result<(), ConfigError> {
    if let Some(&value) = dist.0.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(ConfigError::NegativeProportion { field, value });
    }
    let sum = dist.sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(ConfigError::ProportionsDoNotSum { field, sum });
    }
    Ok(())
}
