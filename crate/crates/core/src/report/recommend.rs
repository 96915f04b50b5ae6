use std::fmt;

use crate::dgm::NonComplierTypes;
use crate::error::ConfigError;
use crate::outcomes::ComplianceMode;
use crate::scenarios::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recommendation {
    Iv,
    Pp,
    Either,
    /// IV, but screen for divergent replications first.
    IvWithCaveat,
}

impl fmt::Display for Recommendation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Recommendation::Iv => "IV",
            Recommendation::Pp => "PP",
            Recommendation::Either => "Either",
            Recommendation::IvWithCaveat => "IV-with-caveat",
        })
    }
}

/// Preferred CACE estimator for a non-compliance setting.
pub fn recommend_method(
    compliance: ComplianceMode,
    noncompliers: NonComplierTypes,
    scenario: Scenario,
) -> Result<Recommendation, ConfigError> {
    scenario.check_applicability(compliance, noncompliers)?;
    Ok(match (compliance, noncompliers) {
        (ComplianceMode::Binary, _) => Recommendation::Iv,
        (ComplianceMode::Partial, NonComplierTypes::NeverTakersOnly) => Recommendation::Pp,
        (ComplianceMode::Partial, NonComplierTypes::NeverAndAlwaysTakers) => match scenario {
            Scenario::Random => Recommendation::Either,
            Scenario::A | Scenario::B => Recommendation::Pp,
            Scenario::C | Scenario::D => Recommendation::Either,
            Scenario::E | Scenario::F => Recommendation::Iv,
            Scenario::G | Scenario::H => Recommendation::IvWithCaveat,
        },
    })
}
