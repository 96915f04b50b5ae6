//! Text forms of design factors used on the command line and in tables.

use std::fmt;
use std::str::FromStr;

use crate::dgm::NonComplierTypes;
use crate::outcomes::{ComplianceMode, ThresholdCase};

impl fmt::Display for ComplianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComplianceMode::Binary => "binary",
            ComplianceMode::Partial => "partial",
        })
    }
}

impl FromStr for ComplianceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(ComplianceMode::Binary),
            "partial" => Ok(ComplianceMode::Partial),
            _ => Err(format!("unknown compliance '{s}' (expected binary or partial)")),
        }
    }
}

impl fmt::Display for NonComplierTypes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NonComplierTypes::NeverTakersOnly => "nt",
            NonComplierTypes::NeverAndAlwaysTakers => "nt-at",
        })
    }
}

impl FromStr for NonComplierTypes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nt" => Ok(NonComplierTypes::NeverTakersOnly),
            "nt-at" | "nt_at" => Ok(NonComplierTypes::NeverAndAlwaysTakers),
            _ => Err(format!("unknown non-complier types '{s}' (expected nt or nt-at)")),
        }
    }
}

impl fmt::Display for ThresholdCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdCase::I => "I",
            ThresholdCase::II => "II",
            ThresholdCase::III => "III",
            ThresholdCase::IV => "IV",
        })
    }
}

impl FromStr for ThresholdCase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ThresholdCase::ALL
            .into_iter()
            .find(|t| t.to_string() == s)
            .ok_or_else(|| format!("unknown threshold '{s}' (expected I, II, III or IV)"))
    }
}
