//! Non-random non-compliance: condition bands on `Y(0)` and the eight
//! scenario overrides layered on top of the random non-compliance.

use std::fmt;
use std::str::FromStr;

use crate::dgm::{NonComplierTypes, Trial};
use crate::error::{BandError, ConfigError};
use crate::outcomes::{Arm, ComplianceMode, Dose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    Random,
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
}

impl Scenario {
    pub const ALL: [Scenario; 9] = [
        Scenario::Random,
        Scenario::A,
        Scenario::B,
        Scenario::C,
        Scenario::D,
        Scenario::E,
        Scenario::F,
        Scenario::G,
        Scenario::H,
    ];

    pub fn is_random(self) -> bool {
        self == Scenario::Random
    }

    pub fn letter(self) -> Option<char> {
        match self {
            Scenario::Random => None,
            Scenario::A => Some('A'),
            Scenario::B => Some('B'),
            Scenario::C => Some('C'),
            Scenario::D => Some('D'),
            Scenario::E => Some('E'),
            Scenario::F => Some('F'),
            Scenario::G => Some('G'),
            Scenario::H => Some('H'),
        }
    }

    pub fn needs_always_takers(self) -> bool {
        matches!(self, Scenario::C | Scenario::D | Scenario::E | Scenario::F)
    }

    pub fn needs_partial(self) -> bool {
        matches!(self, Scenario::G | Scenario::H)
    }

    pub fn check_applicability(
        self,
        compliance: ComplianceMode,
        noncompliers: NonComplierTypes,
    ) -> Result<(), ConfigError> {
        if let Some(scenario) = self.letter() {
            if self.needs_always_takers() && noncompliers != NonComplierTypes::NeverAndAlwaysTakers {
                return Err(ConfigError::ScenarioNeedsAlwaysTakers { scenario });
            }
            if self.needs_partial() && compliance != ComplianceMode::Partial {
                return Err(ConfigError::ScenarioNeedsPartial { scenario });
            }
        }
        Ok(())
    }

    /// Scenarios valid for a compliance mode and non-complier setting, in table order.
    pub fn applicable(compliance: ComplianceMode, noncompliers: NonComplierTypes) -> Vec<Scenario> {
        Scenario::ALL
            .into_iter()
            .filter(|s| s.check_applicability(compliance, noncompliers).is_ok())
            .collect()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.letter() {
            None => f.write_str("random"),
            Some(c) => write!(f, "{c}"),
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("random") {
            return Ok(Scenario::Random);
        }
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.letter().is_some_and(|c| s.len() == 1 && s.eq_ignore_ascii_case(&c.to_string())))
            .ok_or_else(|| format!("unknown scenario '{s}' (expected random or A..H)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandLabel {
    Good,
    Bad,
    SevereBad,
    ModeratelyBad,
    ModerateMildBad,
    MildBad,
    ExtremelyGood,
    ModeratelyGood,
    ModerateMildGood,
    MildGood,
    Unconstrained,
}

/// A half-open interval `[lower, upper)` of `Y(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionBand {
    pub label: BandLabel,
    pub lower: f64,
    pub upper: f64,
}

impl ConditionBand {
    pub fn contains(&self, y0: f64) -> bool {
        y0 >= self.lower && y0 < self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandScheme {
    /// Good / unconstrained / bad, used by scenarios A-F.
    Coarse,
    /// Graded bad conditions for scenario G.
    FineG,
    /// Graded good conditions for scenario H.
    FineH,
}

/// The ordered partition of the real line for a scheme.
pub fn bands(scheme: BandScheme, mu0: f64, delta: f64) -> Result<Vec<ConditionBand>, BandError> {
    if !(delta.is_finite() && delta > 0.35) {
        return Err(BandError::DegenerateDelta(delta));
    }
    let band = |label, lower, upper| ConditionBand { label, lower, upper };
    let lo = mu0 - delta;
    let hi = mu0 + delta;
    // The mild band keeps width 0.15 once delta grows past 0.5 (delta = 1 shifts it by 0.5).
    let shift = (delta - 0.5).max(0.0);
    Ok(match scheme {
        BandScheme::Coarse => vec![
            band(BandLabel::Good, f64::NEG_INFINITY, lo),
            band(BandLabel::Unconstrained, lo, hi),
            band(BandLabel::Bad, hi, f64::INFINITY),
        ],
        BandScheme::FineG => vec![
            band(BandLabel::Good, f64::NEG_INFINITY, lo),
            band(BandLabel::Unconstrained, lo, mu0 + shift),
            band(BandLabel::MildBad, mu0 + shift, hi - 0.35),
            band(BandLabel::ModerateMildBad, hi - 0.35, hi - 0.2),
            band(BandLabel::ModeratelyBad, hi - 0.2, hi),
            band(BandLabel::SevereBad, hi, f64::INFINITY),
        ],
        BandScheme::FineH => vec![
            band(BandLabel::ExtremelyGood, f64::NEG_INFINITY, lo),
            band(BandLabel::ModeratelyGood, lo, lo + 0.2),
            band(BandLabel::ModerateMildGood, lo + 0.2, lo + 0.35),
            band(BandLabel::MildGood, lo + 0.35, mu0 - shift),
            band(BandLabel::Unconstrained, mu0 - shift, hi),
            band(BandLabel::Bad, hi, f64::INFINITY),
        ],
    })
}

pub fn classify_condition(
    y0: f64,
    mu0: f64,
    delta: f64,
    scheme: BandScheme,
) -> Result<ConditionBand, BandError> {
    let all = bands(scheme, mu0, delta)?;
    Ok(all
        .iter()
        .copied()
        .find(|b| b.contains(y0))
        .unwrap_or(ConditionBand {
            // NaN falls through every interval.
            label: BandLabel::Unconstrained,
            lower: f64::NAN,
            upper: f64::NAN,
        }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverrideAction {
    /// Both potential doses become zero.
    ForceNever,
    /// Both potential doses become full.
    ForceAlways,
    /// Both potential doses become the given fraction.
    ForceDose(Dose),
}

impl OverrideAction {
    pub fn dose(self) -> Dose {
        match self {
            OverrideAction::ForceNever => Dose::NONE,
            OverrideAction::ForceAlways => Dose::FULL,
            OverrideAction::ForceDose(d) => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: Scenario,
    pub scheme: BandScheme,
    pub overrides: Vec<(BandLabel, OverrideAction)>,
}

impl ScenarioSpec {
    /// The override table for a non-random scenario.
    pub fn for_scenario(id: Scenario) -> Option<ScenarioSpec> {
        use BandLabel::*;
        use OverrideAction::*;
        let (scheme, overrides) = match id {
            Scenario::Random => return None,
            Scenario::A => (BandScheme::Coarse, vec![(Good, ForceNever)]),
            Scenario::B => (BandScheme::Coarse, vec![(Bad, ForceNever)]),
            Scenario::C => (BandScheme::Coarse, vec![(Good, ForceAlways)]),
            Scenario::D => (BandScheme::Coarse, vec![(Bad, ForceAlways)]),
            Scenario::E => (
                BandScheme::Coarse,
                vec![(Bad, ForceAlways), (Good, ForceNever)],
            ),
            Scenario::F => (
                BandScheme::Coarse,
                vec![(Bad, ForceNever), (Good, ForceAlways)],
            ),
            Scenario::G => (
                BandScheme::FineG,
                vec![
                    (Good, ForceNever),
                    (SevereBad, ForceAlways),
                    (ModeratelyBad, ForceDose(Dose::THREE_QUARTERS)),
                    (ModerateMildBad, ForceDose(Dose::HALF)),
                    (MildBad, ForceDose(Dose::QUARTER)),
                ],
            ),
            Scenario::H => (
                BandScheme::FineH,
                vec![
                    (Bad, ForceNever),
                    (ExtremelyGood, ForceAlways),
                    (ModeratelyGood, ForceDose(Dose::THREE_QUARTERS)),
                    (ModerateMildGood, ForceDose(Dose::HALF)),
                    (MildGood, ForceDose(Dose::QUARTER)),
                ],
            ),
        };
        Some(ScenarioSpec { id, scheme, overrides })
    }

    pub fn action_for(&self, label: BandLabel) -> Option<OverrideAction> {
        self.overrides
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, a)| *a)
    }
}

/// Replaces the random-layer doses of every participant whose `Y(0)` falls in
/// an override band.
///
/// Overrides set both potential doses, so they never create defiers. With
/// never-taker-only partial compliance the control arm stays at dose zero,
/// which leaves the overrides acting on the treatment arm.
pub fn apply_scenario(mut trial: Trial, spec: &ScenarioSpec) -> Result<Trial, ConfigError> {
    let config = &trial.config;
    spec.id
        .check_applicability(config.compliance, config.noncompliers)?;
    let table = bands(spec.scheme, config.mu0, config.delta)
        .map_err(|_| ConfigError::DeltaTooSmall(config.delta))?;
    let control_locked = config.noncompliers == NonComplierTypes::NeverTakersOnly;
    for p in &mut trial.participants {
        let Some(band) = table.iter().find(|b| b.contains(p.y0)) else {
            continue;
        };
        let Some(action) = spec.action_for(band.label) else {
            continue;
        };
        let dose = action.dose();
        if control_locked {
            p.set_doses(dose, Dose::NONE);
        } else {
            p.force_dose(dose);
        }
    }
    debug_assert!(!control_locked
        || trial
            .participants
            .iter()
            .all(|p| p.arm == Arm::Treatment || p.dose_observed == Dose::NONE));
    Ok(trial)
}
