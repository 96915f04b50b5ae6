//! Potential-outcomes algebra for a two-arm trial with non-compliance.
//!
//! Every participant carries a pair of potential outcomes `(y0, y1)`, an
//! assignment arm and a pair of potential doses (the dose they would take if
//! assigned to treatment, and the dose they would take if assigned to
//! control). The observed dose and observed outcome are derived from those.
//!
//! Doses are fractions of the full treatment on a quarter grid
//! `{0, 1/4, 1/2, 3/4, 1}` and are stored as an integer count of quarters so
//! that threshold comparisons are exact.

use std::fmt;

use crate::error::{EstimandError, ModeError};

/// Dose fraction on the quarter grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Dose(u8);

impl Dose {
    pub const NONE: Dose = Dose(0);
    pub const QUARTER: Dose = Dose(1);
    pub const HALF: Dose = Dose(2);
    pub const THREE_QUARTERS: Dose = Dose(3);
    pub const FULL: Dose = Dose(4);

    /// Every admissible dose in increasing order.
    pub const LEVELS: [Dose; 5] = [
        Dose::NONE,
        Dose::QUARTER,
        Dose::HALF,
        Dose::THREE_QUARTERS,
        Dose::FULL,
    ];

    /// Builds a dose from a number of quarters, `0..=4`.
    pub fn from_quarters(quarters: u8) -> Option<Dose> {
        (quarters <= 4).then_some(Dose(quarters))
    }

    pub fn quarters(self) -> u8 {
        self.0
    }

    /// Position of this dose in [`Dose::LEVELS`].
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn fraction(self) -> f64 {
        f64::from(self.0) / 4.0
    }

    pub fn is_binary(self) -> bool {
        self == Dose::NONE || self == Dose::FULL
    }
}

impl fmt::Display for Dose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => f.write_str("0"),
            1 => f.write_str("1/4"),
            2 => f.write_str("1/2"),
            3 => f.write_str("3/4"),
            _ => f.write_str("1"),
        }
    }
}

/// Randomised arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    Control,
    Treatment,
}

impl Arm {
    /// The instrument value `Z` as a regressor.
    pub fn indicator(self) -> f64 {
        match self {
            Arm::Control => 0.0,
            Arm::Treatment => 1.0,
        }
    }
}

/// Whether doses are all-or-nothing or may be fractional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComplianceMode {
    Binary,
    Partial,
}

/// Dose cutoff that defines an observed complier in the treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ThresholdCase {
    /// Full dose only.
    I,
    /// At least three quarters.
    II,
    /// At least half.
    III,
    /// Any positive dose.
    IV,
}

impl ThresholdCase {
    pub const ALL: [ThresholdCase; 4] = [
        ThresholdCase::I,
        ThresholdCase::II,
        ThresholdCase::III,
        ThresholdCase::IV,
    ];

    pub fn min_dose(self) -> Dose {
        match self {
            ThresholdCase::I => Dose::FULL,
            ThresholdCase::II => Dose::THREE_QUARTERS,
            ThresholdCase::III => Dose::HALF,
            ThresholdCase::IV => Dose::QUARTER,
        }
    }

    pub fn admits(self, dose: Dose) -> bool {
        dose >= self.min_dose()
    }
}

/// Conceptual compliance type from the pair of potential doses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stratum {
    Complier,
    NeverTaker,
    AlwaysTaker,
    Defier,
}

/// One trial participant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Participant {
    pub y0: f64,
    pub y1: f64,
    pub arm: Arm,
    /// Dose taken if assigned to treatment.
    pub dose_under_treatment: Dose,
    /// Dose taken if assigned to control.
    pub dose_under_control: Dose,
    pub dose_observed: Dose,
    pub y_observed: f64,
}

impl Participant {
    /// A fully compliant participant with derived fields populated.
    pub fn new(y0: f64, y1: f64, arm: Arm) -> Self {
        let mut p = Participant {
            y0,
            y1,
            arm,
            dose_under_treatment: Dose::FULL,
            dose_under_control: Dose::NONE,
            dose_observed: Dose::NONE,
            y_observed: y0,
        };
        p.observe();
        p
    }

    /// Sets both potential doses, as a condition-driven behaviour does.
    pub fn force_dose(&mut self, dose: Dose) {
        self.dose_under_treatment = dose;
        self.dose_under_control = dose;
        self.observe();
    }

    pub fn set_doses(&mut self, under_treatment: Dose, under_control: Dose) {
        self.dose_under_treatment = under_treatment;
        self.dose_under_control = under_control;
        self.observe();
    }

    /// Recomputes the observed dose and outcome from the potential values.
    pub fn observe(&mut self) {
        self.dose_observed = observed_dose(
            self.arm,
            self.dose_under_treatment,
            self.dose_under_control,
        );
        self.y_observed = observed_outcome(self.dose_observed, self.y1, self.y0);
    }

    pub fn individual_effect(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn stratum(&self) -> Result<Stratum, ModeError> {
        classify_stratum(self.dose_under_treatment, self.dose_under_control)
    }
}

/// Per-replication finite-sample estimands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord {
    pub cace: f64,
    pub ate: f64,
    pub n_true_compliers: usize,
}

pub fn observed_dose(arm: Arm, under_treatment: Dose, under_control: Dose) -> Dose {
    match arm {
        Arm::Treatment => under_treatment,
        Arm::Control => under_control,
    }
}

/// Linear dose-response mix of the two potential outcomes.
pub fn observed_outcome(dose: Dose, y1: f64, y0: f64) -> f64 {
    match dose {
        Dose::NONE => y0,
        Dose::FULL => y1,
        d => {
            let w = d.fraction();
            w * y1 + (1.0 - w) * y0
        }
    }
}

pub fn classify_stratum(under_treatment: Dose, under_control: Dose) -> Result<Stratum, ModeError> {
    match (under_treatment, under_control) {
        (Dose::FULL, Dose::NONE) => Ok(Stratum::Complier),
        (Dose::NONE, Dose::NONE) => Ok(Stratum::NeverTaker),
        (Dose::FULL, Dose::FULL) => Ok(Stratum::AlwaysTaker),
        (Dose::NONE, Dose::FULL) => Ok(Stratum::Defier),
        (t, c) => Err(ModeError::NonBinaryDose {
            under_treatment: t,
            under_control: c,
        }),
    }
}

/// Whether a participant belongs to the true-complier set used for the CACE.
///
/// Binary mode uses the conceptual stratum. Partial mode pools the
/// treatment-arm participants whose dose meets the threshold with the
/// control-arm participants who took no treatment at all.
pub fn is_true_complier(
    p: &Participant,
    threshold: ThresholdCase,
    mode: ComplianceMode,
) -> Result<bool, ModeError> {
    match mode {
        ComplianceMode::Binary => Ok(p.stratum()? == Stratum::Complier),
        ComplianceMode::Partial => Ok(match p.arm {
            Arm::Treatment => threshold.admits(p.dose_observed),
            Arm::Control => p.dose_observed == Dose::NONE,
        }),
    }
}

pub fn true_estimands(
    participants: &[Participant],
    threshold: ThresholdCase,
    mode: ComplianceMode,
) -> Result<TruthRecord, EstimandError> {
    if participants.is_empty() {
        return Err(EstimandError::EmptyTrial);
    }
    let mut ate_sum = 0.0;
    let mut cace_sum = 0.0;
    let mut n_true_compliers = 0usize;
    for p in participants {
        let effect = p.individual_effect();
        ate_sum += effect;
        if is_true_complier(p, threshold, mode)? {
            cace_sum += effect;
            n_true_compliers += 1;
        }
    }
    if n_true_compliers == 0 {
        return Err(EstimandError::NoCompliers { n_true_compliers });
    }
    Ok(TruthRecord {
        cace: cace_sum / n_true_compliers as f64,
        ate: ate_sum / participants.len() as f64,
        n_true_compliers,
    })
}
