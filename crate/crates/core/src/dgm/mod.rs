//! Data-generating mechanism: potential outcomes, assignment, and the random
//! non-compliance layer.

mod config;

pub use config::{
    BinaryProps, DoseDistribution, NonComplierTypes, PartialDoseProps, TrialConfig, DEFAULT_SEED,
};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{AllocationError, ConfigError, EstimandError};
use crate::outcomes::{true_estimands, Arm, ComplianceMode, Dose, Participant, TruthRecord};

/// A realised cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub participants: Vec<Participant>,
    pub config: TrialConfig,
    pub truth: Option<TruthRecord>,
}

impl Trial {
    pub fn from_participants(participants: Vec<Participant>, config: TrialConfig) -> Self {
        Trial {
            participants,
            config,
            truth: None,
        }
    }

    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    pub fn arm(&self, arm: Arm) -> impl Iterator<Item = &Participant> {
        self.participants.iter().filter(move |p| p.arm == arm)
    }

    pub fn compute_truth(&self) -> Result<TruthRecord, EstimandError> {
        true_estimands(
            &self.participants,
            self.config.threshold,
            self.config.compliance,
        )
    }

    /// Computes and stores the per-replication truth.
    pub fn with_truth(mut self) -> Result<Self, EstimandError> {
        self.truth = Some(self.compute_truth()?);
        Ok(self)
    }
}

/// Draws potential outcomes and assignment. Everyone starts fully compliant.
pub fn generate_base_trial<R: Rng + ?Sized>(
    config: &TrialConfig,
    rng: &mut R,
) -> Result<Trial, ConfigError> {
    config.validate()?;
    let control = Normal::new(config.mu0, config.sd0).expect("validated sd0");
    let treated = Normal::new(config.mu1(), config.sd1).expect("validated sd1");
    let participants = (0..config.n)
        .map(|_| {
            let y0 = control.sample(rng);
            let y1 = treated.sample(rng);
            let arm = if rng.random_bool(config.p_treatment) {
                Arm::Treatment
            } else {
                Arm::Control
            };
            Participant::new(y0, y1, arm)
        })
        .collect();
    Ok(Trial::from_participants(participants, config.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinaryClass {
    Complier,
    NeverTaker,
    AlwaysTaker,
}

/// Applies the random non-compliance layer with exact quotas.
pub fn apply_random_noncompliance<R: Rng + ?Sized>(
    mut trial: Trial,
    rng: &mut R,
) -> Result<Trial, AllocationError> {
    let config = &trial.config;
    match config.compliance {
        ComplianceMode::Binary => {
            let props = config.binary_props;
            let counts = quotas(
                &[props.p_complier(), props.p_nt, props.p_at],
                trial.participants.len(),
            )?;
            let mut classes: Vec<BinaryClass> = [
                BinaryClass::Complier,
                BinaryClass::NeverTaker,
                BinaryClass::AlwaysTaker,
            ]
            .iter()
            .zip(&counts)
            .flat_map(|(&class, &count)| std::iter::repeat_n(class, count))
            .collect();
            classes.shuffle(rng);
            for (p, class) in trial.participants.iter_mut().zip(classes) {
                match class {
                    BinaryClass::Complier => p.set_doses(Dose::FULL, Dose::NONE),
                    BinaryClass::NeverTaker => p.force_dose(Dose::NONE),
                    BinaryClass::AlwaysTaker => p.force_dose(Dose::FULL),
                }
            }
        }
        ComplianceMode::Partial => {
            let treatment = config.partial_props.treatment;
            let control = config.partial_props.control;
            let never_only = config.noncompliers == NonComplierTypes::NeverTakersOnly;

            let doses = arm_doses(&trial.participants, Arm::Treatment, &treatment, rng)?;
            assign_arm(&mut trial.participants, Arm::Treatment, doses);

            if never_only {
                for p in trial.participants.iter_mut().filter(|p| p.arm == Arm::Control) {
                    p.set_doses(Dose::FULL, Dose::NONE);
                }
            } else {
                let doses = arm_doses(&trial.participants, Arm::Control, &control, rng)?;
                assign_arm(&mut trial.participants, Arm::Control, doses);
            }
        }
    }
    Ok(trial)
}

fn arm_doses<R: Rng + ?Sized>(
    participants: &[Participant],
    arm: Arm,
    dist: &DoseDistribution,
    rng: &mut R,
) -> Result<Vec<Dose>, AllocationError> {
    let size = participants.iter().filter(|p| p.arm == arm).count();
    let counts = quotas(&dist.0, size)?;
    let mut doses: Vec<Dose> = Dose::LEVELS
        .iter()
        .zip(&counts)
        .flat_map(|(&d, &count)| std::iter::repeat_n(d, count))
        .collect();
    doses.shuffle(rng);
    Ok(doses)
}

// The unrealised arm keeps the protocol dose (full under treatment, none under control).
fn assign_arm(participants: &mut [Participant], arm: Arm, doses: Vec<Dose>) {
    let members = participants.iter_mut().filter(|p| p.arm == arm);
    for (p, dose) in members.zip(doses) {
        match arm {
            Arm::Treatment => p.set_doses(dose, Dose::NONE),
            Arm::Control => p.set_doses(Dose::FULL, dose),
        }
    }
}

/// Splits `total` items into classes with the given shares.
///
/// Each share is rounded half-to-even, then the shortfall or excess is
/// absorbed by the class with the largest share (first on ties).
pub fn quotas(props: &[f64], total: usize) -> Result<Vec<usize>, AllocationError> {
    let sum: f64 = props.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(AllocationError::ProportionsDoNotSum(sum));
    }
    let mut counts: Vec<i64> = props
        .iter()
        .map(|&p| {
            let exact = p * total as f64;
            let half_grid = (exact * 2.0).round() / 2.0;
            let snapped = if (exact - half_grid).abs() < 1e-9 {
                half_grid
            } else {
                exact
            };
            snapped.round_ties_even() as i64
        })
        .collect();
    let remainder = total as i64 - counts.iter().sum::<i64>();
    if let Some(largest) = props
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |best, (i, &p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((i, p)),
        })
        .map(|(i, _)| i)
    {
        counts[largest] += remainder;
    }
    if counts.iter().any(|&c| c < 0) {
        return Err(AllocationError::QuotaExceedsGroup { group_size: total });
    }
    Ok(counts.into_iter().map(|c| c as usize).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcomes::Stratum;
    use crate::scenarios::Scenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn quota_rounding_matches_recount() {
        assert_eq!(quotas(&[0.60, 0.25, 0.15], 350).unwrap(), vec![210, 88, 52]);
        assert_eq!(quotas(&[0.60, 0.40, 0.0], 350).unwrap(), vec![210, 140, 0]);
        let arm = quotas(&[0.5, 0.2, 0.1, 0.1, 0.1], 175).unwrap();
        assert_eq!(arm.iter().sum::<usize>(), 175);
        assert_eq!(arm, vec![86, 35, 18, 18, 18]);
    }

    #[test]
    fn quotas_reject_bad_shares() {
        assert!(matches!(
            quotas(&[0.5, 0.6], 10),
            Err(AllocationError::ProportionsDoNotSum(_))
        ));
        assert_eq!(quotas(&[1.0], 0).unwrap(), vec![0]);
    }

    #[test]
    fn base_sample_mean_is_close_to_mu0() {
        let cfg = TrialConfig::default();
        let trial = generate_base_trial(&cfg, &mut rng(7)).unwrap();
        assert_eq!(trial.len(), 350);
        let mean = trial.participants.iter().map(|p| p.y0).sum::<f64>() / 350.0;
        assert!((mean - 74.0).abs() < 4.0 / 350f64.sqrt(), "mean {mean}");
        assert!(trial
            .participants
            .iter()
            .all(|p| p.dose_under_treatment == Dose::FULL && p.dose_under_control == Dose::NONE));
    }

    #[test]
    fn null_effect_base_trial_centres_at_zero() {
        let cfg = TrialConfig { effect: 0.0, ..TrialConfig::default() };
        let trial = generate_base_trial(&cfg, &mut rng(11)).unwrap();
        let mean = trial.participants.iter().map(|p| p.y1 - p.y0).sum::<f64>() / 350.0;
        assert!(mean.abs() < 4.0 * (2.0f64 / 350.0).sqrt(), "mean {mean}");
    }

    #[test]
    fn empty_trial_is_rejected() {
        let cfg = TrialConfig { n: 0, ..TrialConfig::default() };
        assert!(generate_base_trial(&cfg, &mut rng(1)).is_err());
    }

    fn strata_counts(trial: &Trial) -> [usize; 4] {
        let mut counts = [0; 4];
        for p in &trial.participants {
            let idx = match p.stratum().unwrap() {
                Stratum::Complier => 0,
                Stratum::NeverTaker => 1,
                Stratum::AlwaysTaker => 2,
                Stratum::Defier => 3,
            };
            counts[idx] += 1;
        }
        counts
    }

    #[test]
    fn binary_random_layer_uses_exact_quotas() {
        let cfg = TrialConfig::default();
        let mut r = rng(3);
        let trial = generate_base_trial(&cfg, &mut r).unwrap();
        let trial = apply_random_noncompliance(trial, &mut r).unwrap();
        assert_eq!(strata_counts(&trial), [210, 88, 52, 0]);

        let cfg = TrialConfig::design(
            ComplianceMode::Binary,
            NonComplierTypes::NeverTakersOnly,
            Scenario::Random,
        );
        let trial = generate_base_trial(&cfg, &mut r).unwrap();
        let trial = apply_random_noncompliance(trial, &mut r).unwrap();
        assert_eq!(strata_counts(&trial), [210, 140, 0, 0]);
    }

    #[test]
    fn partial_never_taker_only_controls_take_nothing() {
        let cfg = TrialConfig::design(
            ComplianceMode::Partial,
            NonComplierTypes::NeverTakersOnly,
            Scenario::Random,
        );
        let mut r = rng(5);
        let trial = generate_base_trial(&cfg, &mut r).unwrap();
        let trial = apply_random_noncompliance(trial, &mut r).unwrap();
        assert!(trial.arm(Arm::Control).all(|p| p.dose_observed == Dose::NONE));
        let treated: Vec<_> = trial.arm(Arm::Treatment).collect();
        let expected = quotas(&cfg.partial_props.treatment.0, treated.len()).unwrap();
        for (level, &count) in Dose::LEVELS.iter().zip(&expected) {
            assert_eq!(treated.iter().filter(|p| p.dose_observed == *level).count(), count);
        }
    }

    #[test]
    fn partial_quotas_follow_realised_arm_sizes() {
        let cfg = TrialConfig::design(
            ComplianceMode::Partial,
            NonComplierTypes::NeverAndAlwaysTakers,
            Scenario::Random,
        );
        let mut r = rng(9);
        let trial = generate_base_trial(&cfg, &mut r).unwrap();
        let trial = apply_random_noncompliance(trial, &mut r).unwrap();
        for (arm, dist) in [
            (Arm::Treatment, cfg.partial_props.treatment),
            (Arm::Control, cfg.partial_props.control),
        ] {
            let members: Vec<_> = trial.arm(arm).collect();
            let expected = quotas(&dist.0, members.len()).unwrap();
            for (level, &count) in Dose::LEVELS.iter().zip(&expected) {
                assert_eq!(members.iter().filter(|p| p.dose_observed == *level).count(), count);
            }
            assert!(members.iter().all(|p| p.dose_under_treatment >= p.dose_under_control));
        }
    }

    #[test]
    fn same_seed_same_trial() {
        let cfg = TrialConfig::default();
        let a = generate_base_trial(&cfg, &mut rng(42)).unwrap();
        let b = generate_base_trial(&cfg, &mut rng(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn never_takers_are_a_random_subset() {
        let cfg = TrialConfig::design(
            ComplianceMode::Binary,
            NonComplierTypes::NeverTakersOnly,
            Scenario::Random,
        );
        let mut r = rng(13);
        let trial = generate_base_trial(&cfg, &mut r).unwrap();
        let trial = apply_random_noncompliance(trial, &mut r).unwrap();
        let nt: Vec<f64> = trial
            .participants
            .iter()
            .filter(|p| p.stratum().unwrap() == Stratum::NeverTaker)
            .map(|p| p.y0)
            .collect();
        let mean = nt.iter().sum::<f64>() / nt.len() as f64;
        assert!((mean - 74.0).abs() < 4.0 / (nt.len() as f64).sqrt());
    }
}
