use cacelab::dgm::{quotas, NonComplierTypes, TrialConfig};
use cacelab::estimators::{itt, iv_two_stage, per_protocol, two_stage_fit, Method};
use cacelab::montecarlo::{derive_rep_seed, run_study, simulate_trial, summarize};
use cacelab::outcomes::{is_true_complier, Arm, ComplianceMode, Dose, ThresholdCase};
use cacelab::scenarios::{apply_scenario, bands, BandScheme, Scenario, ScenarioSpec};
use proptest::prelude::*;

fn design() -> impl Strategy<Value = TrialConfig> {
    let modes = prop_oneof![Just(ComplianceMode::Binary), Just(ComplianceMode::Partial)];
    let types = prop_oneof![
        Just(NonComplierTypes::NeverTakersOnly),
        Just(NonComplierTypes::NeverAndAlwaysTakers)
    ];
    (modes, types, 0usize..9, 0usize..4, any::<bool>(), any::<bool>(), 20usize..300, any::<u64>(), -8.0f64..3.0)
        .prop_map(|(compliance, noncompliers, s, t, mild, sens, n, seed, effect)| {
            let applicable = Scenario::applicable(compliance, noncompliers);
            let mut config = TrialConfig::design(compliance, noncompliers, applicable[s % applicable.len()]);
            if sens {
                config = config.with_sensitivity_proportions();
            }
            if compliance == ComplianceMode::Partial {
                config.threshold = ThresholdCase::ALL[t];
            }
            config.delta = if mild { 1.0 } else { 0.5 };
            config.n = n;
            config.master_seed = seed;
            config.effect = effect;
            config
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn wald_ratio_equals_second_stage_slope(config in design(), rep in 0usize..1000) {
        let trial = simulate_trial(&config, rep).unwrap();
        if let (Ok(iv), Ok(fit)) = (iv_two_stage(&trial), two_stage_fit(&trial)) {
            prop_assert!((iv.estimate - fit.second.slope).abs() <= 1e-10);
            prop_assert!(iv.ci_lower <= iv.estimate && iv.estimate <= iv.ci_upper);
        }
    }

    #[test]
    fn doses_are_monotone_and_thresholds_nest(config in design(), rep in 0usize..1000) {
        let trial = simulate_trial(&config, rep).unwrap();
        for p in &trial.participants {
            prop_assert!(p.dose_under_control <= p.dose_under_treatment);
            let expected = if p.arm == Arm::Treatment { p.dose_under_treatment } else { p.dose_under_control };
            prop_assert_eq!(p.dose_observed, expected);
            let y = p.y0 + p.dose_observed.fraction() * (p.y1 - p.y0);
            prop_assert!((p.y_observed - y).abs() < 1e-12);
            let flags: Vec<bool> = ThresholdCase::ALL
                .iter()
                .map(|&t| is_true_complier(p, t, config.compliance).unwrap())
                .collect();
            if config.compliance == ComplianceMode::Partial {
                prop_assert!(flags.windows(2).all(|w| !w[0] || w[1]));
            }
        }
    }

    #[test]
    fn scenarios_are_idempotent(config in design(), rep in 0usize..1000) {
        let trial = simulate_trial(&config, rep).unwrap();
        if let Some(spec) = ScenarioSpec::for_scenario(config.scenario) {
            let again = apply_scenario(trial.clone(), &spec).unwrap();
            prop_assert_eq!(again.participants, trial.participants);
        }
    }

    #[test]
    fn quotas_sum_to_total(raw in prop::collection::vec(0.0f64..1.0, 1..6), total in 0usize..1000) {
        let sum: f64 = raw.iter().sum();
        prop_assume!(sum > 1e-6);
        let shares: Vec<f64> = raw.iter().map(|x| x / sum).collect();
        let q = quotas(&shares, total).unwrap();
        prop_assert_eq!(q.iter().sum::<usize>(), total);
        let slack = shares.len() as f64;
        for (qi, si) in q.iter().zip(&shares) {
            prop_assert!((*qi as f64 - si * total as f64).abs() <= slack);
        }
    }

    #[test]
    fn bands_partition_the_line(y0 in 60.0f64..90.0, delta in 0.36f64..3.0) {
        for scheme in [BandScheme::Coarse, BandScheme::FineG, BandScheme::FineH] {
            let all = bands(scheme, 74.0, delta).unwrap();
            prop_assert_eq!(all.iter().filter(|b| b.contains(y0)).count(), 1);
        }
    }

    #[test]
    fn shifting_outcomes_leaves_estimates_and_errors(config in design(), rep in 0usize..1000, c in -100.0f64..100.0) {
        let trial = simulate_trial(&config, rep).unwrap();
        let mut shifted = trial.clone();
        for p in &mut shifted.participants {
            p.y_observed += c;
        }
        let pairs = [
            (itt(&trial), itt(&shifted)),
            (per_protocol(&trial, config.threshold), per_protocol(&shifted, config.threshold)),
            (iv_two_stage(&trial), iv_two_stage(&shifted)),
        ];
        for (a, b) in pairs {
            if let (Ok(a), Ok(b)) = (a, b) {
                let tol = 1e-9 * (1.0 + a.estimate.abs() + c.abs());
                prop_assert!((a.estimate - b.estimate).abs() <= tol);
                prop_assert!((a.se - b.se).abs() <= 1e-9 * (1.0 + a.se + c.abs()));
            }
        }
    }

    #[test]
    fn per_protocol_matches_naive_loops(config in design(), rep in 0usize..1000) {
        let trial = simulate_trial(&config, rep).unwrap();
        let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0.0, 0.0, 0.0);
        for p in &trial.participants {
            if p.arm == Arm::Treatment && p.dose_observed >= config.threshold.min_dose() && p.dose_observed > Dose::NONE {
                s1 += p.y_observed;
                n1 += 1.0;
            }
            if p.arm == Arm::Control && p.dose_observed == Dose::NONE {
                s0 += p.y_observed;
                n0 += 1.0;
            }
        }
        if let Ok(pp) = per_protocol(&trial, config.threshold) {
            prop_assert!((pp.estimate - (s1 / n1 - s0 / n0)).abs() <= 1e-12 * (1.0 + s1.abs() / n1));
        }
        let ate = trial.participants.iter().map(|p| p.y1 - p.y0).sum::<f64>() / trial.len() as f64;
        if let Some(truth) = trial.truth {
            prop_assert!((truth.ate - ate).abs() <= 1e-12);
        }
    }

    #[test]
    fn iv_ignores_the_threshold(config in design(), rep in 0usize..1000) {
        let trial = simulate_trial(&config, rep).unwrap();
        let reference = iv_two_stage(&trial);
        for case in ThresholdCase::ALL {
            let mut t = trial.clone();
            t.config.threshold = case;
            prop_assert_eq!(iv_two_stage(&t), reference);
        }
    }

    #[test]
    fn rep_seeds_are_injective(master in any::<u64>(), a in 0u64..1_000_000, b in 0u64..1_000_000) {
        prop_assume!(a != b);
        prop_assert_ne!(derive_rep_seed(master, a), derive_rep_seed(master, b));
    }
}

#[test]
fn perfect_compliance_gives_identical_estimates() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for n in [10, 57, 350, 1000] {
        let config = TrialConfig { n, ..TrialConfig::default() };
        let trial = cacelab::dgm::generate_base_trial(&config, &mut rng).unwrap();
        let a = itt(&trial).unwrap();
        let b = per_protocol(&trial, ThresholdCase::I).unwrap();
        let c = iv_two_stage(&trial).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.estimate, c.estimate);
        assert_eq!(c.first_stage, Some(1.0));
    }
}

#[test]
fn bias_mc_se_is_sd_over_root_b() {
    let config = TrialConfig { reps: 200, ..TrialConfig::design(ComplianceMode::Partial, NonComplierTypes::NeverAndAlwaysTakers, Scenario::A) };
    let records = run_study(&config).unwrap();
    for method in Method::ALL {
        let s = summarize(&records, method, false).unwrap();
        let ests: Vec<f64> = records.iter().filter_map(|r| r.estimate(method).as_ref().ok().map(|e| e.estimate)).collect();
        let n = ests.len() as f64;
        let mean = ests.iter().sum::<f64>() / n;
        let sd = (ests.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((s.bias_mc_se * n.sqrt() - sd).abs() < 1e-9);
        assert!(s.mse >= s.bias * s.bias - 1e-9);
        assert!((0.0..=100.0).contains(&s.coverage_pct));
    }
}

#[test]
fn excluding_divergent_shrinks_iv_mse_when_they_are_the_extremes() {
    let config = TrialConfig::design(ComplianceMode::Partial, NonComplierTypes::NeverAndAlwaysTakers, Scenario::G);
    let records = run_study(&config).unwrap();
    let kept_max = records
        .iter()
        .filter_map(|r| r.iv.as_ref().ok().zip(r.truth.as_ref().ok()))
        .filter(|(e, _)| !e.divergent)
        .map(|(e, t)| (e.estimate - t.cace).abs())
        .fold(0.0, f64::max);
    let dropped_farther = records
        .iter()
        .filter_map(|r| r.iv.as_ref().ok().zip(r.truth.as_ref().ok()))
        .filter(|(e, _)| e.divergent)
        .all(|(e, t)| (e.estimate - t.cace).abs() > kept_max);
    let all = summarize(&records, Method::InstrumentalVariables, false).unwrap();
    let kept = summarize(&records, Method::InstrumentalVariables, true).unwrap();
    assert!(kept.n_divergent > 0);
    let retained = records
        .iter()
        .filter(|r| r.truth.is_ok() && r.iv.as_ref().is_ok_and(|e| !e.divergent))
        .count();
    assert_eq!(kept.n_reps, retained);
    if dropped_farther {
        assert!(kept.mse <= all.mse);
    }
}

#[test]
fn null_effect_truth_is_centred() {
    let config = TrialConfig { effect: 0.0, ..TrialConfig::default() };
    for rep in 0..50 {
        let trial = simulate_trial(&config, rep).unwrap();
        let truth = trial.truth.unwrap();
        let bound = 4.0 * (2.0 / truth.n_true_compliers as f64).sqrt();
        assert!(truth.cace.abs() < bound, "rep {rep}: {}", truth.cace);
    }
}

#[test]
fn random_nt_only_strata_hit_quota() {
    let config = TrialConfig::design(ComplianceMode::Binary, NonComplierTypes::NeverTakersOnly, Scenario::Random);
    let trial = simulate_trial(&config, 0).unwrap();
    let compliers = trial
        .participants
        .iter()
        .filter(|p| p.dose_under_treatment == Dose::FULL && p.dose_under_control == Dose::NONE)
        .count();
    assert_eq!(compliers, 210);
    assert_eq!(trial.truth.unwrap().n_true_compliers, 210);
}

#[test]
fn inapplicable_scenario_fails_before_simulation() {
    let config = TrialConfig::design(ComplianceMode::Binary, NonComplierTypes::NeverTakersOnly, Scenario::C);
    assert!(run_study(&config).is_err());
    assert!(simulate_trial(&config, 0).is_err());
}
