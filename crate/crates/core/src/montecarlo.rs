//! Seeded replication runner and Monte Carlo performance measures.
//!
//! Each replication owns a ChaCha8 stream selected by its index, so the set
//! of records is the same whatever the worker count or scheduling order.
//! Aggregation folds records in replication order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dgm::{apply_random_noncompliance, generate_base_trial, Trial, TrialConfig};
use crate::error::{
    EstimandError, EstimateError, RequiredSimulationsError, SimulationError, SummaryError,
};
use crate::estimators::{detect_divergent, itt, iv_two_stage, per_protocol, EstimateRecord, Method};
use crate::outcomes::TruthRecord;
use crate::scenarios::{apply_scenario, ScenarioSpec};

/// Identifies the random stream of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RepSeed {
    pub key: u64,
    pub stream: u64,
}

impl RepSeed {
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(self.stream);
        rng
    }
}

pub fn derive_rep_seed(master_seed: u64, rep_index: u64) -> RepSeed {
    RepSeed {
        key: master_seed,
        stream: rep_index,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub rep_index: usize,
    pub truth: Result<TruthRecord, EstimandError>,
    pub itt: Result<EstimateRecord, EstimateError>,
    pub pp: Result<EstimateRecord, EstimateError>,
    pub iv: Result<EstimateRecord, EstimateError>,
}

impl ReplicationRecord {
    pub fn estimate(&self, method: Method) -> &Result<EstimateRecord, EstimateError> {
        match method {
            Method::Itt => &self.itt,
            Method::PerProtocol => &self.pp,
            Method::InstrumentalVariables => &self.iv,
        }
    }

    /// Flagged by the divergence criterion, or no IV estimate because the first stage vanished.
    pub fn iv_divergent(&self) -> bool {
        match &self.iv {
            Ok(r) => r.divergent,
            Err(EstimateError::IrrelevantInstrument) => true,
            Err(_) => false,
        }
    }
}

/// Generates the cohort for one replication: base draw, random layer, then
/// the scenario overrides, with the per-replication truth attached when defined.
pub fn simulate_trial(config: &TrialConfig, rep_index: usize) -> Result<Trial, SimulationError> {
    let mut rng = derive_rep_seed(config.master_seed, rep_index as u64).rng();
    let trial = generate_base_trial(config, &mut rng)?;
    let mut trial = apply_random_noncompliance(trial, &mut rng)?;
    if let Some(spec) = ScenarioSpec::for_scenario(config.scenario) {
        trial = apply_scenario(trial, &spec)?;
    }
    trial.truth = trial.compute_truth().ok();
    Ok(trial)
}

pub fn run_replication(
    config: &TrialConfig,
    rep_index: usize,
) -> Result<ReplicationRecord, SimulationError> {
    let trial = simulate_trial(config, rep_index)?;
    Ok(estimate_replication(&trial, rep_index))
}

/// Runs all three estimators on a generated trial.
pub fn estimate_replication(trial: &Trial, rep_index: usize) -> ReplicationRecord {
    let truth = trial.compute_truth();
    let mut iv = iv_two_stage(trial);
    if let Ok(record) = iv.as_mut() {
        record.divergent = detect_divergent(record, truth.as_ref().ok(), &trial.config.divergence);
    }
    ReplicationRecord {
        rep_index,
        truth,
        itt: itt(trial),
        pp: per_protocol(trial, trial.config.threshold),
        iv,
    }
}

/// Runs `config.reps` replications on the current rayon pool.
pub fn run_study(config: &TrialConfig) -> Result<Vec<ReplicationRecord>, SimulationError> {
    config.validate()?;
    (0..config.reps)
        .into_par_iter()
        .map(|i| run_replication(config, i))
        .collect()
}

/// Same as [`run_study`] on a dedicated pool of `threads` workers.
pub fn run_study_on(
    config: &TrialConfig,
    threads: usize,
) -> Result<Vec<ReplicationRecord>, SimulationError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| run_study(config))
}

/// Performance measures referenced to the per-replication ATE rather than the CACE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AteSummary {
    pub truth_mean: f64,
    pub bias: f64,
    pub mse: f64,
    pub coverage_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudySummary {
    pub method: Method,
    pub truth_mean: f64,
    pub estimate_mean: f64,
    /// Mean of `truth - estimate`.
    pub bias: f64,
    pub bias_mc_se: f64,
    pub mse: f64,
    pub coverage_pct: f64,
    /// Replications that entered the aggregates.
    pub n_reps: usize,
    pub n_divergent: usize,
    /// Replications without a truth or an estimate.
    pub n_failed: usize,
    pub excluded_divergent: bool,
    pub ate: AteSummary,
}

struct Moments {
    n: usize,
    sum: f64,
    sum_sq_dev: f64,
}

fn moments(xs: &[f64]) -> Moments {
    let n = xs.len();
    let sum: f64 = xs.iter().sum();
    let mean = sum / n as f64;
    Moments {
        n,
        sum,
        sum_sq_dev: xs.iter().map(|x| (x - mean) * (x - mean)).sum(),
    }
}

impl Moments {
    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn sample_sd(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.sum_sq_dev / (self.n as f64 - 1.0)).sqrt()
        }
    }
}

fn referenced(pairs: &[(EstimateRecord, f64)]) -> (f64, f64, f64, f64) {
    let b = pairs.len() as f64;
    let truth_mean = pairs.iter().map(|(_, t)| t).sum::<f64>() / b;
    let bias = pairs.iter().map(|(r, t)| t - r.estimate).sum::<f64>() / b;
    let mse = pairs
        .iter()
        .map(|(r, t)| (r.estimate - t) * (r.estimate - t))
        .sum::<f64>()
        / b;
    let covered = pairs.iter().filter(|(r, t)| r.covers(*t)).count();
    (truth_mean, bias, mse, 100.0 * covered as f64 / b)
}

pub fn summarize(
    records: &[ReplicationRecord],
    method: Method,
    exclude_divergent: bool,
) -> Result<StudySummary, SummaryError> {
    let is_iv = method == Method::InstrumentalVariables;
    let n_divergent = if is_iv {
        records.iter().filter(|r| r.iv_divergent()).count()
    } else {
        0
    };
    let mut used: Vec<(EstimateRecord, TruthRecord)> = Vec::with_capacity(records.len());
    let mut n_failed = 0;
    for rec in records {
        let (Ok(truth), Ok(est)) = (&rec.truth, rec.estimate(method)) else {
            // A vanished first stage is reported as divergent, not failed.
            let divergent_error = is_iv
                && rec.truth.is_ok()
                && matches!(rec.iv, Err(EstimateError::IrrelevantInstrument));
            if !divergent_error {
                n_failed += 1;
            }
            continue;
        };
        if is_iv && exclude_divergent && est.divergent {
            continue;
        }
        used.push((*est, *truth));
    }
    if used.len() < 2 {
        return Err(SummaryError::NoUsableReplications {
            method: method.as_str(),
        });
    }
    let estimates: Vec<f64> = used.iter().map(|(e, _)| e.estimate).collect();
    let m = moments(&estimates);
    let cace: Vec<(EstimateRecord, f64)> = used.iter().map(|(e, t)| (*e, t.cace)).collect();
    let ate: Vec<(EstimateRecord, f64)> = used.iter().map(|(e, t)| (*e, t.ate)).collect();
    let (truth_mean, bias, mse, coverage_pct) = referenced(&cace);
    let (ate_truth, ate_bias, ate_mse, ate_cov) = referenced(&ate);
    Ok(StudySummary {
        method,
        truth_mean,
        estimate_mean: m.mean(),
        bias,
        bias_mc_se: m.sample_sd() / (m.n as f64).sqrt(),
        mse,
        coverage_pct,
        n_reps: m.n,
        n_divergent,
        n_failed,
        excluded_divergent: is_iv && exclude_divergent,
        ate: AteSummary {
            truth_mean: ate_truth,
            bias: ate_bias,
            mse: ate_mse,
            coverage_pct: ate_cov,
        },
    })
}

/// Replications needed for a Monte Carlo estimate within `accuracy` of the
/// target with confidence `1 - alpha`.
pub fn required_simulations(
    sigma: f64,
    accuracy: f64,
    alpha: f64,
) -> Result<u64, RequiredSimulationsError> {
    if !(sigma > 0.0) {
        return Err(RequiredSimulationsError::NotPositive { field: "sigma", value: sigma });
    }
    if !(accuracy > 0.0) {
        return Err(RequiredSimulationsError::NotPositive { field: "accuracy", value: accuracy });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RequiredSimulationsError::AlphaOutOfRange(alpha));
    }
    let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
    let b = (z * sigma / accuracy).powi(2).ceil();
    Ok((b as u64).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Method;
    use rand::Rng;

    fn fake(rep: usize, estimate: f64, truth: f64, half_width: f64) -> ReplicationRecord {
        let rec = |method| EstimateRecord {
            method,
            estimate,
            se: half_width / 1.96,
            ci_lower: estimate - half_width,
            ci_upper: estimate + half_width,
            n_used: 350,
            first_stage: Some(0.5),
            divergent: false,
        };
        ReplicationRecord {
            rep_index: rep,
            truth: Ok(TruthRecord { cace: truth, ate: truth, n_true_compliers: 100 }),
            itt: Ok(rec(Method::Itt)),
            pp: Ok(rec(Method::PerProtocol)),
            iv: Ok(rec(Method::InstrumentalVariables)),
        }
    }

    #[test]
    fn constant_estimates_have_zero_error() {
        let records: Vec<_> = (0..3).map(|i| fake(i, -5.0, -5.0, 0.1)).collect();
        let s = summarize(&records, Method::PerProtocol, false).unwrap();
        assert_eq!((s.bias, s.mse, s.bias_mc_se), (0.0, 0.0, 0.0));
        assert_eq!(s.coverage_pct, 100.0);
    }

    #[test]
    fn coverage_counts_intervals() {
        let records: Vec<_> = (0..100)
            .map(|i| fake(i, if i < 95 { -5.0 } else { -4.0 }, -5.0, 0.5))
            .collect();
        let s = summarize(&records, Method::PerProtocol, false).unwrap();
        assert_eq!(s.coverage_pct, 95.0);
    }

    #[test]
    fn bias_sign_is_truth_minus_estimate() {
        let records: Vec<_> = (0..4).map(|i| fake(i, -4.5, -5.0, 0.1)).collect();
        let s = summarize(&records, Method::PerProtocol, false).unwrap();
        assert!((s.bias + 0.5).abs() < 1e-12);
    }

    #[test]
    fn exclusion_drops_flagged_iv_runs() {
        let mut records: Vec<_> = (0..10).map(|i| fake(i, -5.0, -5.0, 0.1)).collect();
        if let Ok(r) = records[3].iv.as_mut() {
            r.estimate = 100.0;
            r.divergent = true;
        }
        records[4].iv = Err(EstimateError::IrrelevantInstrument);
        let all = summarize(&records, Method::InstrumentalVariables, false).unwrap();
        assert_eq!((all.n_reps, all.n_divergent, all.n_failed), (9, 2, 0));
        let kept = summarize(&records, Method::InstrumentalVariables, true).unwrap();
        assert_eq!((kept.n_reps, kept.n_divergent), (8, 2));
        assert_eq!(kept.mse, 0.0);
        assert!(kept.excluded_divergent);
    }

    #[test]
    fn too_few_usable_records() {
        let records = vec![fake(0, -5.0, -5.0, 0.1)];
        assert!(summarize(&records, Method::Itt, false).is_err());
    }

    #[test]
    fn mse_decomposes_under_constant_truth() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let records: Vec<_> = (0..200)
            .map(|i| fake(i, -5.0 + r.random::<f64>() - 0.3, -5.0, 0.2))
            .collect();
        let s = summarize(&records, Method::PerProtocol, false).unwrap();
        let est: Vec<f64> = records.iter().map(|r| r.pp.as_ref().unwrap().estimate).collect();
        let mean = est.iter().sum::<f64>() / est.len() as f64;
        let pop_var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / est.len() as f64;
        assert!((s.mse - (s.bias * s.bias + pop_var)).abs() < 1e-9);
        let sd = (pop_var * est.len() as f64 / (est.len() - 1) as f64).sqrt();
        assert!(((est.len() as f64).sqrt() * s.bias_mc_se - sd).abs() < 1e-9);
    }

    #[test]
    fn rep_seeds_are_distinct() {
        assert_ne!(derive_rep_seed(7, 0), derive_rep_seed(7, 1));
        let mut first: Vec<u64> = (0..500)
            .map(|i| derive_rep_seed(20230401, i).rng().random::<u64>())
            .collect();
        first.sort_unstable();
        first.dedup();
        assert_eq!(first.len(), 500);
    }

    #[test]
    fn required_simulations_formula() {
        assert_eq!(required_simulations(1.24, 0.16, 0.05).unwrap(), 231);
        assert_eq!(required_simulations(1.24, f64::INFINITY, 0.05).unwrap(), 1);
        assert!(required_simulations(0.0, 0.16, 0.05).is_err());
        assert!(required_simulations(1.24, -1.0, 0.05).is_err());
        assert!(required_simulations(1.24, 0.16, 1.0).is_err());
    }
}
