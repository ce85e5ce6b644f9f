//! Seeded batches of independent runs.

use rayon::prelude::*;
use recal_core::controller::{drive, run_rng};
use recal_core::{run, run_baseline, Hyperparameters, Mode, RunTrace, Scenario};
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::metrics::{median, quantile, MetricsObserver, RunMetrics};

/// Hyperparameters actually used for `mode`: the baseline swaps in the plain
/// Q-learning exploration and learning-rate settings.
pub fn mode_hyperparameters(hp: Hyperparameters, mode: Mode) -> Hyperparameters {
    match mode {
        Mode::Proposed => hp,
        Mode::Baseline => hp.baseline(),
    }
}

/// Full trace of one seeded run.
pub fn run_trace(
    scenario: &Scenario,
    hp: Hyperparameters,
    mode: Mode,
    seed: u64,
    scenario_id: &str,
) -> Result<RunTrace> {
    let hp = mode_hyperparameters(hp, mode);
    let result = match mode {
        Mode::Proposed => run(scenario, hp, seed, scenario_id),
        Mode::Baseline => run_baseline(scenario, hp, seed, scenario_id),
    };
    result.map_err(|source| HarnessError::Run { seed, source })
}

/// Metrics of one seeded run, without keeping the trace.
pub fn run_metrics(
    scenario: &Scenario,
    hp: Hyperparameters,
    mode: Mode,
    seed: u64,
) -> Result<RunMetrics> {
    let hp = mode_hyperparameters(hp, mode);
    let mut rng = run_rng(seed);
    let mut observer = MetricsObserver::new(scenario, mode, seed);
    drive(scenario, hp, mode, &mut rng, |r, t, c| {
        observer.observe(r, t, c)
    })
    .map_err(|source| HarnessError::Run { seed, source })?;
    Ok(observer.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub scenario_id: String,
    pub mode: &'static str,
    /// One entry per seed, ordered by seed.
    pub runs: Vec<RunMetrics>,
    /// Runs whose post-reference fine-tuning ended on the check-jump criterion
    /// rather than on the experiment budget.
    pub fraction_converged: f64,
    pub fraction_detected: f64,
    /// Quantiles of the convergence count over converged runs.
    pub convergence_median: Option<f64>,
    pub convergence_q25: Option<f64>,
    pub convergence_q75: Option<f64>,
    pub latency_median: Option<f64>,
    pub latency_max: Option<usize>,
}

impl BatchSummary {
    fn from_runs(scenario_id: &str, mode: Mode, runs: Vec<RunMetrics>) -> Self {
        let n = runs.len() as f64;
        let converged: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.convergence.map(|c| c as f64))
            .collect();
        let latencies: Vec<usize> = runs.iter().filter_map(|r| r.detection_latency).collect();
        let latency_f: Vec<f64> = latencies.iter().map(|&l| l as f64).collect();
        Self {
            scenario_id: scenario_id.into(),
            mode: mode.as_str(),
            fraction_converged: converged.len() as f64 / n,
            fraction_detected: latencies.len() as f64 / n,
            convergence_median: median(&converged),
            convergence_q25: quantile(&converged, 0.25),
            convergence_q75: quantile(&converged, 0.75),
            latency_median: median(&latency_f),
            latency_max: latencies.iter().copied().max(),
            runs,
        }
    }

    /// Fraction of runs satisfying `pred`.
    pub fn fraction(&self, pred: impl Fn(&RunMetrics) -> bool) -> f64 {
        self.runs.iter().filter(|r| pred(r)).count() as f64 / self.runs.len() as f64
    }

    /// Median convergence count with runs that never converged counted as
    /// infinitely slow.
    pub fn censored_convergence_median(&self) -> f64 {
        let values: Vec<f64> = self
            .runs
            .iter()
            .map(|r| r.convergence.map_or(f64::INFINITY, |c| c as f64))
            .collect();
        let mut sorted = values;
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        if m % 2 == 1 {
            sorted[m / 2]
        } else {
            0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
        }
    }
}

/// Runs every seed (concurrently) and aggregates the results.
pub fn run_batch(
    scenario: &Scenario,
    hp: Hyperparameters,
    seeds: &[u64],
    mode: Mode,
    scenario_id: &str,
) -> Result<BatchSummary> {
    if seeds.is_empty() {
        return Err(HarnessError::Invalid(
            "a batch needs at least one seed".into(),
        ));
    }
    let mut runs = seeds
        .par_iter()
        .map(|&seed| run_metrics(scenario, hp, mode, seed))
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|r| r.seed);
    Ok(BatchSummary::from_runs(scenario_id, mode, runs))
}
