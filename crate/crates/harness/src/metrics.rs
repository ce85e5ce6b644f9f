//! Learning curves and per-run statistics.

use std::collections::VecDeque;

use recal_core::agent::greedy_configuration;
use recal_core::controller::{ControllerState, Transition};
use recal_core::receiver::{ml_guess, optimal_configuration, true_score, DecisionRule};
use recal_core::{ExperimentRecord, Mode, RunTrace, Scenario};
use serde::Serialize;

/// Default trailing window for reward curves.
pub const CURVE_WINDOW: usize = 1000;
/// Span at the end of a run over which the reward plateau is averaged.
pub const PLATEAU_SPAN: usize = 10_000;
/// Scores within this distance of the optimum count as optimal.
pub const SCORE_TIE: f64 = 1e-12;

/// Trailing-window mean reward, one point per experiment once the window has filled.
pub fn learning_curve(trace: &RunTrace, window: usize) -> Vec<(usize, f64)> {
    assert!(window >= 1, "curve window must be at least 1");
    let mut sum = 0u64;
    let mut out = Vec::with_capacity(trace.records.len().saturating_sub(window - 1));
    for (i, r) in trace.records.iter().enumerate() {
        sum += u64::from(r.reward);
        if i >= window {
            sum -= u64::from(trace.records[i - window].reward);
        }
        if i + 1 >= window {
            out.push((r.index, sum as f64 / window as f64));
        }
    }
    out
}

/// Witness readings as recorded (present only while deployed).
pub fn witness_series(trace: &RunTrace) -> Vec<(usize, Option<f64>)> {
    trace.records.iter().map(|r| (r.index, r.witness)).collect()
}

/// Reward curve and witness on a shared index column.
pub fn aligned_series(trace: &RunTrace, window: usize) -> Vec<(usize, f64, Option<f64>)> {
    let offset = window - 1;
    learning_curve(trace, window)
        .into_iter()
        .enumerate()
        .map(|(j, (index, reward))| (index, reward, trace.records[j + offset].witness))
        .collect()
}

/// Linear-interpolation quantile of an unsorted sample; `None` when empty.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Outcome of one seeded run, measured against the first scheduled change
/// (or the start of the run when the scenario is stationary).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub seed: u64,
    /// Experiment index the measurements refer to.
    pub reference: usize,
    /// Experiments after the reference until the witness restarted calibration.
    pub detection_latency: Option<usize>,
    /// Experiments after the reference until a fine-tuning phase started after it
    /// ended on the check-jump criterion.
    pub convergence: Option<usize>,
    /// Experiments into that fine-tuning phase until the greedy configuration
    /// was first optimal for the environment in force.
    pub first_optimal: Option<usize>,
    pub final_theta: f64,
    pub final_guess: [u8; 2],
    pub final_score: f64,
    pub optimal_score: f64,
    /// Grid steps between the final greedy displacement and the nearest optimal one.
    pub final_grid_distance: usize,
    /// Mean of the trailing reward curve over the end of the run.
    pub plateau: Option<f64>,
    pub recalibrations: usize,
}

impl RunMetrics {
    pub fn final_is_optimal(&self) -> bool {
        self.final_score >= self.optimal_score - SCORE_TIE
    }
}

/// Optimal score and optimal grid indices, per environment of a scenario.
#[derive(Debug, Clone)]
struct Optima {
    score: Vec<f64>,
    indices: Vec<Vec<usize>>,
}

impl Optima {
    fn new(scenario: &Scenario) -> Self {
        let grid = scenario.grid();
        let ids = 0..=scenario.changes().len();
        let (score, indices) = ids
            .map(|id| {
                let env = scenario.env(id);
                let (_, _, best) = optimal_configuration(env, grid);
                let tied = grid
                    .values()
                    .iter()
                    .enumerate()
                    .filter(|(_, &theta)| {
                        let rule = DecisionRule::new(theta, ml_guess(env, theta));
                        true_score(env, &rule) >= best - SCORE_TIE
                    })
                    .map(|(i, _)| i)
                    .collect();
                (best, tied)
            })
            .unzip();
        Self { score, indices }
    }
}

/// Streaming computation of [`RunMetrics`]; feed it from
/// [`recal_core::controller::drive`].
#[derive(Debug, Clone)]
pub struct MetricsObserver<'a> {
    scenario: &'a Scenario,
    optima: Optima,
    seed: u64,
    reference: usize,
    window: usize,
    span: usize,
    tuning_start: Option<usize>,
    detection: Option<usize>,
    convergence: Option<usize>,
    first_optimal: Option<usize>,
    recalibrations: usize,
    tail: VecDeque<u8>,
    last: Option<(usize, DecisionRule)>,
}

impl<'a> MetricsObserver<'a> {
    pub fn new(scenario: &'a Scenario, mode: Mode, seed: u64) -> Self {
        Self {
            scenario,
            optima: Optima::new(scenario),
            seed,
            reference: scenario.changes().first().map_or(0, |&(at, _)| at),
            window: CURVE_WINDOW,
            span: PLATEAU_SPAN,
            tuning_start: (mode == Mode::Baseline).then_some(0),
            detection: None,
            convergence: None,
            first_optimal: None,
            recalibrations: 0,
            tail: VecDeque::new(),
            last: None,
        }
    }

    pub fn observe(
        &mut self,
        record: &ExperimentRecord,
        transition: Option<&Transition>,
        controller: &ControllerState,
    ) {
        let i = record.index;
        match transition {
            Some(Transition::Seeded(_)) => self.tuning_start = Some(i + 1),
            Some(Transition::Recalibrating) => {
                self.recalibrations += 1;
                if i >= self.reference && self.detection.is_none() {
                    self.detection = Some(i + 1 - self.reference);
                }
                self.tuning_start = match controller.mode() {
                    Mode::Baseline => Some(i + 1),
                    Mode::Proposed => None,
                };
            }
            Some(Transition::Deployed { converged: true })
                if self.fresh_tuning() && self.convergence.is_none() =>
            {
                self.convergence = Some(i + 1 - self.reference);
            }
            _ => {}
        }

        let (index, rule) = greedy_configuration(controller.agent());
        if let Some(start) = self.tuning_start.filter(|&s| s >= self.reference && s <= i) {
            let (env_id, env) = self.scenario.env_at(i);
            if self.first_optimal.is_none()
                && true_score(env, &rule) >= self.optima.score[env_id] - SCORE_TIE
            {
                self.first_optimal = Some(i + 1 - start);
            }
        }
        self.last = Some((index, rule));

        self.tail.push_back(record.reward);
        if self.tail.len() > self.span + self.window - 1 {
            self.tail.pop_front();
        }
    }

    fn fresh_tuning(&self) -> bool {
        self.tuning_start.is_some_and(|s| s >= self.reference)
    }

    pub fn finish(self) -> RunMetrics {
        let final_id = self.scenario.changes().len();
        let env = self.scenario.final_env();
        let grid = self.scenario.grid();
        let (index, rule) = self.last.unwrap_or_else(|| {
            let theta = grid.get(0);
            (0, DecisionRule::new(theta, [0, 0]))
        });
        let distance = self.optima.indices[final_id]
            .iter()
            .map(|&j| j.abs_diff(index))
            .min()
            .unwrap_or(usize::MAX);
        RunMetrics {
            seed: self.seed,
            reference: self.reference,
            detection_latency: self.detection,
            convergence: self.convergence,
            first_optimal: self.first_optimal,
            final_theta: rule.displacement,
            final_guess: rule.guess,
            final_score: true_score(env, &rule),
            optimal_score: self.optima.score[final_id],
            final_grid_distance: distance,
            plateau: plateau(&self.tail, self.window),
            recalibrations: self.recalibrations,
        }
    }
}

fn plateau(tail: &VecDeque<u8>, window: usize) -> Option<f64> {
    if tail.len() < window {
        return None;
    }
    let rewards: Vec<u8> = tail.iter().copied().collect();
    let mut sum: u64 = rewards[..window].iter().map(|&r| u64::from(r)).sum();
    let mut total = sum as f64;
    let mut points = 1usize;
    for i in window..rewards.len() {
        sum = sum + u64::from(rewards[i]) - u64::from(rewards[i - window]);
        total += sum as f64;
        points += 1;
    }
    Some(total / (points as f64 * window as f64))
}
