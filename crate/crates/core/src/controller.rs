//! The calibrate / fine-tune / deploy / detect loop.
//!
//! ```text
//!   ESTIMATING ──N_eff──▶ FINE_TUNING ──converged or N_rl──▶ DEPLOYED
//!       ▲                                                      │
//!       └─────────────────── witness anomaly ◀─────────────────┘
//! ```
//!
//! In `Proposed` mode each cycle starts by estimating the intensity at zero
//! displacement and seeding the value table from the effective model. In
//! `Baseline` mode there is no estimation: the loop starts (and restarts) in
//! fine-tuning with a flat table.

use alloc::string::String;
use alloc::vec::Vec;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_core::RngCore;

use crate::agent::{
    check_convergence, epsilon_step, greedy_configuration, select_displacement, select_guess,
    update_after_episode, AgentState, Hyperparameters, QTable,
};
use crate::effective::{estimate_intensity, seed_qtable, IntensityEstimate};
use crate::error::{Error, Result};
use crate::receiver::sample_experiment;
use crate::scenario::Scenario;
use crate::witness::{WitnessState, WitnessVerdict};

/// Value every entry of a baseline table starts from.
pub const BASELINE_INITIAL_VALUE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Estimating,
    FineTuning,
    Deployed,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Estimating => "ESTIMATING",
            Phase::FineTuning => "FINE_TUNING",
            Phase::Deployed => "DEPLOYED",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ESTIMATING" => Some(Phase::Estimating),
            "FINE_TUNING" => Some(Phase::FineTuning),
            "DEPLOYED" => Some(Phase::Deployed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Effective-model seeding with an intensity-estimation stage.
    Proposed,
    /// Plain Q-learning from a flat table.
    Baseline,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Proposed => "proposed",
            Mode::Baseline => "baseline",
        }
    }
}

/// One line of the run log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentRecord {
    pub index: usize,
    /// Phase the experiment was run in.
    pub phase: Phase,
    pub theta: f64,
    pub n: u8,
    pub k: u8,
    pub khat: u8,
    pub reward: u8,
    /// Witness reading, only while deployed.
    pub witness: Option<f64>,
    /// Exploration rate in force when the experiment was run.
    pub epsilon: f64,
    /// Greedy displacement after the experiment.
    pub greedy_theta: f64,
    pub env_id: usize,
}

/// Copy of the value table at a phase transition or at the end of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Index of the experiment after which the copy was taken.
    pub index: usize,
    pub label: String,
    pub qtable: QTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<ExperimentRecord>,
    pub snapshots: Vec<Snapshot>,
    pub seed: u64,
    pub scenario_id: String,
}

/// Phase-transition event emitted by [`ControllerState::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transition {
    /// Estimation finished; the table was seeded from this estimate.
    Seeded(IntensityEstimate),
    /// Fine-tuning ended, `converged` tells whether the check-jump criterion fired.
    Deployed { converged: bool },
    /// The witness flagged an anomaly and the loop restarted.
    Recalibrating,
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    mode: Mode,
    hp: Hyperparameters,
    phase: Phase,
    phase_step: usize,
    agent: AgentState,
    witness: WitnessState,
    zero_count: u64,
    zero_total: u64,
    cursor: usize,
    last_estimate: Option<IntensityEstimate>,
}

impl ControllerState {
    pub fn new(scenario: &Scenario, hp: Hyperparameters, mode: Mode) -> Result<Self> {
        hp.validate()?;
        let table = QTable::uniform(scenario.grid().clone(), BASELINE_INITIAL_VALUE);
        let phase = match mode {
            Mode::Proposed => Phase::Estimating,
            Mode::Baseline => Phase::FineTuning,
        };
        Ok(Self {
            mode,
            hp,
            phase,
            phase_step: 0,
            agent: AgentState::new(table),
            witness: WitnessState::new(hp.n_eff, hp.delta),
            zero_count: 0,
            zero_total: 0,
            cursor: 0,
            last_estimate: None,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn agent(&self) -> &AgentState {
        &self.agent
    }

    pub fn witness(&self) -> &WitnessState {
        &self.witness
    }

    /// Index of the next experiment.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn last_estimate(&self) -> Option<IntensityEstimate> {
        self.last_estimate
    }

    fn enter_fine_tuning(&mut self, table: QTable) {
        self.agent.reset(table);
        self.phase = Phase::FineTuning;
        self.phase_step = 0;
    }

    fn enter_deployed(&mut self) {
        self.phase = Phase::Deployed;
        self.phase_step = 0;
        self.witness.reset();
    }

    fn recalibrate(&mut self, grid: &crate::receiver::DisplacementGrid) {
        match self.mode {
            Mode::Proposed => {
                self.phase = Phase::Estimating;
                self.phase_step = 0;
                self.zero_count = 0;
                self.zero_total = 0;
                self.agent.epsilon = 1.0;
            }
            Mode::Baseline => {
                self.enter_fine_tuning(QTable::uniform(grid.clone(), BASELINE_INITIAL_VALUE))
            }
        }
    }

    /// Runs one experiment.
    pub fn step<R: RngCore + ?Sized>(
        &mut self,
        scenario: &Scenario,
        rng: &mut R,
    ) -> Result<(ExperimentRecord, Option<Transition>)> {
        let total = scenario.total_experiments();
        if self.cursor >= total {
            return Err(Error::ScenarioExhausted {
                index: self.cursor,
                total,
            });
        }
        let (env_id, env) = scenario.env_at(self.cursor);
        let grid = scenario.grid();
        let hp = self.hp;
        let phase = self.phase;
        let epsilon = self.agent.epsilon;
        let mut witness = None;
        let mut transition = None;

        let (theta, outcome, khat) = match phase {
            Phase::Estimating => {
                let index = grid.zero_index();
                let outcome = sample_experiment(env, 0.0, rng);
                let khat = self.agent.qtable.greedy_guess(index, outcome.n);
                self.zero_total += 1;
                self.zero_count += u64::from(outcome.n == 0);
                self.phase_step += 1;
                if self.phase_step == hp.n_eff {
                    let est = estimate_intensity(self.zero_count, self.zero_total)?;
                    self.last_estimate = Some(est);
                    self.enter_fine_tuning(seed_qtable(&est, grid));
                    transition = Some(Transition::Seeded(est));
                }
                (0.0, outcome, khat)
            }
            Phase::FineTuning => {
                let index = select_displacement(&self.agent, hp.delta_weight, rng);
                let theta = grid.get(index);
                let outcome = sample_experiment(env, theta, rng);
                let khat = select_guess(&self.agent, index, outcome.n, hp.delta_weight, rng);
                let reward = u8::from(khat == outcome.k);
                update_after_episode(&mut self.agent, index, outcome.n, khat, reward, &hp);
                self.agent.epsilon =
                    epsilon_step(self.agent.epsilon, hp.epsilon0, hp.delta_epsilon);
                let greedy = self.agent.qtable.argmax_q0();
                self.agent.streak.push(greedy);
                self.phase_step += 1;
                let converged = check_convergence(&self.agent, hp.check_jump_threshold);
                if converged || self.phase_step >= hp.n_rl {
                    self.enter_deployed();
                    transition = Some(Transition::Deployed { converged });
                }
                (theta, outcome, khat)
            }
            Phase::Deployed => {
                let (_, rule) = greedy_configuration(&self.agent);
                let outcome = sample_experiment(env, rule.displacement, rng);
                let khat = rule.guess_for(outcome.n);
                let verdict = self.witness.push(outcome.n);
                witness = self.witness.latest();
                self.phase_step += 1;
                if verdict == Some(WitnessVerdict::Anomaly) {
                    self.recalibrate(grid);
                    transition = Some(Transition::Recalibrating);
                }
                (rule.displacement, outcome, khat)
            }
        };

        let record = ExperimentRecord {
            index: self.cursor,
            phase,
            theta,
            n: outcome.n,
            k: outcome.k,
            khat,
            reward: u8::from(khat == outcome.k),
            witness,
            epsilon,
            greedy_theta: grid.get(self.agent.qtable.argmax_q0()),
            env_id,
        };
        self.cursor += 1;
        Ok((record, transition))
    }
}

fn transition_label(t: &Transition) -> &'static str {
    match t {
        Transition::Seeded(_) => "seeded",
        Transition::Deployed { converged: true } => "deployed_converged",
        Transition::Deployed { converged: false } => "deployed_budget",
        Transition::Recalibrating => "recalibrating",
    }
}

/// Drives a controller through every experiment of `scenario`, calling
/// `observe` after each step. Snapshots of the table are taken at every
/// transition and after the last experiment.
pub fn drive<R, F>(
    scenario: &Scenario,
    hp: Hyperparameters,
    mode: Mode,
    rng: &mut R,
    mut observe: F,
) -> Result<Vec<Snapshot>>
where
    R: RngCore + ?Sized,
    F: FnMut(&ExperimentRecord, Option<&Transition>, &ControllerState),
{
    let mut controller = ControllerState::new(scenario, hp, mode)?;
    let mut snapshots = Vec::new();
    for _ in 0..scenario.total_experiments() {
        let (record, transition) = controller.step(scenario, rng)?;
        observe(&record, transition.as_ref(), &controller);
        if let Some(t) = transition {
            snapshots.push(Snapshot {
                index: record.index,
                label: transition_label(&t).into(),
                qtable: controller.agent.qtable.clone(),
            });
        }
    }
    if let Some(last) = scenario.total_experiments().checked_sub(1) {
        snapshots.push(Snapshot {
            index: last,
            label: "final".into(),
            qtable: controller.agent.qtable.clone(),
        });
    }
    Ok(snapshots)
}

/// Random stream used for a run with the given seed.
pub fn run_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn run_mode(
    scenario: &Scenario,
    hp: Hyperparameters,
    seed: u64,
    mode: Mode,
    scenario_id: &str,
) -> Result<RunTrace> {
    let mut rng = run_rng(seed);
    let mut records = Vec::with_capacity(scenario.total_experiments());
    let snapshots = drive(scenario, hp, mode, &mut rng, |r, _, _| records.push(*r))?;
    Ok(RunTrace {
        records,
        snapshots,
        seed,
        scenario_id: scenario_id.into(),
    })
}

/// Full trace of the effective-model-seeded loop.
pub fn run(
    scenario: &Scenario,
    hp: Hyperparameters,
    seed: u64,
    scenario_id: &str,
) -> Result<RunTrace> {
    run_mode(scenario, hp, seed, Mode::Proposed, scenario_id)
}

/// Full trace of the plain Q-learning loop. `hp` is used as given; see
/// [`Hyperparameters::baseline`] for the usual exploration settings.
pub fn run_baseline(
    scenario: &Scenario,
    hp: Hyperparameters,
    seed: u64,
    scenario_id: &str,
) -> Result<RunTrace> {
    run_mode(scenario, hp, seed, Mode::Baseline, scenario_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::receiver::{DisplacementGrid, EnvironmentSpec};
    use alloc::vec;

    fn ideal_scenario(total: usize) -> Scenario {
        Scenario::stationary(
            EnvironmentSpec::ideal(1.0).unwrap(),
            total,
            DisplacementGrid::default(),
        )
    }

    #[test]
    fn estimation_runs_at_zero_displacement() {
        let trace = run(&ideal_scenario(1500), Hyperparameters::PROPOSED, 1, "t").unwrap();
        assert!(trace.records[..1000]
            .iter()
            .all(|r| r.theta == 0.0 && r.phase == Phase::Estimating));
        assert_eq!(trace.records[1000].phase, Phase::FineTuning);
        assert_eq!(trace.snapshots[0].label, "seeded");
        assert_eq!(trace.snapshots[0].index, 999);
    }

    #[test]
    fn empty_scenario_gives_empty_trace() {
        let trace = run(&ideal_scenario(0), Hyperparameters::PROPOSED, 1, "t").unwrap();
        assert!(trace.records.is_empty());
        assert!(trace.snapshots.is_empty());
    }

    #[test]
    fn stepping_past_the_end_fails() {
        let s = ideal_scenario(3);
        let mut c = ControllerState::new(&s, Hyperparameters::PROPOSED, Mode::Proposed).unwrap();
        let mut rng = run_rng(0);
        for _ in 0..3 {
            c.step(&s, &mut rng).unwrap();
        }
        assert_eq!(
            c.step(&s, &mut rng).unwrap_err(),
            Error::ScenarioExhausted { index: 3, total: 3 }
        );
    }

    #[test]
    fn identical_seeds_identical_traces() {
        let s = ideal_scenario(8000);
        let a = run(&s, Hyperparameters::PROPOSED, 42, "t").unwrap();
        let b = run(&s, Hyperparameters::PROPOSED, 42, "t").unwrap();
        assert_eq!(a, b);
        let c = run(&s, Hyperparameters::PROPOSED, 43, "t").unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn baseline_starts_fine_tuning_from_flat_table() {
        let s = ideal_scenario(10);
        let trace = run_baseline(&s, Hyperparameters::PROPOSED.baseline(), 5, "t").unwrap();
        assert!(trace.records.iter().all(|r| r.phase == Phase::FineTuning));
        let c =
            ControllerState::new(&s, Hyperparameters::PROPOSED.baseline(), Mode::Baseline).unwrap();
        let (index, _) = greedy_configuration(c.agent());
        assert_eq!(index, 0);
    }

    #[test]
    fn records_are_consistent() {
        let e0 = EnvironmentSpec::ideal(1.0).unwrap();
        let e1 = EnvironmentSpec::new(0.25, 0.0, 1.5).unwrap();
        let s = Scenario::new(e0, vec![(20_000, e1)], 40_000, DisplacementGrid::default()).unwrap();
        let hp = Hyperparameters {
            n_rl: 10_000,
            ..Hyperparameters::PROPOSED
        };
        let mut rng = run_rng(9);
        let mut last_phase_len = 0usize;
        let mut previous: Option<Phase> = None;
        let mut deployed_table: Option<QTable> = None;
        drive(&s, hp, Mode::Proposed, &mut rng, |r, _, c| {
            assert_eq!(r.reward, u8::from(r.k == r.khat));
            assert_eq!(r.witness.is_some(), r.phase == Phase::Deployed);
            assert_eq!(r.env_id, usize::from(r.index >= 20_000));
            if previous == Some(r.phase) {
                last_phase_len += 1;
            } else {
                if previous == Some(Phase::Estimating) {
                    assert_eq!(last_phase_len, 1000);
                }
                if previous == Some(Phase::FineTuning) {
                    assert!(last_phase_len <= 10_000);
                }
                last_phase_len = 1;
            }
            previous = Some(r.phase);
            if r.phase == Phase::Deployed && c.phase() == Phase::Deployed {
                if let Some(t) = &deployed_table {
                    assert_eq!(t, &c.agent().qtable);
                }
                deployed_table = Some(c.agent().qtable.clone());
            } else {
                deployed_table = None;
            }
        })
        .unwrap();
    }
}
