use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::receiver::{DisplacementGrid, EnvironmentSpec};

/// A scripted sequence of hidden environments over a fixed number of experiments.
///
/// `changes[i] = (index, env)` switches to `env` at the start of experiment `index`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    initial_env: EnvironmentSpec,
    changes: Vec<(usize, EnvironmentSpec)>,
    total_experiments: usize,
    grid: DisplacementGrid,
}

impl Scenario {
    pub fn new(
        initial_env: EnvironmentSpec,
        changes: Vec<(usize, EnvironmentSpec)>,
        total_experiments: usize,
        grid: DisplacementGrid,
    ) -> Result<Self> {
        let mut last: Option<usize> = None;
        for (position, &(index, _)) in changes.iter().enumerate() {
            if index >= total_experiments || last.is_some_and(|l| index <= l) {
                return Err(Error::InvalidSchedule { position, index });
            }
            last = Some(index);
        }
        Ok(Self {
            initial_env,
            changes,
            total_experiments,
            grid,
        })
    }

    /// A single environment for the whole run.
    pub fn stationary(
        env: EnvironmentSpec,
        total_experiments: usize,
        grid: DisplacementGrid,
    ) -> Self {
        Self::new(env, Vec::new(), total_experiments, grid).expect("no schedule to violate")
    }

    pub fn initial_env(&self) -> &EnvironmentSpec {
        &self.initial_env
    }

    pub fn changes(&self) -> &[(usize, EnvironmentSpec)] {
        &self.changes
    }

    pub fn total_experiments(&self) -> usize {
        self.total_experiments
    }

    pub fn grid(&self) -> &DisplacementGrid {
        &self.grid
    }

    /// Environment by id: `0` is the initial one, `i` the `i`-th change.
    pub fn env(&self, env_id: usize) -> &EnvironmentSpec {
        if env_id == 0 {
            &self.initial_env
        } else {
            &self.changes[env_id - 1].1
        }
    }

    /// Environment in force at experiment `index`, with its id.
    pub fn env_at(&self, index: usize) -> (usize, &EnvironmentSpec) {
        let id = self.changes.partition_point(|&(at, _)| at <= index);
        (id, self.env(id))
    }

    /// Environment in force at the end of the run.
    pub fn final_env(&self) -> &EnvironmentSpec {
        self.env(self.changes.len())
    }

    /// Index of the last scheduled change, if any.
    pub fn last_change(&self) -> Option<usize> {
        self.changes.last().map(|&(at, _)| at)
    }
}
