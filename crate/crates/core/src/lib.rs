//! Simulation core for automatic re-calibration of a Kennedy-type binary
//! coherent-state receiver.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no I/O. Every
//! stochastic routine takes a caller-owned [`rand_core::RngCore`], so runs are
//! reproducible given a seed and independent runs can execute concurrently.
//!
//! * [`receiver`]: ground-truth detector statistics, brute-force score oracles.
//! * [`effective`]: intensity estimation and analytic seeding of the value table.
//! * [`agent`]: the tabular Q-learner and its exploration schedule.
//! * [`witness`]: windowed detector-mean change detection.
//! * [`controller`]: the estimate / fine-tune / deploy / detect phase machine.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod agent;
pub mod controller;
pub mod effective;
pub mod error;
pub mod receiver;
mod rng;
pub mod scenario;
pub mod witness;

pub use agent::{AgentState, Hyperparameters, QTable};
pub use controller::{
    run, run_baseline, ControllerState, ExperimentRecord, Mode, Phase, RunTrace, Snapshot,
};
pub use effective::IntensityEstimate;
pub use error::{Error, Result};
pub use receiver::{DecisionRule, DisplacementGrid, EnvironmentSpec, ExperimentOutcome};
pub use scenario::Scenario;
pub use witness::{WitnessState, WitnessVerdict};
