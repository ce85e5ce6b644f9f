//! Scenario files, seeded batches, metrics and trace files around
//! [`recal_core`].

pub mod batch;
pub mod emit;
pub mod error;
pub mod metrics;
pub mod scenario_file;

pub use batch::{run_batch, run_metrics, run_trace, BatchSummary};
pub use emit::{emit_trace, read_trace, TraceFormat};
pub use error::{HarnessError, Result};
pub use metrics::{learning_curve, witness_series, RunMetrics};
pub use scenario_file::{load_scenario, parse_scenario, ScenarioConfig};
