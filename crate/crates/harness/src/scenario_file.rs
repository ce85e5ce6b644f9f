//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! id = "faulty-displacement"
//! total_experiments = 150000
//!
//! [hyperparameters]          # any subset; the rest keeps its default
//! check_jump_threshold = 3000
//! delta = 0.1
//!
//! [grid]                     # either min/max/points or an explicit list
//! min = -1.5
//! max = 1.5
//! points = 25
//!
//! [environment]
//! intensity = 1.0
//!
//! [[schedule]]               # unset fields carry over from the previous environment
//! at = 50000
//! intensity = 0.1
//! displacement_gain = 1.25
//! ```
//!
//! Defaults: 25 grid points on `[−1.5, 1.5]`, the proposed-method
//! hyperparameters (`N_rl = 5·10⁴`, `γ = 1`), unbiased priors, unit gain and
//! `10⁶` experiments.

use std::path::Path;

use recal_core::{DisplacementGrid, EnvironmentSpec, Hyperparameters, Scenario};
use serde::Deserialize;

use crate::error::{HarnessError, Result};

pub const DEFAULT_TOTAL_EXPERIMENTS: usize = 1_000_000;
pub const DEFAULT_GRID: (f64, f64, usize) = (-1.5, 1.5, 25);

/// A loaded scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub id: String,
    pub scenario: Scenario,
    pub hyperparameters: Hyperparameters,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    id: Option<String>,
    total_experiments: Option<usize>,
    #[serde(default)]
    hyperparameters: RawHyperparameters,
    #[serde(default)]
    grid: RawGrid,
    environment: RawEnvironment,
    #[serde(default)]
    schedule: Vec<RawChange>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHyperparameters {
    check_jump_threshold: Option<usize>,
    delta: Option<f64>,
    epsilon0: Option<f64>,
    delta_epsilon: Option<f64>,
    delta_weight: Option<f64>,
    delta_l: Option<f64>,
    n_eff: Option<usize>,
    n_rl: Option<usize>,
    gamma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    min: Option<f64>,
    max: Option<f64>,
    points: Option<usize>,
    values: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvironment {
    intensity: f64,
    #[serde(default)]
    prior_bias: f64,
    #[serde(default = "unit")]
    displacement_gain: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChange {
    at: usize,
    intensity: Option<f64>,
    prior_bias: Option<f64>,
    displacement_gain: Option<f64>,
}

impl RawHyperparameters {
    fn resolve(&self) -> Hyperparameters {
        let d = Hyperparameters::PROPOSED;
        Hyperparameters {
            n_eff: self.n_eff.unwrap_or(d.n_eff),
            n_rl: self.n_rl.unwrap_or(d.n_rl),
            delta: self.delta.unwrap_or(d.delta),
            epsilon0: self.epsilon0.unwrap_or(d.epsilon0),
            delta_epsilon: self.delta_epsilon.unwrap_or(d.delta_epsilon),
            delta_weight: self.delta_weight.unwrap_or(d.delta_weight),
            delta_l: self.delta_l.unwrap_or(d.delta_l),
            gamma: self.gamma.unwrap_or(d.gamma),
            check_jump_threshold: self.check_jump_threshold.unwrap_or(d.check_jump_threshold),
        }
    }
}

impl RawGrid {
    fn resolve(&self) -> recal_core::Result<DisplacementGrid> {
        match &self.values {
            Some(values) => DisplacementGrid::new(values.clone()),
            None => {
                let (min, max, points) = DEFAULT_GRID;
                DisplacementGrid::uniform(
                    self.min.unwrap_or(min),
                    self.max.unwrap_or(max),
                    self.points.unwrap_or(points),
                )
            }
        }
    }
}

fn validation(context: impl Into<String>) -> impl FnOnce(recal_core::Error) -> HarnessError {
    let context = context.into();
    move |source| HarnessError::Validation { context, source }
}

/// Parses scenario text; `origin` names the source in error messages and
/// provides the default id.
pub fn parse_scenario(text: &str, origin: &Path) -> Result<ScenarioConfig> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| HarnessError::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    if raw.grid.values.is_some()
        && (raw.grid.min.is_some() || raw.grid.max.is_some() || raw.grid.points.is_some())
    {
        return Err(HarnessError::Invalid(format!(
            "{}: grid: give either `values` or `min`/`max`/`points`, not both",
            origin.display()
        )));
    }

    let hyperparameters = raw.hyperparameters.resolve();
    hyperparameters
        .validate()
        .map_err(validation("hyperparameters"))?;
    let grid = raw.grid.resolve().map_err(validation("grid"))?;

    let env = &raw.environment;
    let initial = EnvironmentSpec::new(env.intensity, env.prior_bias, env.displacement_gain)
        .map_err(validation("environment"))?;
    let mut changes = Vec::with_capacity(raw.schedule.len());
    let mut current = initial;
    for (i, change) in raw.schedule.iter().enumerate() {
        let next = EnvironmentSpec::new(
            change.intensity.unwrap_or(current.intensity()),
            change.prior_bias.unwrap_or(current.prior_bias()),
            change
                .displacement_gain
                .unwrap_or(current.displacement_gain()),
        )
        .map_err(validation(format!("schedule[{i}]")))?;
        changes.push((change.at, next));
        current = next;
    }
    let total = raw.total_experiments.unwrap_or(DEFAULT_TOTAL_EXPERIMENTS);
    let scenario = Scenario::new(initial, changes, total, grid).map_err(validation("schedule"))?;

    let id = raw.id.unwrap_or_else(|| {
        origin
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    });
    Ok(ScenarioConfig {
        id,
        scenario,
        hyperparameters,
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_scenario(&text, path)
}
