//! Ground-truth model of a Kennedy receiver: a displacement followed by an
//! on/off photodetector, acting on the binary phase-flip coherent-state
//! alphabet `{|α⟩, |−α⟩}`.
//!
//! The environment is hidden from the calibrating agent. It fixes the signal
//! intensity `|α|²`, a bias on the symbol priors and a multiplicative gain on
//! the displacement the receiver actually applies. With gain `λ` and control
//! value `θ`, the detector sees amplitude `(−1)^k α + λθ` and stays dark with
//! probability `exp(−|(−1)^k α + λθ|²)`.

use alloc::vec::Vec;
use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::rng;

/// Hidden deployment conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentSpec {
    intensity: f64,
    amplitude: f64,
    prior_bias: f64,
    displacement_gain: f64,
}

impl EnvironmentSpec {
    pub fn new(intensity: f64, prior_bias: f64, displacement_gain: f64) -> Result<Self> {
        if !(intensity.is_finite() && intensity >= 0.0) {
            return Err(Error::OutOfRange {
                field: "intensity",
                value: intensity,
                bound: "finite and >= 0",
            });
        }
        if !(-0.5..=0.5).contains(&prior_bias) {
            return Err(Error::OutOfRange {
                field: "prior_bias",
                value: prior_bias,
                bound: "[-0.5, 0.5]",
            });
        }
        if !(displacement_gain.is_finite() && displacement_gain > 0.0) {
            return Err(Error::OutOfRange {
                field: "displacement_gain",
                value: displacement_gain,
                bound: "finite and > 0",
            });
        }
        Ok(Self {
            intensity,
            amplitude: libm::sqrt(intensity),
            prior_bias,
            displacement_gain,
        })
    }

    /// Correctly functioning device with equiprobable symbols.
    pub fn ideal(intensity: f64) -> Result<Self> {
        Self::new(intensity, 0.0, 1.0)
    }

    /// Mean photon number `|α|²`.
    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    /// Real, non-negative `α = √intensity`.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn prior_bias(&self) -> f64 {
        self.prior_bias
    }

    pub fn displacement_gain(&self) -> f64 {
        self.displacement_gain
    }

    /// Prior probability of transmitting symbol `k`: `½ + (−1)^k λ₂`.
    pub fn prior(&self, k: u8) -> f64 {
        if k == 0 {
            0.5 + self.prior_bias
        } else {
            0.5 - self.prior_bias
        }
    }

    /// Amplitude hitting the detector for symbol `k` at control value `theta`.
    fn detected_amplitude(&self, k: u8, theta: f64) -> f64 {
        let signal = if k == 0 {
            self.amplitude
        } else {
            -self.amplitude
        };
        signal + self.displacement_gain * theta
    }
}

/// Sorted set of displacement values available to the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementGrid {
    values: Vec<f64>,
    zero_index: usize,
}

impl DisplacementGrid {
    /// Requires at least two finite, strictly increasing values, one of which is `0`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidGrid("needs at least two points"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("values must be finite"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("values must be strictly increasing"));
        }
        let zero_index = values
            .iter()
            .position(|&v| v == 0.0)
            .ok_or(Error::InvalidGrid("must contain the value 0"))?;
        Ok(Self { values, zero_index })
    }

    /// `points` evenly spaced values on `[min, max]`.
    ///
    /// The point closest to zero is snapped to exactly `0`; the grid is
    /// rejected if no point lies within half a step of zero.
    pub fn uniform(min: f64, max: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidGrid("needs at least two points"));
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::InvalidGrid("bounds must be finite with min < max"));
        }
        let step = (max - min) / (points - 1) as f64;
        let mut values: Vec<f64> = (0..points).map(|i| min + step * i as f64).collect();
        values[points - 1] = max;
        let (closest, _) =
            values
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |(bi, bd), (i, &v)| {
                    let d = libm::fabs(v);
                    if d < bd {
                        (i, d)
                    } else {
                        (bi, bd)
                    }
                });
        if libm::fabs(values[closest]) > 0.5 * step {
            return Err(Error::InvalidGrid("must contain the value 0"));
        }
        values[closest] = 0.0;
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Index of the `θ = 0` point.
    pub fn zero_index(&self) -> usize {
        self.zero_index
    }

    /// Index of the grid value closest to `theta` (lower index on ties).
    pub fn nearest_index(&self, theta: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, &v) in self.values.iter().enumerate() {
            let d = libm::fabs(v - theta);
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        best
    }
}

impl Default for DisplacementGrid {
    /// 25 points on `[−1.5, 1.5]`.
    fn default() -> Self {
        Self::uniform(-1.5, 1.5, 25).expect("default grid is valid")
    }
}

/// One transmitted symbol and the detector response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentOutcome {
    pub k: u8,
    pub n: u8,
}

/// Receiver configuration: a displacement and a map from click outcome to guess.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRule {
    pub displacement: f64,
    /// `guess[n]` is the symbol claimed after observing outcome `n`.
    pub guess: [u8; 2],
}

impl DecisionRule {
    pub fn new(displacement: f64, guess: [u8; 2]) -> Self {
        Self {
            displacement,
            guess,
        }
    }

    pub fn guess_for(&self, n: u8) -> u8 {
        self.guess[usize::from(n)]
    }
}

/// Probability of no click, `exp(−|(−1)^k α + λθ|²)`.
pub fn no_click_probability(k: u8, theta: f64, env: &EnvironmentSpec) -> f64 {
    let a = env.detected_amplitude(k, theta);
    libm::exp(-(a * a))
}

/// Probability that the detector clicks (`n = 1`) for symbol `k` at control `theta`.
pub fn click_probability(k: u8, theta: f64, env: &EnvironmentSpec) -> f64 {
    1.0 - no_click_probability(k, theta, env)
}

/// `p(n | k, θ)`.
pub fn outcome_probability(n: u8, k: u8, theta: f64, env: &EnvironmentSpec) -> f64 {
    if n == 0 {
        no_click_probability(k, theta, env)
    } else {
        click_probability(k, theta, env)
    }
}

/// Draws the transmitted symbol from the priors and then the detector outcome.
///
/// Consumes exactly two uniforms from `rng` per call.
pub fn sample_experiment<R: RngCore + ?Sized>(
    env: &EnvironmentSpec,
    theta: f64,
    rng: &mut R,
) -> ExperimentOutcome {
    let k = 1 - rng::bernoulli(rng, env.prior(0));
    let n = rng::bernoulli(rng, click_probability(k, theta, env));
    ExperimentOutcome { k, n }
}

/// Exact success probability of `rule` under `env`, by enumeration over `(k, n)`.
pub fn true_score(env: &EnvironmentSpec, rule: &DecisionRule) -> f64 {
    let mut score = 0.0;
    for k in 0..2u8 {
        for n in 0..2u8 {
            if rule.guess_for(n) == k {
                score += env.prior(k) * outcome_probability(n, k, rule.displacement, env);
            }
        }
    }
    score
}

/// Maximum-likelihood guess map at `theta`: for each outcome, the symbol with the
/// larger joint probability `p_k p(n|k)` (ties go to `0`).
pub fn ml_guess(env: &EnvironmentSpec, theta: f64) -> [u8; 2] {
    let mut guess = [0u8; 2];
    for n in 0..2u8 {
        let joint0 = env.prior(0) * outcome_probability(n, 0, theta, env);
        let joint1 = env.prior(1) * outcome_probability(n, 1, theta, env);
        guess[usize::from(n)] = u8::from(joint1 > joint0);
    }
    guess
}

/// Best grid point and guess map by brute force over the grid.
///
/// Returns the grid index alongside the rule and its score. Ties go to the
/// lowest grid index.
pub fn optimal_configuration(
    env: &EnvironmentSpec,
    grid: &DisplacementGrid,
) -> (usize, DecisionRule, f64) {
    let mut best: Option<(usize, DecisionRule, f64)> = None;
    for (i, &theta) in grid.values().iter().enumerate() {
        let rule = DecisionRule::new(theta, ml_guess(env, theta));
        let score = true_score(env, &rule);
        if best.is_none_or(|(_, _, s)| score > s) {
            best = Some((i, rule, score));
        }
    }
    best.expect("grid has at least two points")
}
