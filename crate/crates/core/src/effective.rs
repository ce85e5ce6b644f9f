//! The agent's internal ansatz for the score landscape.
//!
//! The agent assumes an ideal device (unit displacement gain, equiprobable
//! symbols) and only estimates the signal intensity, from a block of
//! experiments run at zero displacement. At `θ = 0` both symbols share the
//! no-click probability `exp(−|α|²)`, so the pooled no-click frequency gives
//! `|α|² = −ln p̂(n = 0)`.
//!
//! The value table is seeded with `Q₁(θ, n, k̂) = ½ p(n | k̂, θ)`, the joint
//! probability of observing `n` with `k̂` sent, and `Q₀(θ) = Σₙ max_k̂ Q₁`, which
//! is the maximum-likelihood success probability of the ideal receiver at `θ`.

use crate::agent::QTable;
use crate::error::{Error, Result};
use crate::receiver::{outcome_probability, DisplacementGrid, EnvironmentSpec};

/// Intensity estimated from `sample_count` zero-displacement experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityEstimate {
    pub value: f64,
    /// Reported as `1 / sample_count`.
    pub uncertainty: f64,
    pub sample_count: u64,
}

impl IntensityEstimate {
    /// Ideal-device environment parametrized by this estimate.
    pub fn model(&self) -> EnvironmentSpec {
        EnvironmentSpec::ideal(self.value).expect("estimate is finite and non-negative")
    }
}

/// `−ln(zero_count / total)`, with a zero count replaced by `½` so the
/// estimate stays finite.
pub fn estimate_intensity(zero_count: u64, total: u64) -> Result<IntensityEstimate> {
    if total == 0 {
        return Err(Error::CountOutOfRange {
            field: "total",
            value: 0,
            bound: "> 0",
        });
    }
    if zero_count > total {
        return Err(Error::CountOutOfRange {
            field: "zero_count",
            value: zero_count,
            bound: "<= total",
        });
    }
    let zeros = if zero_count == 0 {
        0.5
    } else {
        zero_count as f64
    };
    Ok(IntensityEstimate {
        value: libm::log(total as f64 / zeros),
        uncertainty: 1.0 / total as f64,
        sample_count: total,
    })
}

fn q1_with_model(model: &EnvironmentSpec, theta: f64, n: u8, khat: u8) -> f64 {
    0.5 * outcome_probability(n, khat, theta, model)
}

fn q0_with_model(model: &EnvironmentSpec, theta: f64) -> f64 {
    (0..2u8)
        .map(|n| q1_with_model(model, theta, n, 0).max(q1_with_model(model, theta, n, 1)))
        .sum()
}

/// Seed for the guess-stage value `Q₁(θ, n, k̂)`.
pub fn q1_seed(est: &IntensityEstimate, theta: f64, n: u8, khat: u8) -> f64 {
    q1_with_model(&est.model(), theta, n, khat)
}

/// Seed for the displacement-stage value `Q₀(θ) = Σₙ max_k̂ Q₁(θ, n, k̂)`.
pub fn q0_seed(est: &IntensityEstimate, theta: f64) -> f64 {
    q0_with_model(&est.model(), theta)
}

/// Fresh table seeded from the effective model, with all visit counters at zero.
pub fn seed_qtable(est: &IntensityEstimate, grid: &DisplacementGrid) -> QTable {
    let model = est.model();
    let mut table = QTable::uniform(grid.clone(), 0.0);
    for (i, &theta) in grid.values().iter().enumerate() {
        for n in 0..2u8 {
            for khat in 0..2u8 {
                table.set_q1(i, n, khat, q1_with_model(&model, theta, n, khat));
            }
        }
        let q0 = (0..2u8)
            .map(|n| table.q1(i, n, 0).max(table.q1(i, n, 1)))
            .sum();
        table.set_q0(i, q0);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::receiver::{ml_guess, true_score, DecisionRule};

    fn est(value: f64) -> IntensityEstimate {
        IntensityEstimate {
            value,
            uncertainty: 1e-3,
            sample_count: 1000,
        }
    }

    #[test]
    fn estimate_examples() {
        let e = estimate_intensity(670, 1000).unwrap();
        assert!((e.value - 0.400_477_566_597_125_3).abs() < 1e-14);
        assert_eq!(e.uncertainty, 0.001);
        assert_eq!(e.sample_count, 1000);
        assert_eq!(estimate_intensity(1000, 1000).unwrap().value, 0.0);
        let clamped = estimate_intensity(0, 1000).unwrap();
        assert!((clamped.value - 7.600_902_459_542_082).abs() < 1e-12);
    }

    #[test]
    fn estimate_rejects_bad_counts() {
        assert!(estimate_intensity(0, 0).is_err());
        assert!(estimate_intensity(11, 10).is_err());
    }

    #[test]
    fn estimate_decreases_with_zero_count() {
        let mut last = f64::INFINITY;
        for z in 0..=200 {
            let v = estimate_intensity(z, 200).unwrap().value;
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn q1_examples() {
        let e = est(0.4);
        assert!((q1_seed(&e, 0.0, 0, 0) - 0.335_160_023_017_819_6).abs() < 1e-15);
        let a = libm::sqrt(0.4);
        assert_eq!(q1_seed(&e, a, 0, 1), 0.5);
        for n in 0..2 {
            assert_eq!(q1_seed(&e, 0.0, n, 0), q1_seed(&e, 0.0, n, 1));
        }
    }

    #[test]
    fn q1_rows_sum_to_half() {
        let e = est(0.9);
        for i in -20..=20 {
            let theta = 0.1 * i as f64;
            for khat in 0..2 {
                let s = q1_seed(&e, theta, 0, khat) + q1_seed(&e, theta, 1, khat);
                assert!((s - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn q0_examples() {
        assert_eq!(q0_seed(&est(0.4), 0.0), 0.5);
        let v = q0_seed(&est(0.4), libm::sqrt(0.4));
        assert!((v - 0.899_051_741_002_672_3).abs() < 1e-14);
        assert_eq!(q0_seed(&est(0.0), 0.0), 0.5);
    }

    #[test]
    fn q0_matches_receiver_oracle() {
        for i in 1..=20 {
            let intensity = 0.1 * i as f64;
            let e = est(intensity);
            let model = EnvironmentSpec::ideal(intensity).unwrap();
            for j in -30..=30 {
                let theta = 0.05 * j as f64;
                let rule = DecisionRule::new(theta, ml_guess(&model, theta));
                assert!((q0_seed(&e, theta) - true_score(&model, &rule)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn seeded_table_properties() {
        let grid = DisplacementGrid::uniform(-1.5, 1.5, 25).unwrap();
        let table = seed_qtable(&est(0.4), &grid);
        for i in 0..grid.len() {
            let identity: f64 = (0..2)
                .map(|n| table.q1(i, n, 0).max(table.q1(i, n, 1)))
                .sum();
            assert_eq!(table.q0(i), identity);
            assert!((0.5..=1.0).contains(&table.q0(i)));
            for n in 0..2 {
                for k in 0..2 {
                    assert!((0.0..=0.5).contains(&table.q1(i, n, k)));
                    assert_eq!(table.visits1(i, n, k), 0);
                }
            }
            assert_eq!(table.visits0(i), 0);
        }
    }

    #[test]
    fn seeded_argmax_sits_at_a_nulling_point() {
        let a = libm::sqrt(0.4);
        // No grid point past the nulling amplitude: the continuous optimum of
        // the ideal receiver lies slightly beyond ±α.
        let grid = DisplacementGrid::new(alloc::vec![-a, -0.4, -0.2, 0.0, 0.2, 0.4, a]).unwrap();
        let table = seed_qtable(&est(0.4), &grid);
        // both nulling points tie exactly; the lower index wins
        assert_eq!(table.q0(0), table.q0(6));
        assert_eq!(table.argmax_q0(), 0);
    }
}
