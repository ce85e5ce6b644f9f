//! De-calibration witness: the mean detector output over consecutive,
//! non-overlapping blocks of experiments. Each completed block is compared
//! against the previous one and a jump larger than `δ` is reported as an
//! anomaly.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessVerdict {
    Normal,
    Anomaly,
}

/// `Anomaly` iff `|curr − prev| > δ`.
pub fn classify(prev: f64, curr: f64, delta: f64) -> WitnessVerdict {
    if libm::fabs(curr - prev) > delta {
        WitnessVerdict::Anomaly
    } else {
        WitnessVerdict::Normal
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessState {
    window_size: usize,
    delta: f64,
    ones: usize,
    count: usize,
    previous_mean: Option<f64>,
}

impl WitnessState {
    pub fn new(window_size: usize, delta: f64) -> Self {
        assert!(
            window_size > 0,
            "witness window must hold at least one outcome"
        );
        Self {
            window_size,
            delta,
            ones: 0,
            count: 0,
            previous_mean: None,
        }
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    /// Outcomes in the current, unfinished window.
    pub fn pending(&self) -> usize {
        self.count
    }

    /// Mean of the last completed window.
    pub fn previous_mean(&self) -> Option<f64> {
        self.previous_mean
    }

    /// Forget everything, including the reference window.
    pub fn reset(&mut self) {
        self.ones = 0;
        self.count = 0;
        self.previous_mean = None;
    }

    /// Adds one detector outcome. A verdict is returned each time a window
    /// fills; the first window has no reference and is always `Normal`.
    pub fn push(&mut self, n: u8) -> Option<WitnessVerdict> {
        debug_assert!(n <= 1);
        self.ones += usize::from(n);
        self.count += 1;
        if self.count < self.window_size {
            return None;
        }
        let mean = self.ones as f64 / self.window_size as f64;
        let verdict = match self.previous_mean {
            Some(prev) => classify(prev, mean, self.delta),
            None => WitnessVerdict::Normal,
        };
        self.previous_mean = Some(mean);
        self.ones = 0;
        self.count = 0;
        Some(verdict)
    }

    /// Mean of the current, possibly partial, window.
    pub fn witness_value(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::EmptyWindow);
        }
        Ok(self.ones as f64 / self.count as f64)
    }

    /// Latest witness reading: the running window mean, or the last completed
    /// mean right after a window rolls over.
    pub fn latest(&self) -> Option<f64> {
        self.witness_value().ok().or(self.previous_mean)
    }
}
