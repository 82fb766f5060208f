use crate::error::{Error, Result};

/// A piecewise-constant, right-continuous vector path recorded event by event.
///
/// The value stored at `times[j]` holds on `[times[j], times[j+1])`; the last
/// recorded value holds through `horizon`. Evaluation is right-continuous, so
/// querying exactly at an event time returns the post-event state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPath {
    times: Vec<f64>,
    values: Vec<f64>, // row-major, `dim` entries per time point
    dim: usize,
    horizon: f64,
}

impl StepPath {
    /// Start a path at time 0 with the given initial state.
    pub fn new(initial: &[f64], horizon: f64) -> Self {
        assert!(!initial.is_empty(), "path state must have at least one coordinate");
        assert!(horizon >= 0.0 && horizon.is_finite());
        StepPath {
            times: vec![0.0],
            values: initial.to_vec(),
            dim: initial.len(),
            horizon,
        }
    }

    /// Append a state change. `t` must be strictly increasing and within the horizon.
    pub fn push(&mut self, t: f64, state: &[f64]) {
        debug_assert_eq!(state.len(), self.dim);
        debug_assert!(t > *self.times.last().unwrap());
        debug_assert!(t <= self.horizon);
        self.times.push(t);
        self.values.extend_from_slice(state);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of recorded time points (including the initial state).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false // always holds the initial state
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, idx: usize) -> f64 {
        self.times[idx]
    }

    pub fn state(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.dim..(idx + 1) * self.dim]
    }

    /// Index of the state holding at time `t` (greatest `j` with `times[j] <= t`).
    pub fn index_at(&self, t: f64) -> Result<usize> {
        if t < self.times[0] || t > self.horizon {
            return Err(Error::GridOutOfRange(format!(
                "t = {t} outside path span [{}, {}]",
                self.times[0], self.horizon
            )));
        }
        // partition_point returns the first index with times[i] > t
        Ok(self.times.partition_point(|&s| s <= t) - 1)
    }

    /// Right-continuous evaluation at `t`.
    pub fn state_at(&self, t: f64) -> Result<&[f64]> {
        Ok(self.state(self.index_at(t)?))
    }

    /// Iterate over constant segments `(start, end, state)`; the final segment
    /// ends at the horizon.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, &[f64])> + '_ {
        (0..self.len()).map(move |j| {
            let end = if j + 1 < self.len() {
                self.times[j + 1]
            } else {
                self.horizon
            };
            (self.times[j], end, self.state(j))
        })
    }

    /// True when both paths agree on every event strictly before `t`
    /// (times and states compared bitwise).
    pub fn prefix_eq(&self, other: &StepPath, t: f64) -> bool {
        if self.dim != other.dim {
            return false;
        }
        let a = self.times.partition_point(|&s| s < t);
        let b = other.times.partition_point(|&s| s < t);
        if a != b {
            return false;
        }
        self.times[..a] == other.times[..a]
            && self.values[..a * self.dim] == other.values[..a * self.dim]
    }
}
