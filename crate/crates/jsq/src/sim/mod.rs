//! Exact continuous-time Markov chain simulation of the M/M/n system under
//! join-the-shortest-queue routing, in a queue-length-counts representation
//! and an explicit per-queue representation, plus the truncated variant that
//! rejects arrivals which would create queues longer than two.

mod counts;
mod path;
mod per_queue;

pub use counts::{
    simulate_jsq_counts, simulate_jsq_counts_with_rng, simulate_jsq_truncated,
    simulate_jsq_truncated_with_rng,
};
pub use path::StepPath;
pub use per_queue::{simulate_jsq_per_queue, simulate_jsq_per_queue_with_rng, WaitRecords};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters for one simulated system.
///
/// The arrival rate is `lambda * n` with `lambda = 1 - beta / sqrt(n)`, so the
/// slack capacity scales like `beta * sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Number of servers.
    pub n: u64,
    /// Heavy-traffic coefficient; must satisfy `0 < beta < sqrt(n)`.
    pub beta: f64,
    /// Longest representable queue length (state dimension). Must be >= 2 and
    /// at least the longest queue present in the initial condition.
    pub k_max: usize,
    /// Simulation end time.
    pub horizon: f64,
    /// Base RNG seed; replications derive independent streams from it.
    pub seed: u64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("n must be positive".into()));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParams(format!(
                "beta must be a positive real, got {}",
                self.beta
            )));
        }
        if self.beta >= (self.n as f64).sqrt() {
            return Err(Error::InvalidParams(format!(
                "beta = {} must be < sqrt(n) = {} so that 0 < lambda < 1",
                self.beta,
                (self.n as f64).sqrt()
            )));
        }
        if self.k_max < 2 {
            return Err(Error::InvalidParams("k_max must be >= 2".into()));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParams(format!(
                "horizon must be a finite nonnegative time, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Per-server utilization `lambda = 1 - beta / sqrt(n)`.
    pub fn lambda(&self) -> f64 {
        1.0 - self.beta / (self.n as f64).sqrt()
    }

    /// Total arrival rate `lambda * n`.
    pub fn arrival_rate(&self) -> f64 {
        self.lambda() * self.n as f64
    }
}

/// CTMC state in the counts representation: `q[i]` is the number of queues
/// holding at least `i + 1` customers (customer in service included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountState {
    q: Vec<u64>,
}

impl CountState {
    /// Build and validate against the monotone chain `n >= q[0] >= q[1] >= ... >= 0`.
    pub fn new(q: Vec<u64>, n: u64) -> Result<Self> {
        if q.len() < 2 {
            return Err(Error::InvalidParams("count state needs k_max >= 2 levels".into()));
        }
        let state = CountState { q };
        state.validate(n)?;
        Ok(state)
    }

    pub fn validate(&self, n: u64) -> Result<()> {
        if self.q[0] > n {
            return Err(Error::InvalidParams(format!(
                "q[0] = {} exceeds server count n = {}",
                self.q[0], n
            )));
        }
        for i in 1..self.q.len() {
            if self.q[i] > self.q[i - 1] {
                return Err(Error::InvalidParams(format!(
                    "counts must be nonincreasing: q[{}] = {} > q[{}] = {}",
                    i,
                    self.q[i],
                    i - 1,
                    self.q[i - 1]
                )));
            }
        }
        Ok(())
    }

    /// All servers idle.
    pub fn empty(k_max: usize) -> Self {
        CountState { q: vec![0; k_max.max(2)] }
    }

    /// Every server holds exactly one customer.
    pub fn all_busy(n: u64, k_max: usize) -> Self {
        let mut q = vec![0; k_max.max(2)];
        q[0] = n;
        CountState { q }
    }

    pub fn counts(&self) -> &[u64] {
        &self.q
    }

    pub fn k_max(&self) -> usize {
        self.q.len()
    }

    pub fn as_row(&self) -> Vec<f64> {
        self.q.iter().map(|&c| c as f64).collect()
    }
}

/// Initial condition selector used by experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialCondition {
    Preset(InitialPreset),
    Explicit(Vec<u64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialPreset {
    /// All servers idle.
    Empty,
    /// Every server holds exactly one customer (zero on the diffusion scale).
    AllBusy,
}

impl InitialCondition {
    pub fn count_state(&self, n: u64, k_max: usize) -> Result<CountState> {
        match self {
            InitialCondition::Preset(InitialPreset::Empty) => Ok(CountState::empty(k_max)),
            InitialCondition::Preset(InitialPreset::AllBusy) => Ok(CountState::all_busy(n, k_max)),
            InitialCondition::Explicit(q) => {
                let mut q = q.clone();
                if q.len() > k_max {
                    return Err(Error::InvalidParams(format!(
                        "explicit initial counts have {} levels but k_max = {}",
                        q.len(),
                        k_max
                    )));
                }
                q.resize(k_max, 0);
                CountState::new(q, n)
            }
        }
    }
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Preset(InitialPreset::AllBusy)
    }
}

/// Event times at which the truncated system touched its barriers.
///
/// `u1_events` holds every arrival time at which all servers were busy;
/// `u2_events` holds the subset at which additionally every queue already had
/// length two, so the arrival was rejected.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TruncationCounters {
    pub u1_events: Vec<f64>,
    pub u2_events: Vec<f64>,
}

impl TruncationCounters {
    pub fn u1_count(&self, t: f64) -> usize {
        self.u1_events.partition_point(|&s| s <= t)
    }

    pub fn u2_count(&self, t: f64) -> usize {
        self.u2_events.partition_point(|&s| s <= t)
    }
}

/// Independent RNG stream for one replication.
///
/// Streams derived from the same seed but different replication indices are
/// statistically independent and can be consumed in any order, so replication
/// batches parallelize without coordination.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication.into());
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        let good = ModelParams { n: 100, beta: 1.0, k_max: 3, horizon: 1.0, seed: 0 };
        assert!(good.validate().is_ok());
        assert!((good.lambda() - 0.9).abs() < 1e-12);

        let bad_beta = ModelParams { beta: 10.0, ..good };
        assert!(matches!(bad_beta.validate(), Err(Error::InvalidParams(_))));

        let bad_k = ModelParams { k_max: 1, ..good };
        assert!(bad_k.validate().is_err());
    }

    #[test]
    fn count_state_chain_invariant() {
        assert!(CountState::new(vec![5, 3, 1], 10).is_ok());
        assert!(CountState::new(vec![5, 6, 1], 10).is_err());
        assert!(CountState::new(vec![11, 3, 1], 10).is_err());
    }

    #[test]
    fn initial_condition_presets() {
        let s = InitialCondition::Preset(InitialPreset::AllBusy)
            .count_state(7, 3)
            .unwrap();
        assert_eq!(s.counts(), &[7, 0, 0]);
        let e = InitialCondition::Explicit(vec![5, 2])
            .count_state(7, 4)
            .unwrap();
        assert_eq!(e.counts(), &[5, 2, 0, 0]);
    }

    #[test]
    fn replication_streams_are_independent_of_order() {
        use rand::Rng;
        let mut a = replication_rng(42, 3);
        let first: f64 = a.random();
        // regenerating the same stream later reproduces the value
        let mut b = replication_rng(42, 3);
        assert_eq!(first, b.random::<f64>());
        // a different stream differs
        let mut c = replication_rng(42, 4);
        assert_ne!(first, c.random::<f64>());
    }
}
