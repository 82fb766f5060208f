use std::collections::VecDeque;

use rand::Rng;
use rand_distr::Exp1;

use super::{replication_rng, ModelParams, StepPath};
use crate::error::{Error, Result};

/// Realized waiting times in arrival order, one entry per customer arriving in
/// `[0, horizon]`.
///
/// A customer that found an idle server has wait 0; a delayed customer's wait
/// is the time until it entered service. Delayed customers still in queue at
/// the horizon have their waits realized by running the departure process past
/// the horizon with arrivals switched off, which leaves those waits unchanged:
/// a waiting customer's delay depends only on departures ahead of it in its
/// own FIFO queue.
#[derive(Debug, Clone, Default)]
pub struct WaitRecords {
    pub waits: Vec<f64>,
}

impl WaitRecords {
    pub fn total_arrivals(&self) -> usize {
        self.waits.len()
    }

    /// Strictly positive waits, in arrival order.
    pub fn delayed(&self) -> Vec<f64> {
        self.waits.iter().copied().filter(|&w| w > 0.0).collect()
    }

    pub fn delayed_fraction(&self) -> f64 {
        if self.waits.is_empty() {
            0.0
        } else {
            self.waits.iter().filter(|&&w| w > 0.0).count() as f64 / self.waits.len() as f64
        }
    }
}

/// Simulate `n` explicit FIFO queues under join-the-shortest-queue routing,
/// ties broken uniformly at random.
///
/// Returns the induced counts path (distributionally identical to
/// [`super::simulate_jsq_counts`]) together with per-customer waiting times.
pub fn simulate_jsq_per_queue(
    params: &ModelParams,
    initial_lengths: &[u64],
) -> Result<(StepPath, WaitRecords)> {
    let mut rng = replication_rng(params.seed, 0);
    simulate_jsq_per_queue_with_rng(params, initial_lengths, &mut rng)
}

/// As [`simulate_jsq_per_queue`] with a caller-supplied stream.
pub fn simulate_jsq_per_queue_with_rng(
    params: &ModelParams,
    initial_lengths: &[u64],
    rng: &mut impl Rng,
) -> Result<(StepPath, WaitRecords)> {
    params.validate()?;
    let n = params.n as usize;
    if initial_lengths.len() != n {
        return Err(Error::InvalidParams(format!(
            "initial_lengths has {} entries, expected n = {}",
            initial_lengths.len(),
            n
        )));
    }
    let k_max = params.k_max;
    if let Some(&too_long) = initial_lengths.iter().find(|&&l| l as usize > k_max) {
        return Err(Error::InvalidParams(format!(
            "initial queue length {too_long} exceeds k_max = {k_max}"
        )));
    }

    let mut sys = System::new(initial_lengths, k_max);
    let arrival_rate = params.arrival_rate();
    let horizon = params.horizon;

    let mut path = StepPath::new(&sys.counts_row(), horizon);
    let mut records = WaitRecords::default();

    let mut t = 0.0_f64;
    // main phase: arrivals and departures up to the horizon
    loop {
        let total_rate = arrival_rate + sys.busy as f64;
        t += rng.sample::<f64, _>(Exp1) / total_rate;
        if t > horizon {
            break;
        }
        let pick = rng.random::<f64>() * total_rate;
        if pick < arrival_rate {
            let m = sys.min_len;
            if m >= k_max {
                return Err(Error::RepresentationOverflow { time: t, k_max });
            }
            let tie = rng.random_range(0..sys.buckets[m].len());
            let queue = sys.buckets[m][tie] as usize;
            if m == 0 {
                records.waits.push(0.0);
            } else {
                let slot = records.waits.len();
                records.waits.push(f64::NAN); // filled at service entry
                sys.waiting[queue].push_back(Waiter { arrived: t, slot: Some(slot) });
                sys.pending += 1;
            }
            sys.move_queue(queue, m, m + 1);
        } else {
            let r = ((pick - arrival_rate) as usize).min(sys.busy - 1);
            let queue = sys.busy_queue_at(r);
            sys.depart(queue, t, &mut records);
        }
        path.push(t, &sys.counts_row());
    }

    // drain phase: realize waits of customers still queued at the horizon
    while sys.pending > 0 {
        let busy = sys.busy as f64;
        t += rng.sample::<f64, _>(Exp1) / busy;
        let r = ((rng.random::<f64>() * busy) as usize).min(sys.busy - 1);
        let queue = sys.busy_queue_at(r);
        sys.depart(queue, t, &mut records);
    }
    debug_assert!(records.waits.iter().all(|w| !w.is_nan()));

    Ok((path, records))
}

struct Waiter {
    arrived: f64,
    /// index into the records vector; None for customers already queued at
    /// time 0, whose (unknowable) waits are not recorded
    slot: Option<usize>,
}

/// Queue-length bookkeeping with O(1) shortest-queue lookup.
struct System {
    lengths: Vec<usize>,
    /// buckets[l] = indices of queues with length exactly l
    buckets: Vec<Vec<u32>>,
    /// position of each queue inside its bucket
    pos: Vec<u32>,
    waiting: Vec<VecDeque<Waiter>>,
    counts: Vec<u64>,
    min_len: usize,
    busy: usize,
    /// recorded waiters whose service entry has not happened yet
    pending: usize,
}

impl System {
    fn new(initial_lengths: &[u64], k_max: usize) -> System {
        let n = initial_lengths.len();
        let max_len = initial_lengths.iter().copied().max().unwrap_or(0) as usize;
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); max_len.max(k_max) + 2];
        let mut pos = vec![0u32; n];
        let mut waiting: Vec<VecDeque<Waiter>> = (0..n).map(|_| VecDeque::new()).collect();
        let mut counts = vec![0u64; k_max];
        let mut busy = 0;
        for (i, &l) in initial_lengths.iter().enumerate() {
            let l = l as usize;
            pos[i] = buckets[l].len() as u32;
            buckets[l].push(i as u32);
            for c in counts.iter_mut().take(l) {
                *c += 1;
            }
            if l > 0 {
                busy += 1;
            }
            for _ in 1..l.max(1) {
                waiting[i].push_back(Waiter { arrived: 0.0, slot: None });
            }
        }
        let min_len = (0..buckets.len())
            .find(|&l| !buckets[l].is_empty())
            .unwrap_or(0);
        System {
            lengths: initial_lengths.iter().map(|&l| l as usize).collect(),
            buckets,
            pos,
            waiting,
            counts,
            min_len,
            busy,
            pending: 0,
        }
    }

    fn counts_row(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    fn move_queue(&mut self, queue: usize, from: usize, to: usize) {
        // swap-remove from the old bucket
        let p = self.pos[queue] as usize;
        let last = *self.buckets[from].last().unwrap() as usize;
        self.buckets[from].swap_remove(p);
        if last != queue {
            self.pos[last] = p as u32;
        }
        if to >= self.buckets.len() {
            self.buckets.resize(to + 1, Vec::new());
        }
        self.pos[queue] = self.buckets[to].len() as u32;
        self.buckets[to].push(queue as u32);
        self.lengths[queue] = to;

        if to > from {
            // arrival: length from -> from+1 raises the count of level from+1
            self.counts[from] += 1;
            if from == 0 {
                self.busy += 1;
            }
            if from == self.min_len {
                while self.buckets[self.min_len].is_empty() {
                    self.min_len += 1;
                }
            }
        } else {
            self.counts[to] -= 1;
            if to == 0 {
                self.busy -= 1;
            }
            if to < self.min_len {
                self.min_len = to;
            }
        }
        debug_assert!(self.counts.windows(2).all(|w| w[0] >= w[1]));
    }

    /// The r-th busy queue in bucket order (r in 0..busy).
    fn busy_queue_at(&self, r: usize) -> usize {
        let mut rem = r;
        for bucket in self.buckets.iter().skip(1) {
            if rem < bucket.len() {
                return bucket[rem] as usize;
            }
            rem -= bucket.len();
        }
        unreachable!("busy index out of range");
    }

    fn depart(&mut self, queue: usize, t: f64, records: &mut WaitRecords) {
        let l = self.lengths[queue];
        debug_assert!(l >= 1);
        self.move_queue(queue, l, l - 1);
        if let Some(waiter) = self.waiting[queue].pop_front() {
            // next customer enters service now
            if let Some(slot) = waiter.slot {
                records.waits[slot] = t - waiter.arrived;
                self.pending -= 1;
            }
        }
    }
}
