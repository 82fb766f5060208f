use rand::Rng;
use rand_distr::Exp1;

use super::{replication_rng, CountState, ModelParams, StepPath, TruncationCounters};
use crate::error::{Error, Result};

/// Simulate the exact CTMC of the M/M/n join-the-shortest-queue system in the
/// counts representation on `[0, horizon]`.
///
/// An arrival joins a shortest queue, incrementing the first level below `n`;
/// a departure at level `i` occurs at rate `q[i] - q[i+1]` (queues of length
/// exactly `i + 1`). The path is reproducible from `params.seed`.
pub fn simulate_jsq_counts(params: &ModelParams, initial: &CountState) -> Result<StepPath> {
    let mut rng = replication_rng(params.seed, 0);
    simulate_jsq_counts_with_rng(params, initial, &mut rng)
}

/// As [`simulate_jsq_counts`] but drawing events from a caller-supplied stream,
/// for replication harnesses.
pub fn simulate_jsq_counts_with_rng(
    params: &ModelParams,
    initial: &CountState,
    rng: &mut impl Rng,
) -> Result<StepPath> {
    run(params, initial, rng, Variant::Full).map(|(path, _)| path)
}

/// Simulate the truncated variant: an arrival that would create a queue of
/// length three or more is rejected and the state left unchanged. Barrier
/// touches are returned as [`TruncationCounters`].
///
/// The event-stream construction is shared with [`simulate_jsq_counts`], so
/// runs coupled on the same seed produce bit-identical paths until the first
/// time the second-level count reaches `n`.
pub fn simulate_jsq_truncated(
    params: &ModelParams,
    initial: &CountState,
) -> Result<(StepPath, TruncationCounters)> {
    let mut rng = replication_rng(params.seed, 0);
    simulate_jsq_truncated_with_rng(params, initial, &mut rng)
}

/// As [`simulate_jsq_truncated`] but drawing events from a caller-supplied stream.
pub fn simulate_jsq_truncated_with_rng(
    params: &ModelParams,
    initial: &CountState,
    rng: &mut impl Rng,
) -> Result<(StepPath, TruncationCounters)> {
    run(params, initial, rng, Variant::Truncated)
}

#[derive(Clone, Copy, PartialEq)]
enum Variant {
    Full,
    Truncated,
}

fn run(
    params: &ModelParams,
    initial: &CountState,
    rng: &mut impl Rng,
    variant: Variant,
) -> Result<(StepPath, TruncationCounters)> {
    params.validate()?;
    initial.validate(params.n)?;
    if initial.k_max() != params.k_max {
        return Err(Error::InvalidParams(format!(
            "initial state has {} levels but k_max = {}",
            initial.k_max(),
            params.k_max
        )));
    }

    let n = params.n;
    let k_max = params.k_max;
    let arrival_rate = params.arrival_rate();
    let horizon = params.horizon;

    let mut q: Vec<u64> = initial.counts().to_vec();
    let mut row: Vec<f64> = q.iter().map(|&c| c as f64).collect();
    let mut path = StepPath::new(&row, horizon);
    let mut counters = TruncationCounters::default();

    let mut t = 0.0_f64;
    loop {
        // busy servers = q[0]; each serves at rate 1
        let total_rate = arrival_rate + q[0] as f64;
        let dt: f64 = rng.sample::<f64, _>(Exp1) / total_rate;
        t += dt;
        if t > horizon {
            break;
        }

        let pick = rng.random::<f64>() * total_rate;
        if pick < arrival_rate {
            // arrival joins a shortest queue: first level below n
            match q.iter().position(|&c| c < n) {
                Some(level) => {
                    let at_barrier = q[0] == n;
                    if variant == Variant::Truncated && level >= 2 {
                        // all queues already hold two customers: reject
                        counters.u1_events.push(t);
                        counters.u2_events.push(t);
                        continue;
                    }
                    if variant == Variant::Truncated && at_barrier {
                        counters.u1_events.push(t);
                    }
                    q[level] += 1;
                    row[level] = q[level] as f64;
                }
                None => {
                    if variant == Variant::Truncated {
                        // chain invariant gives q[0] = q[1] = n here
                        counters.u1_events.push(t);
                        counters.u2_events.push(t);
                        continue;
                    }
                    return Err(Error::RepresentationOverflow { time: t, k_max });
                }
            }
        } else {
            // departure: level i at rate q[i] - q[i+1]
            let mut acc = arrival_rate;
            let mut chosen = None;
            for i in 0..k_max {
                let next = if i + 1 < k_max { q[i + 1] } else { 0 };
                let rate = (q[i] - next) as f64;
                acc += rate;
                if pick < acc && rate > 0.0 {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding fallback: take the deepest level with a positive rate
            let level = match chosen {
                Some(i) => i,
                None => {
                    match (0..k_max).rev().find(|&i| {
                        let next = if i + 1 < k_max { q[i + 1] } else { 0 };
                        q[i] > next
                    }) {
                        Some(i) => i,
                        None => continue, // no busy server; spurious pick
                    }
                }
            };
            q[level] -= 1;
            row[level] = q[level] as f64;
        }
        debug_assert!(chain_ok(&q, n));
        path.push(t, &row);
    }

    Ok((path, counters))
}

fn chain_ok(q: &[u64], n: u64) -> bool {
    q[0] <= n && q.windows(2).all(|w| w[0] >= w[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::replication_rng;

    fn params(n: u64, beta: f64, k_max: usize, horizon: f64, seed: u64) -> ModelParams {
        ModelParams { n, beta, k_max, horizon, seed }
    }

    #[test]
    fn zero_horizon_returns_initial_state_only() {
        let p = params(10, 1.0, 3, 0.0, 7);
        let init = CountState::new(vec![5, 2, 0], 10).unwrap();
        let path = simulate_jsq_counts(&p, &init).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(path.state(0), &[5.0, 2.0, 0.0]);
    }

    #[test]
    fn invalid_beta_rejected() {
        let p = params(4, 2.5, 3, 1.0, 0);
        let init = CountState::empty(3);
        assert!(matches!(
            simulate_jsq_counts(&p, &init),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn chain_and_conservation_hold_along_path() {
        let p = params(20, 1.0, 4, 5.0, 11);
        let init = CountState::new(vec![20, 6, 2, 1], 20).unwrap();
        let path = simulate_jsq_counts(&p, &init).unwrap();
        let mut prev_total: i64 = path.state(0).iter().map(|&v| v as i64).sum();
        for j in 1..path.len() {
            let s = path.state(j);
            assert!(s[0] <= 20.0);
            for w in s.windows(2) {
                assert!(w[0] >= w[1], "chain violated at event {j}");
            }
            let total: i64 = s.iter().map(|&v| v as i64).sum();
            assert_eq!((total - prev_total).abs(), 1, "event must move one customer");
            prev_total = total;
        }
    }

    // Hand-computed competing-exponentials check: from q = (2, 0) with n = 2,
    // beta = 1, the arrival rate is 2 - sqrt(2) and the departure rate is 2,
    // so the first event is an arrival with probability
    // (2 - sqrt(2)) / (4 - sqrt(2)) ~= 0.22654.
    #[test]
    fn first_event_frequency_matches_competing_exponentials() {
        let n_reps = 100_000u64;
        let expected = (2.0 - 2f64.sqrt()) / (4.0 - 2f64.sqrt());
        let p = params(2, 1.0, 8, 2.0, 123);
        let init = CountState::new(vec![2, 0, 0, 0, 0, 0, 0, 0], 2).unwrap();
        let mut arrivals = 0u64;
        let mut counted = 0u64;
        for rep in 0..n_reps {
            let mut rng = replication_rng(p.seed, rep);
            let path = simulate_jsq_counts_with_rng(&p, &init, &mut rng).unwrap();
            if path.len() < 2 {
                continue; // no event before the horizon; the split is
                          // independent of the event time, so skipping is fair
            }
            counted += 1;
            if path.state(1)[1] > 0.0 {
                arrivals += 1; // first event was the arrival (2,0) -> (2,1)
            } else {
                assert_eq!(path.state(1)[0], 1.0); // else a departure (2,0) -> (1,0)
            }
        }
        let freq = arrivals as f64 / counted as f64;
        let se = (expected * (1.0 - expected) / counted as f64).sqrt();
        assert!(
            (freq - expected).abs() <= 3.0 * se,
            "freq {freq} vs expected {expected} (3 se = {})",
            3.0 * se
        );
    }

    #[test]
    fn truncated_saturated_state_rejects_until_departure() {
        let n = 5;
        let p = params(n, 1.0, 3, 2.0, 3);
        let init = CountState::new(vec![n, n, 0], n).unwrap();
        let (path, counters) = simulate_jsq_truncated(&p, &init).unwrap();
        // first recorded state change must be a departure
        if path.len() > 1 {
            let total0: f64 = path.state(0).iter().sum();
            let total1: f64 = path.state(1).iter().sum();
            assert_eq!(total1, total0 - 1.0);
            // every rejection before that departure is a u2 event
            for &s in &counters.u2_events {
                if s < path.time(1) {
                    assert!(counters.u1_events.contains(&s));
                }
            }
        }
    }

    #[test]
    fn truncated_levels_three_and_up_never_increase() {
        let p = params(15, 1.0, 5, 4.0, 9);
        let init = CountState::new(vec![15, 10, 6, 3, 1], 15).unwrap();
        let (path, _) = simulate_jsq_truncated(&p, &init).unwrap();
        for j in 1..path.len() {
            for lvl in 2..5 {
                assert!(
                    path.state(j)[lvl] <= path.state(j - 1)[lvl],
                    "level {lvl} increased at event {j}"
                );
            }
        }
    }

    #[test]
    fn coupled_paths_identical_until_second_level_saturates() {
        let n = 100;
        let p = params(n, 1.0, 4, 3.0, 21);
        let init = CountState::new(vec![100, 5, 0, 0], n).unwrap();
        for rep in 0..50 {
            let mut rng_a = replication_rng(p.seed, rep);
            let mut rng_b = replication_rng(p.seed, rep);
            let full = simulate_jsq_counts_with_rng(&p, &init, &mut rng_a).unwrap();
            let (trunc, _) = simulate_jsq_truncated_with_rng(&p, &init, &mut rng_b).unwrap();
            let t_star = full
                .times()
                .iter()
                .zip((0..full.len()).map(|j| full.state(j)))
                .find(|(_, s)| s[1] as u64 == n)
                .map(|(&t, _)| t)
                .unwrap_or(f64::INFINITY);
            let cutoff = t_star.min(p.horizon);
            assert!(
                full.prefix_eq(&trunc, cutoff),
                "rep {rep}: paths diverged before t* = {t_star}"
            );
        }
    }

    #[test]
    fn u1_complementarity_along_path() {
        let n = 8;
        let p = params(n, 1.0, 3, 6.0, 5);
        let init = CountState::all_busy(n, 3);
        let (path, counters) = simulate_jsq_truncated(&p, &init).unwrap();
        for &s in &counters.u1_events {
            // state just before the arrival: all servers busy
            let idx = path.times().partition_point(|&x| x < s) - 1;
            assert_eq!(path.state(idx)[0] as u64, n, "u1 event with idle server");
        }
        for &s in &counters.u2_events {
            let idx = path.times().partition_point(|&x| x < s) - 1;
            assert_eq!(path.state(idx)[1] as u64, n, "u2 event below barrier");
        }
        // u2 events are a subset of u1 events
        for &s in &counters.u2_events {
            assert!(counters.u1_events.contains(&s));
        }
    }

    #[test]
    fn determinism_from_seed() {
        let p = params(50, 1.5, 3, 2.0, 99);
        let init = CountState::all_busy(50, 3);
        let a = simulate_jsq_counts(&p, &init).unwrap();
        let b = simulate_jsq_counts(&p, &init).unwrap();
        assert_eq!(a, b);
    }
}
