//! Statistical validation: martingale reconstruction with predictable
//! quadratic variations, hitting-probability sweeps, waiting-time
//! functionals, and two-sample distribution comparisons.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scaling::{sample_on_grid, GridPath, GridSpec};
use crate::sim::{
    replication_rng, simulate_jsq_truncated_with_rng, CountState, InitialCondition, ModelParams,
    StepPath, TruncationCounters, WaitRecords,
};
use crate::solver::{simulate_limit_diffusion, NoiseSpec};

/// Per-replication summary of one simulated path.
#[derive(Debug, Clone, Serialize)]
pub struct RunStats {
    /// First time the second-level count reaches `n`, if it does.
    pub hit_time: Option<f64>,
    /// Aggregate waiting time over the full horizon.
    pub agg_wait: f64,
    /// Aggregate waiting time divided by `sqrt(n)`.
    pub scaled_agg_wait: f64,
    /// Positive waits of delayed customers (per-queue mode only).
    pub delayed_waits: Vec<f64>,
    pub delayed_fraction: f64,
    /// Diffusion-scaled state at the horizon.
    pub terminal_scaled_state: Vec<f64>,
}

/// Build the summary of a counts path, optionally with per-queue wait records.
pub fn collect_run_stats(
    path: &StepPath,
    params: &ModelParams,
    waits: Option<&WaitRecords>,
) -> Result<RunStats> {
    let agg = aggregate_waiting_time(path, path.horizon())?;
    let sqrt_n = (params.n as f64).sqrt();
    let terminal = path.state_at(path.horizon())?;
    let mut scaled: Vec<f64> = terminal.to_vec();
    scaled[0] = (scaled[0] - params.n as f64) / sqrt_n;
    for v in scaled.iter_mut().skip(1) {
        *v /= sqrt_n;
    }
    let (delayed_waits, delayed_fraction) = match waits {
        Some(r) => (r.delayed(), r.delayed_fraction()),
        None => (Vec::new(), 0.0),
    };
    Ok(RunStats {
        hit_time: first_hit_time(path, params.n),
        agg_wait: agg,
        scaled_agg_wait: agg / sqrt_n,
        delayed_waits,
        delayed_fraction,
        terminal_scaled_state: scaled,
    })
}

/// First time the second-level count equals `n` (the initial state counts).
pub fn first_hit_time(path: &StepPath, n: u64) -> Option<f64> {
    (0..path.len())
        .find(|&j| path.state(j)[1] as u64 == n)
        .map(|j| path.time(j))
}

/// Aggregate waiting time over `[0, t]`: the time integral of the number of
/// waiting customers, summed exactly over the path's constant segments.
pub fn aggregate_waiting_time(path: &StepPath, t: f64) -> Result<f64> {
    if !(0.0..=path.horizon()).contains(&t) {
        return Err(Error::GridOutOfRange(format!(
            "t = {t} outside the path span [0, {}]",
            path.horizon()
        )));
    }
    let mut total = 0.0;
    for (start, end, state) in path.segments() {
        if start >= t {
            break;
        }
        let span = end.min(t) - start;
        let waiting: f64 = state[1..].iter().sum();
        total += waiting * span;
    }
    Ok(total)
}

/// Scaled martingales reconstructed from a truncated-system path, with their
/// predictable quadratic variations on the same grid.
///
/// Coordinate 0 is the centered arrival process; coordinate `i >= 1` is the
/// centered departure process of level `i`.
#[derive(Debug, Clone)]
pub struct MartingalePath {
    pub m: GridPath,
    pub qv: GridPath,
}

/// Reconstruct the scaled martingales from event counts and their exact
/// integral compensators.
pub fn extract_martingales(
    path: &StepPath,
    counters: &TruncationCounters,
    params: &ModelParams,
    grid: GridSpec,
) -> Result<MartingalePath> {
    grid.validate()?;
    params.validate()?;
    if grid.end() > path.horizon() + 1e-12 {
        return Err(Error::GridOutOfRange(format!(
            "grid ends at {} beyond the horizon {}",
            grid.end(),
            path.horizon()
        )));
    }
    let k = params.k_max;
    if path.dim() != k {
        return Err(Error::MismatchedInputs(format!(
            "path has {} coordinates but k_max = {}",
            path.dim(),
            k
        )));
    }
    // rejected arrivals leave no state change, so they must appear in u2
    if !is_sorted(&counters.u1_events) || !is_sorted(&counters.u2_events) {
        return Err(Error::MismatchedInputs("counter times must be sorted".into()));
    }
    if !is_subset_sorted(&counters.u2_events, &counters.u1_events) {
        return Err(Error::MismatchedInputs(
            "every rejected arrival must also be a barrier arrival".into(),
        ));
    }

    let sqrt_n = (params.n as f64).sqrt();
    let nf = params.n as f64;
    let lambda = params.lambda();

    let mut m = GridPath::zeros(grid, k + 1);
    let mut qv = GridPath::zeros(grid, k + 1);

    // event-walk state
    let mut arrivals = 0u64;
    let mut departures = vec![0u64; k];
    let mut integrals = vec![0.0f64; k]; // int (Q_i - Q_{i+1}) ds, exact
    let mut ev = 1usize; // next path event index
    let mut rej = 0usize; // next rejected-arrival index
    let mut seg_start = path.time(0);

    for j in 0..grid.count {
        let t = grid.time(j);
        // consume state-change events and rejections up to t (inclusive:
        // counts are right-continuous in the event times)
        loop {
            let next_ev = if ev < path.len() { path.time(ev) } else { f64::INFINITY };
            let next_rej = if rej < counters.u2_events.len() {
                counters.u2_events[rej]
            } else {
                f64::INFINITY
            };
            let next = next_ev.min(next_rej);
            if next > t {
                break;
            }
            // integrate the constant segment ending at this event
            let state = path.state(ev - 1);
            accumulate(&mut integrals, state, next - seg_start, k);
            seg_start = next;
            if next_rej <= next_ev {
                arrivals += 1;
                rej += 1;
                continue;
            }
            // classify the state change
            let prev = path.state(ev - 1);
            let cur = path.state(ev);
            let mut classified = false;
            for level in 0..k {
                let d = cur[level] - prev[level];
                if d == 1.0 {
                    arrivals += 1;
                    classified = true;
                    break;
                } else if d == -1.0 {
                    departures[level] += 1;
                    classified = true;
                    break;
                }
            }
            if !classified {
                return Err(Error::MismatchedInputs(format!(
                    "event at t = {next} is not a unit state change"
                )));
            }
            ev += 1;
        }
        // integrate the partial segment up to the grid point
        let state = path.state(ev - 1);
        accumulate(&mut integrals, state, t - seg_start, k);
        seg_start = t;

        m.set(j, 0, arrivals as f64 / sqrt_n - lambda * sqrt_n * t);
        qv.set(j, 0, lambda * t);
        for level in 0..k {
            m.set(
                j,
                level + 1,
                departures[level] as f64 / sqrt_n - integrals[level] / sqrt_n,
            );
            qv.set(j, level + 1, integrals[level] / nf);
        }
    }
    Ok(MartingalePath { m, qv })
}

fn accumulate(integrals: &mut [f64], state: &[f64], span: f64, k: usize) {
    if span <= 0.0 {
        return;
    }
    for level in 0..k {
        let next = if level + 1 < k { state[level + 1] } else { 0.0 };
        integrals[level] += (state[level] - next) * span;
    }
}

fn is_sorted(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] <= w[1])
}

fn is_subset_sorted(sub: &[f64], sup: &[f64]) -> bool {
    let mut i = 0;
    for &v in sub {
        while i < sup.len() && sup[i] < v {
            i += 1;
        }
        if i >= sup.len() || sup[i] != v {
            return false;
        }
        i += 1;
    }
    true
}

/// Monte Carlo estimate of the probability that the second-level count
/// reaches `n` by time `t`, with a Wilson confidence interval.
#[derive(Debug, Clone, Serialize)]
pub struct HittingEstimate {
    pub n: u64,
    pub beta: f64,
    pub t: f64,
    pub replications: usize,
    pub hits: usize,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Estimate `P(t_n^* <= t)` for each `n` by simulating the truncated system.
pub fn estimate_hitting_probability(
    ns: &[u64],
    beta: f64,
    k_max: usize,
    initial: &InitialCondition,
    t: f64,
    replications: usize,
    base_seed: u64,
) -> Result<Vec<HittingEstimate>> {
    ns.iter()
        .map(|&n| {
            let params = ModelParams { n, beta, k_max, horizon: t, seed: base_seed };
            params.validate()?;
            let init = initial.count_state(n, k_max)?;
            let hits = (0..replications)
                .into_par_iter()
                .map(|rep| -> Result<usize> {
                    let mut rng = replication_rng(base_seed, rep as u64);
                    let (path, _) = simulate_jsq_truncated_with_rng(&params, &init, &mut rng)?;
                    Ok(usize::from(first_hit_time(&path, n).is_some()))
                })
                .try_reduce(|| 0, |a, b| Ok(a + b))?;
            let p = hits as f64 / replications as f64;
            let (lo, hi) = wilson_interval(hits, replications, 1.96);
            Ok(HittingEstimate {
                n,
                beta,
                t,
                replications,
                hits,
                probability: p,
                ci_low: lo,
                ci_high: hi,
            })
        })
        .collect()
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(hits: usize, total: usize, z: f64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let n = total as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Summary of the strictly positive waits in a per-queue run.
#[derive(Debug, Clone, Serialize)]
pub struct WaitSummary {
    pub count: usize,
    pub mean: f64,
    /// One-sample Kolmogorov-Smirnov statistic against the unit exponential.
    pub ks_exp1: f64,
}

/// Distribution summary of delayed customers' waits.
pub fn delayed_wait_distribution(records: &WaitRecords) -> Result<WaitSummary> {
    let mut delayed = records.delayed();
    if delayed.is_empty() {
        return Err(Error::EmptySample);
    }
    delayed.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = delayed.iter().sum::<f64>() / delayed.len() as f64;
    Ok(WaitSummary { count: delayed.len(), mean, ks_exp1: ks_one_sample_exp1(&delayed) })
}

/// One-sample KS statistic of a sorted sample against Exp(1).
pub fn ks_one_sample_exp1(sorted: &[f64]) -> f64 {
    let m = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = 1.0 - (-x).exp();
        d = d.max(f - i as f64 / m).max((i + 1) as f64 / m - f);
    }
    d
}

/// Two-sample Kolmogorov-Smirnov statistic: the sup distance between the
/// empirical CDFs. Tied values are consumed from both samples before the
/// distance is recorded.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
    ys.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xs.len() || j < ys.len() {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        let diff = (i as f64 / na - j as f64 / nb).abs();
        if diff > d {
            d = diff;
        }
    }
    Ok(d)
}

/// Mean and standard error of a sample.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// p-th percentile (0..=1) of a sorted sample, by nearest-rank.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let idx = ((sorted.len() as f64 * p).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Diffusion-scaled marginals `X_i(t)` sampled over independent replications
/// of the full system, one vector per requested coordinate.
pub fn sample_scaled_marginal(
    params: &ModelParams,
    initial: &InitialCondition,
    t: f64,
    coords: &[usize],
    replications: usize,
) -> Result<Vec<Vec<f64>>> {
    let run = ModelParams { horizon: t, ..*params };
    run.validate()?;
    let init = initial.count_state(run.n, run.k_max)?;
    let sqrt_n = (run.n as f64).sqrt();
    let rows: Vec<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let mut rng = replication_rng(run.seed, rep as u64);
            let path =
                crate::sim::simulate_jsq_counts_with_rng(&run, &init, &mut rng)?;
            let state = path.state_at(t)?;
            Ok(coords
                .iter()
                .map(|&c| {
                    if c == 0 {
                        (state[0] - run.n as f64) / sqrt_n
                    } else {
                        state[c] / sqrt_n
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(transpose(rows, coords.len()))
}

/// Marginals `X_i(t)` of the limit system over independent driver seeds.
pub fn sample_limit_marginal(
    beta: f64,
    x0: &[f64],
    k: usize,
    t: f64,
    dt: f64,
    coords: &[usize],
    replications: usize,
    base_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let grid = GridSpec::covering(t, dt)?;
    let rows: Vec<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let spec = NoiseSpec { beta, seed: base_seed.wrapping_add(rep as u64), grid };
            let sol = simulate_limit_diffusion(x0, &spec, k)?;
            let j = grid.count - 1;
            Ok(coords.iter().map(|&c| sol.x.value(j, c)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(transpose(rows, coords.len()))
}

fn transpose(rows: Vec<Vec<f64>>, width: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(rows.len()); width];
    for row in rows {
        for (c, v) in row.into_iter().enumerate() {
            out[c].push(v);
        }
    }
    out
}

/// Convenience: counts path of one truncated replication, with counters.
pub fn truncated_replication(
    params: &ModelParams,
    initial: &CountState,
    replication: u64,
) -> Result<(StepPath, TruncationCounters)> {
    let mut rng = replication_rng(params.seed, replication);
    simulate_jsq_truncated_with_rng(params, initial, &mut rng)
}

/// Sample a path's diffusion scaling at one time point per replication.
pub fn scaled_state_at(path: &StepPath, n: u64, t: f64) -> Result<Vec<f64>> {
    let grid = GridSpec { t0: t.max(0.0), dt: 1.0, count: 2 };
    let _ = grid; // single-point evaluation goes through the path directly
    let state = path.state_at(t)?;
    let sqrt_n = (n as f64).sqrt();
    let mut out = state.to_vec();
    out[0] = (out[0] - n as f64) / sqrt_n;
    for v in out.iter_mut().skip(1) {
        *v /= sqrt_n;
    }
    Ok(out)
}

/// Fluid-scaled path on a grid (`Q_i / n`); re-exported here for sweeps.
pub fn fluid_on_grid(path: &StepPath, n: u64, grid: GridSpec) -> Result<GridPath> {
    let mut gp = sample_on_grid(path, grid)?;
    let nf = n as f64;
    for j in 0..gp.len() {
        for c in 0..gp.dim() {
            gp.set(j, c, gp.value(j, c) / nf);
        }
    }
    Ok(gp)
}
