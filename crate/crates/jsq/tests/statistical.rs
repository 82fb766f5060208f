//! Medium-budget statistical validations that sit between the unit tests and
//! the acceptance suite: cross-mode distributional equivalence and martingale
//! second-moment decay.

mod common;

use common::HEAVY;
use rayon::prelude::*;

use jsq::analysis::{extract_martingales, ks_two_sample, mean_and_se};
use jsq::scaling::GridSpec;
use jsq::sim::{
    replication_rng, simulate_jsq_counts_with_rng, simulate_jsq_per_queue_with_rng,
    simulate_jsq_truncated_with_rng, CountState, ModelParams,
};

// The counts simulator and the per-queue simulator describe the same law:
// the distribution of the second-level count at t = 1 must agree across
// modes (two-sample KS below the 1% critical value).
#[test]
fn per_queue_and_counts_modes_distributionally_equal() {
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let reps = 10_000usize;
    let params = ModelParams { n: 50, beta: 2.0, k_max: 6, horizon: 1.0, seed: 0x5EED };
    let init = CountState::all_busy(params.n, params.k_max);
    let lengths = vec![1u64; 50];

    let counts_q2: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(params.seed, rep as u64);
            let path = simulate_jsq_counts_with_rng(&params, &init, &mut rng).unwrap();
            path.state_at(1.0).unwrap()[1]
        })
        .collect();
    let per_queue_q2: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(params.seed ^ 0xFFFF, rep as u64);
            let (path, _) =
                simulate_jsq_per_queue_with_rng(&params, &lengths, &mut rng).unwrap();
            path.state_at(1.0).unwrap()[1]
        })
        .collect();

    let d = ks_two_sample(&counts_q2, &per_queue_q2).unwrap();
    // two-sample 1% critical value: 1.628 sqrt((m+n)/(mn))
    let crit = 1.628 * (2.0 / reps as f64).sqrt();
    assert!(d <= crit, "cross-mode KS {d} above the 1% critical value {crit}");
    println!("cross-mode KS = {d:.4} (1% critical {crit:.4}, {reps} replications per mode)");
}

// The departure martingale of the second level has variance matching the
// mean of its predictable quadratic variation, and both shrink as n grows.
#[test]
fn second_level_martingale_variance_tracks_qv_and_decays() {
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let reps = 3_000usize;
    let t = 1.0;
    let grid = GridSpec::new(0.0, t, 2).unwrap();
    let mut vars = Vec::new();

    for &n in &[400u64, 3_600] {
        let params = ModelParams { n, beta: 1.0, k_max: 3, horizon: t, seed: 0xD0 + n };
        let init = CountState::all_busy(n, params.k_max);
        let samples: Vec<(f64, f64)> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replication_rng(params.seed, rep as u64);
                let (path, counters) =
                    simulate_jsq_truncated_with_rng(&params, &init, &mut rng).unwrap();
                let mp = extract_martingales(&path, &counters, &params, grid).unwrap();
                (mp.m.value(1, 2), mp.qv.value(1, 2))
            })
            .collect();
        let ms: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let qvs: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let (m_mean, _) = mean_and_se(&ms);
        let var = ms.iter().map(|v| (v - m_mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let (qv_mean, qv_se) = mean_and_se(&qvs);
        // empirical variance matches E[QV]; allow 3 se on both sides plus the
        // variance estimator's own noise
        let se_var = var * (2.0 / (reps - 1) as f64).sqrt();
        assert!(
            (var - qv_mean).abs() <= 3.0 * (se_var + qv_se),
            "n = {n}: var {var:.5} vs mean QV {qv_mean:.5}"
        );
        println!("n = {n}: var(M2) = {var:.5}, mean QV = {qv_mean:.5}");
        vars.push(var);
    }
    assert!(
        vars[1] < vars[0],
        "martingale variance should decay with n: {vars:?}"
    );
}
