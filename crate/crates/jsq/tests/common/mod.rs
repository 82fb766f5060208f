//! Shared test utilities: an independent adaptive ODE oracle and helpers.
//!
//! The integrator here is deliberately separate from the crate's solver: it
//! is a Dormand-Prince 5(4) pair with adaptive step control, used as the
//! independent reference for the deterministic (reflection-inactive) regimes.
#![allow(dead_code)]

use std::sync::Mutex;

/// Serializes the memory/CPU-heavy acceptance tests.
pub static HEAVY: Mutex<()> = Mutex::new(());

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 35.0 / 384.0 - 5179.0 / 57600.0;
const E3: f64 = 500.0 / 1113.0 - 7571.0 / 16695.0;
const E4: f64 = 125.0 / 192.0 - 393.0 / 640.0;
const E5: f64 = -2187.0 / 6784.0 + 92097.0 / 339200.0;
const E6: f64 = 11.0 / 84.0 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `x' = rhs(t, x)` from `t0` and return the state at each
/// checkpoint (strictly increasing, all > t0). Adaptive Dormand-Prince 5(4).
pub fn rk45<F>(
    rhs: F,
    x0: &[f64],
    t0: f64,
    checkpoints: &[f64],
    rtol: f64,
    atol: f64,
) -> Vec<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut t = t0;
    let mut h: f64 = 1e-4;
    let mut out = Vec::with_capacity(checkpoints.len());

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    let mut x5 = vec![0.0; dim];

    for &target in checkpoints {
        assert!(target > t - 1e-15, "checkpoints must be increasing");
        while t < target {
            let mut step = h.min(target - t);
            loop {
                rhs(t, &x, &mut k1);
                for i in 0..dim {
                    stage[i] = x[i] + step * A21 * k1[i];
                }
                rhs(t + step / 5.0, &stage, &mut k2);
                for i in 0..dim {
                    stage[i] = x[i] + step * (A31 * k1[i] + A32 * k2[i]);
                }
                rhs(t + 3.0 * step / 10.0, &stage, &mut k3);
                for i in 0..dim {
                    stage[i] = x[i] + step * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
                }
                rhs(t + 4.0 * step / 5.0, &stage, &mut k4);
                for i in 0..dim {
                    stage[i] =
                        x[i] + step * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
                }
                rhs(t + 8.0 * step / 9.0, &stage, &mut k5);
                for i in 0..dim {
                    stage[i] = x[i]
                        + step
                            * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                                + A65 * k5[i]);
                }
                rhs(t + step, &stage, &mut k6);
                for i in 0..dim {
                    x5[i] = x[i]
                        + step * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
                }
                rhs(t + step, &x5, &mut k7);

                let mut err: f64 = 0.0;
                for i in 0..dim {
                    let e = step
                        * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                            + E7 * k7[i]);
                    let tol = atol + rtol * x[i].abs().max(x5[i].abs());
                    err = err.max((e / tol).abs());
                }
                if err <= 1.0 {
                    t += step;
                    x.copy_from_slice(&x5);
                    let factor = if err == 0.0 { 5.0 } else { (0.9 / err.powf(0.2)).min(5.0) };
                    h = (step * factor).max(1e-12);
                    break;
                }
                step *= (0.9 / err.powf(0.2)).max(0.1);
            }
        }
        out.push(x.clone());
    }
    out
}

/// Right-hand side of the unreflected cascade with constant (zero) drivers:
/// `x_i' = -x_i + x_{i+1}` and `x_k' = -x_k`.
pub fn cascade_rhs(t: f64, x: &[f64], dx: &mut [f64]) {
    let _ = t;
    let k = x.len();
    for i in 0..k {
        dx[i] = -x[i] + if i + 1 < k { x[i + 1] } else { 0.0 };
    }
}

/// Linear interpolation through control points, sampled on `points` values.
pub fn piecewise_linear(controls: &[f64], points: usize) -> Vec<f64> {
    let segs = controls.len() - 1;
    (0..points)
        .map(|j| {
            let s = j as f64 / (points - 1) as f64 * segs as f64;
            let i = (s.floor() as usize).min(segs - 1);
            let frac = s - i as f64;
            controls[i] * (1.0 - frac) + controls[i + 1] * frac
        })
        .collect()
}

#[cfg(test)]
mod oracle_self_checks {
    use super::*;

    // e^{-t} decay integrated by the oracle against the exact exponential
    #[test]
    fn rk45_matches_exponential_decay() {
        let checkpoints: Vec<f64> = (1..=50).map(|i| i as f64 * 0.2).collect();
        let states = rk45(cascade_rhs, &[1.0], 0.0, &checkpoints, 1e-12, 1e-14);
        for (s, &t) in states.iter().zip(&checkpoints) {
            assert!((s[0] - (-t).exp()).abs() < 1e-10, "t = {t}");
        }
    }

    // two-coordinate cascade has the known closed form (b1 + t b2) e^{-t}
    #[test]
    fn rk45_matches_two_level_cascade() {
        let (b1, b2) = (0.4, 0.9);
        let checkpoints: Vec<f64> = (1..=40).map(|i| i as f64 * 0.25).collect();
        let states = rk45(cascade_rhs, &[b1, b2], 0.0, &checkpoints, 1e-12, 1e-14);
        for (s, &t) in states.iter().zip(&checkpoints) {
            let exact0 = (b1 + t * b2) * (-t).exp();
            let exact1 = b2 * (-t).exp();
            assert!((s[0] - exact0).abs() < 1e-10);
            assert!((s[1] - exact1).abs() < 1e-10);
        }
    }
}
