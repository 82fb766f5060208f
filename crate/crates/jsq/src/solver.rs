//! Driving-noise sampling and grid solution of the limiting reflected
//! integral system.
//!
//! The two reflected coordinates are solved by windowed fixed-point iteration
//! of the substituted (unreflected) system; windows are kept shorter than the
//! contraction radius 1/5, and successive windows chain the integral and
//! running-maximum state of the converged prefix. Higher coordinates are
//! autonomous and are solved first, top down, then fed into the reflected
//! block as additional forcing. Time integrals use left-endpoint sums, which
//! match the right-continuous step interpretation of simulation-derived
//! drivers; the discretization error is O(dt).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reflection::{regulator, Barrier};
use crate::scaling::{GridPath, GridSpec};
use crate::sim::replication_rng;

/// Parameters for sampling the driving noise of the limit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Drift coefficient of the first coordinate's driver.
    pub beta: f64,
    pub seed: u64,
    pub grid: GridSpec,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParams(format!(
                "beta must be a nonnegative real, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Inputs of the reflected integral system: upper barrier for the second
/// coordinate, initial values, and driving paths.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingInput {
    pub barrier: Barrier,
    pub b: Vec<f64>,
    pub y: GridPath,
}

impl DrivingInput {
    pub fn new(barrier: Barrier, b: Vec<f64>, y: GridPath) -> Result<Self> {
        let input = DrivingInput { barrier, b, y };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.b.len();
        if k < 3 {
            return Err(Error::PreconditionViolation(format!(
                "the system needs k >= 3 coordinates, got {k}"
            )));
        }
        if self.y.dim() != k {
            return Err(Error::MismatchedInputs(format!(
                "drivers have {} coordinates but b has {k}",
                self.y.dim()
            )));
        }
        if self.b[0] > 0.0 {
            return Err(Error::PreconditionViolation(format!(
                "b[0] = {} must be <= 0",
                self.b[0]
            )));
        }
        if self.b[1] < 0.0 || self.b[1] > self.barrier.value() {
            return Err(Error::PreconditionViolation(format!(
                "b[1] = {} must lie in [0, {}]",
                self.b[1], self.barrier
            )));
        }
        if let Some(bad) = self.b[2..].iter().find(|&&v| v < 0.0) {
            return Err(Error::PreconditionViolation(format!(
                "tail initial values must be nonnegative, got {bad}"
            )));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.b.len()
    }
}

/// Solution of the reflected system: `x` has the k state coordinates, `u` the
/// two regulators.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSolution {
    pub x: GridPath,
    pub u: GridPath,
}

impl LimitSolution {
    /// CSV with columns `t,x1..xk,u1,u2`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let stacked = GridPath::hstack(&[&self.x, &self.u]);
        let mut names: Vec<String> = (1..=self.x.dim()).map(|i| format!("x{i}")).collect();
        names.push("u1".into());
        names.push("u2".into());
        stacked.write_csv(w, &names)
    }
}

/// First iterate used by the fixed-point solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PicardStart {
    /// Start from the driver path `b + y` (the zeroth-order solution).
    #[default]
    Driver,
    /// Start from zero (initial value only).
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Window length; the fixed-point map is a contraction for windows < 1/5.
    pub window: f64,
    /// Convergence tolerance, relative to the scale of the inputs.
    pub tol: f64,
    pub max_iters: usize,
    pub start: PicardStart,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { window: 0.15, tol: 1e-10, max_iters: 200, start: PicardStart::Driver }
    }
}

/// Sample a standard Brownian motion on the grid: zero at `t0`, independent
/// centered Gaussian increments of variance `dt`. Reproducible from the seed.
pub fn sample_brownian(spec: &NoiseSpec) -> GridPath {
    let mut rng = replication_rng(spec.seed, 0);
    let sd = spec.grid.dt.sqrt();
    let mut values = Vec::with_capacity(spec.grid.count);
    let mut w = 0.0;
    values.push(w);
    for _ in 1..spec.grid.count {
        let z: f64 = rng.sample(StandardNormal);
        w += sd * z;
        values.push(w);
    }
    GridPath::from_column(spec.grid, values)
}

/// Driving paths of the limit system: the first coordinate is
/// `sqrt(2) W(t) - beta t`, all higher coordinates are identically zero.
pub fn make_limit_drivers(spec: &NoiseSpec, k: usize) -> Result<GridPath> {
    spec.validate()?;
    if k < 3 {
        return Err(Error::PreconditionViolation(format!(
            "the limit system needs k >= 3 coordinates, got {k}"
        )));
    }
    let w = sample_brownian(spec);
    let mut y = GridPath::zeros(spec.grid, k);
    let sqrt2 = 2f64.sqrt();
    for j in 0..spec.grid.count {
        let t = spec.grid.time(j) - spec.grid.t0;
        y.set(j, 0, sqrt2 * w.value(j, 0) - spec.beta * t);
    }
    Ok(y)
}

/// Solve the reflected integral system with default options.
pub fn solve_limit_system(input: &DrivingInput) -> Result<LimitSolution> {
    solve_limit_system_with(input, &SolverOptions::default())
}

/// Solve the reflected integral system on the driver grid.
///
/// The tail coordinates (3..k) are autonomous: with identically-zero tail
/// drivers they take the exponential closed form, otherwise each is solved
/// top-down by the same windowed iteration. Their integral then enters the
/// two-coordinate reflected block as extra forcing.
pub fn solve_limit_system_with(
    input: &DrivingInput,
    opts: &SolverOptions,
) -> Result<LimitSolution> {
    input.validate()?;
    let grid = input.y.grid();
    let k = input.k();
    let m = grid.count;
    let dt = grid.dt;

    let scale = input
        .b
        .iter()
        .fold(1.0f64, |s, v| s.max(v.abs()))
        .max(input.y.sup_norm());
    let tol_eff = opts.tol * scale;

    // tail coordinates, top down
    let tail_drivers_zero =
        (2..k).all(|c| (0..m).all(|j| input.y.value(j, c) == 0.0));
    let mut tail: Vec<Vec<f64>> = Vec::with_capacity(k - 2);
    if tail_drivers_zero {
        let closed = explicit_tail_solution(&input.b[2..], grid);
        for c in 0..k - 2 {
            tail.push(closed.column(c));
        }
    } else {
        let mut above: Option<&Vec<f64>> = None;
        let mut solved_rev: Vec<Vec<f64>> = Vec::with_capacity(k - 2);
        for c in (2..k).rev() {
            let mut forcing = input.y.column(c);
            if let Some(next) = above {
                add_cum_integral(&mut forcing, next, dt);
            }
            let x = picard_1d(input.b[c], &forcing, dt, opts, tol_eff)?;
            solved_rev.push(x);
            above = Some(solved_rev.last().unwrap());
        }
        solved_rev.reverse();
        tail = solved_rev;
    }

    // forcing for the second coordinate: y_2 + integral of the third coordinate
    let mut yhat2 = input.y.column(1);
    add_cum_integral(&mut yhat2, &tail[0], dt);

    let y1 = input.y.column(0);
    let (free1, free2) = picard_reflected_block(
        input.b[0],
        input.b[1],
        &y1,
        &yhat2,
        input.barrier,
        dt,
        opts,
        tol_eff,
    )?;

    // compose the reflected outputs
    let u1 = regulator(&free1, Barrier::ZERO);
    let x1: Vec<f64> = free1.iter().zip(&u1).map(|(w, r)| w - r).collect();
    let w2: Vec<f64> = free2.iter().zip(&u1).map(|(w, r)| w + r).collect();
    let u2 = regulator(&w2, input.barrier);
    let x2: Vec<f64> = w2.iter().zip(&u2).map(|(w, r)| w - r).collect();

    let mut x = GridPath::zeros(grid, k);
    let mut u = GridPath::zeros(grid, 2);
    for j in 0..m {
        x.set(j, 0, x1[j]);
        x.set(j, 1, x2[j]);
        for c in 0..k - 2 {
            x.set(j, c + 2, tail[c][j]);
        }
        u.set(j, 0, u1[j]);
        u.set(j, 1, u2[j]);
    }
    Ok(LimitSolution { x, u })
}

/// In place: `forcing[j] += dt * sum_{l<j} x[l]` (left-endpoint cumulative sum).
fn add_cum_integral(forcing: &mut [f64], x: &[f64], dt: f64) {
    let mut acc = 0.0;
    for (j, f) in forcing.iter_mut().enumerate() {
        *f += acc;
        acc += dt * x[j];
    }
}

fn window_steps(window: f64, dt: f64) -> usize {
    ((window / dt).floor() as usize).max(1)
}

/// Windowed fixed-point solution of `x(t) = b + y(t) - int_0^t x`.
fn picard_1d(
    b: f64,
    y: &[f64],
    dt: f64,
    opts: &SolverOptions,
    tol_eff: f64,
) -> Result<Vec<f64>> {
    let m = y.len();
    let mut x: Vec<f64> = match opts.start {
        PicardStart::Driver => y.iter().map(|v| b + v).collect(),
        PicardStart::Zero => vec![0.0; m],
    };
    x[0] = b + y[0];
    let mut scratch = x.clone();
    let steps = window_steps(opts.window, dt);

    let mut prefix_int = dt * x[0];
    let mut js = 1usize;
    let mut window_index = 0usize;
    while js < m {
        let je = (js + steps - 1).min(m - 1);
        let mut converged = false;
        for iter in 0..opts.max_iters {
            let mut acc = prefix_int;
            let mut diff = 0.0f64;
            for j in js..=je {
                if j > js {
                    acc += dt * x[j - 1];
                }
                let v = b + y[j] - acc;
                diff = diff.max((v - x[j]).abs());
                scratch[j] = v;
            }
            x[js..=je].copy_from_slice(&scratch[js..=je]);
            if diff <= tol_eff {
                converged = true;
                break;
            }
            if iter + 1 == opts.max_iters {
                return Err(Error::NonConvergence {
                    window_index,
                    residual: diff,
                    tol: tol_eff,
                    iters: opts.max_iters,
                });
            }
        }
        debug_assert!(converged);
        for &v in &x[js..=je] {
            prefix_int += dt * v;
        }
        js = je + 1;
        window_index += 1;
    }
    Ok(x)
}

/// Windowed fixed-point iteration for the substituted two-coordinate system.
///
/// Returns the free (pre-reflection) paths. The first is reflected at zero
/// from above; the second still needs the first's regulator added before it
/// is reflected at the barrier.
#[allow(clippy::too_many_arguments)]
fn picard_reflected_block(
    b1: f64,
    b2: f64,
    y1: &[f64],
    yhat2: &[f64],
    barrier: Barrier,
    dt: f64,
    opts: &SolverOptions,
    tol_eff: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = y1.len();
    let bval = barrier.value();

    // w1 is the free path of the first coordinate; w2t is the free path of the
    // second with the zero-barrier regulator of w1 not yet added back
    let (mut w1, mut w2t): (Vec<f64>, Vec<f64>) = match opts.start {
        PicardStart::Driver => (
            y1.iter().map(|v| b1 + v).collect(),
            yhat2.iter().map(|v| b2 + v).collect(),
        ),
        PicardStart::Zero => (vec![0.0; m], vec![0.0; m]),
    };
    w1[0] = b1 + y1[0];
    w2t[0] = b2 + yhat2[0];
    let mut n1 = w1.clone();
    let mut n2 = w2t.clone();

    let steps = window_steps(opts.window, dt);

    // carried prefix state: integrals of the two integrands and the running
    // maxima of the regulators, over all converged indices
    let mut int1 = 0.0f64;
    let mut int2 = 0.0f64;
    let mut max0 = 0.0f64;
    let mut max_b = 0.0f64;
    let advance =
        |l: usize, w1: &[f64], w2t: &[f64], m0: &mut f64, mb: &mut f64, i1: &mut f64, i2: &mut f64| {
            if w1[l] > *m0 {
                *m0 = w1[l];
            }
            let w2l = w2t[l] + *m0;
            let excess = w2l - bval;
            if excess > *mb {
                *mb = excess;
            }
            let lower = w1[l] - *m0; // at or below zero
            let upper = w2l - *mb; // at or below the barrier
            *i1 += dt * (-lower + upper);
            *i2 += dt * (-upper);
        };
    advance(0, &w1, &w2t, &mut max0, &mut max_b, &mut int1, &mut int2);

    let mut js = 1usize;
    let mut window_index = 0usize;
    while js < m {
        let je = (js + steps - 1).min(m - 1);
        for iter in 0..opts.max_iters {
            let mut m0 = max0;
            let mut mb = max_b;
            let mut i1 = int1;
            let mut i2 = int2;
            let mut diff = 0.0f64;
            for j in js..=je {
                if j > js {
                    advance(j - 1, &w1, &w2t, &mut m0, &mut mb, &mut i1, &mut i2);
                }
                let v1 = b1 + y1[j] + i1;
                let v2 = b2 + yhat2[j] + i2;
                diff = diff.max((v1 - w1[j]).abs()).max((v2 - w2t[j]).abs());
                n1[j] = v1;
                n2[j] = v2;
            }
            w1[js..=je].copy_from_slice(&n1[js..=je]);
            w2t[js..=je].copy_from_slice(&n2[js..=je]);
            if diff <= tol_eff {
                break;
            }
            if iter + 1 == opts.max_iters {
                return Err(Error::NonConvergence {
                    window_index,
                    residual: diff,
                    tol: tol_eff,
                    iters: opts.max_iters,
                });
            }
        }
        for l in js..=je {
            advance(l, &w1, &w2t, &mut max0, &mut max_b, &mut int1, &mut int2);
        }
        js = je + 1;
        window_index += 1;
    }
    Ok((w1, w2t))
}

/// Closed-form deterministic solution for the tail coordinates given their
/// initial values `b_tail` (coordinates 3..k):
/// `x_i(t) = e^{-t} (b_i + sum_{j=1}^{k-i} t^j / j! * b_{i+j})`.
pub fn explicit_tail_solution(b_tail: &[f64], grid: GridSpec) -> GridPath {
    let dims = b_tail.len();
    let mut gp = GridPath::zeros(grid, dims.max(1));
    if dims == 0 {
        return gp;
    }
    for j in 0..grid.count {
        let t = grid.time(j) - grid.t0;
        let decay = (-t).exp();
        for c in 0..dims {
            let mut sum = b_tail[c];
            let mut term = 1.0f64;
            for (step, &b_next) in b_tail[c + 1..].iter().enumerate() {
                term *= t / (step + 1) as f64;
                sum += term * b_next;
            }
            gp.set(j, c, decay * sum);
        }
    }
    gp
}

/// One sample path of the limit system: compose the limit drivers with the
/// solver at an infinite barrier (so the second regulator vanishes).
pub fn simulate_limit_diffusion(
    x0: &[f64],
    spec: &NoiseSpec,
    k: usize,
) -> Result<LimitSolution> {
    if x0.len() != k {
        return Err(Error::PreconditionViolation(format!(
            "initial vector has {} coordinates, expected k = {k}",
            x0.len()
        )));
    }
    let y = make_limit_drivers(spec, k)?;
    let input = DrivingInput::new(Barrier::INFINITE, x0.to_vec(), y)?;
    solve_limit_system(&input)
}

/// Sup-norm residuals of the discretized integral equations, per coordinate,
/// for a candidate solution.
pub fn system_residuals(input: &DrivingInput, sol: &LimitSolution) -> Vec<f64> {
    let k = input.k();
    let grid = input.y.grid();
    let m = grid.count;
    let dt = grid.dt;
    let mut res = vec![0.0f64; k];
    let mut ints = vec![0.0f64; k]; // left-endpoint integrals of the drift terms
    for j in 0..m {
        for i in 0..k {
            let expected = input.b[i]
                + input.y.value(j, i)
                + ints[i]
                + match i {
                    0 => -sol.u.value(j, 0),
                    1 => sol.u.value(j, 0) - sol.u.value(j, 1),
                    _ => 0.0,
                };
            let got = sol.x.value(j, i);
            res[i] = res[i].max((got - expected).abs());
        }
        for i in 0..k {
            let drift = -sol.x.value(j, i) + if i + 1 < k { sol.x.value(j, i + 1) } else { 0.0 };
            ints[i] += dt * drift;
        }
    }
    res
}

/// Maximum residual over all coordinates; see [`system_residuals`].
pub fn system_residual(input: &DrivingInput, sol: &LimitSolution) -> f64 {
    system_residuals(input, sol).into_iter().fold(0.0, f64::max)
}
