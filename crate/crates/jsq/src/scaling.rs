//! Diffusion and fluid scalings of event paths, and the uniform-grid path
//! type shared with the limit solver.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::StepPath;

/// A uniform time grid `t0 + j * dt` for `j in 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t0: f64,
    pub dt: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn new(t0: f64, dt: f64, count: usize) -> Result<Self> {
        let g = GridSpec { t0, dt, count };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParams(format!(
                "grid dt must be a positive real, got {}",
                self.dt
            )));
        }
        if self.count < 2 {
            return Err(Error::InvalidParams("grid needs at least 2 points".into()));
        }
        if !self.t0.is_finite() || self.t0 < 0.0 {
            return Err(Error::InvalidParams(format!(
                "grid t0 must be finite and nonnegative, got {}",
                self.t0
            )));
        }
        Ok(())
    }

    /// Grid that covers `[0, horizon]` with the given step.
    pub fn covering(horizon: f64, dt: f64) -> Result<Self> {
        let count = (horizon / dt).round() as usize + 1;
        GridSpec::new(0.0, dt, count.max(2))
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.count - 1)
    }

    /// Last grid index with time <= t (clamped into the grid).
    pub fn index_at(&self, t: f64) -> usize {
        if t <= self.t0 {
            return 0;
        }
        (((t - self.t0) / self.dt).floor() as usize).min(self.count - 1)
    }
}

/// A vector-valued function sampled on a uniform grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    grid: GridSpec,
    dim: usize,
    values: Vec<f64>,
}

impl GridPath {
    pub fn zeros(grid: GridSpec, dim: usize) -> Self {
        GridPath { grid, dim, values: vec![0.0; grid.count * dim] }
    }

    pub fn from_values(grid: GridSpec, dim: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.count * dim);
        GridPath { grid, dim, values }
    }

    /// Single-coordinate path from a value slice.
    pub fn from_column(grid: GridSpec, values: Vec<f64>) -> Self {
        Self::from_values(grid, 1, values)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.count
    }

    pub fn is_empty(&self) -> bool {
        self.grid.count == 0
    }

    pub fn time(&self, j: usize) -> f64 {
        self.grid.time(j)
    }

    pub fn value(&self, j: usize, coord: usize) -> f64 {
        self.values[j * self.dim + coord]
    }

    pub fn set(&mut self, j: usize, coord: usize, v: f64) {
        self.values[j * self.dim + coord] = v;
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn column(&self, coord: usize) -> Vec<f64> {
        (0..self.len()).map(|j| self.value(j, coord)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max absolute difference over all grid points and coordinates.
    pub fn sup_diff(&self, other: &GridPath) -> f64 {
        assert_eq!(self.dim, other.dim);
        assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Merge paths on the same grid into one with all coordinates side by side.
    pub fn hstack(parts: &[&GridPath]) -> GridPath {
        assert!(!parts.is_empty());
        let grid = parts[0].grid;
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let mut values = Vec::with_capacity(grid.count * dim);
        for j in 0..grid.count {
            for p in parts {
                assert_eq!(p.grid, grid);
                values.extend_from_slice(p.row(j));
            }
        }
        GridPath { grid, dim, values }
    }

    /// Write as CSV with header `t,<name1>,...`; 12 significant digits in
    /// decimal notation.
    pub fn write_csv<W: Write>(&self, mut w: W, names: &[String]) -> Result<()> {
        assert_eq!(names.len(), self.dim);
        write!(w, "t")?;
        for name in names {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for j in 0..self.len() {
            write!(w, "{}", fmt_sig12(self.time(j)))?;
            for c in 0..self.dim {
                write!(w, ",{}", fmt_sig12(self.value(j, c)))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Decimal notation with 12 significant digits (no exponent).
pub fn fmt_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (11 - exp).clamp(0, 40) as usize;
    format!("{v:.decimals$}")
}

/// Sample a step path right-continuously on a grid.
pub fn sample_on_grid(path: &StepPath, grid: GridSpec) -> Result<GridPath> {
    grid.validate()?;
    if grid.t0 < 0.0 || grid.end() > path.horizon() + 1e-12 {
        return Err(Error::GridOutOfRange(format!(
            "grid spans [{}, {}] but path covers [0, {}]",
            grid.t0,
            grid.end(),
            path.horizon()
        )));
    }
    let dim = path.dim();
    let mut values = Vec::with_capacity(grid.count * dim);
    let times = path.times();
    let mut idx = 0usize;
    for j in 0..grid.count {
        let t = grid.time(j).min(path.horizon());
        while idx + 1 < times.len() && times[idx + 1] <= t {
            idx += 1;
        }
        values.extend_from_slice(path.state(idx));
    }
    Ok(GridPath { grid, dim, values })
}

/// Diffusion scaling: coordinate 1 is `(Q_1 - n) / sqrt(n)`, coordinates
/// `i >= 2` are `Q_i / sqrt(n)`, sampled right-continuously on the grid.
pub fn scale_diffusion(path: &StepPath, n: u64, grid: GridSpec) -> Result<GridPath> {
    let mut gp = sample_on_grid(path, grid)?;
    let sqrt_n = (n as f64).sqrt();
    let nf = n as f64;
    for j in 0..gp.len() {
        let v0 = gp.value(j, 0);
        gp.set(j, 0, (v0 - nf) / sqrt_n);
        for c in 1..gp.dim() {
            gp.set(j, c, gp.value(j, c) / sqrt_n);
        }
    }
    Ok(gp)
}

/// Fluid scaling: every coordinate is `Q_i / n`.
pub fn scale_fluid(path: &StepPath, n: u64, grid: GridSpec) -> Result<GridPath> {
    let mut gp = sample_on_grid(path, grid)?;
    let nf = n as f64;
    for j in 0..gp.len() {
        for c in 0..gp.dim() {
            gp.set(j, c, gp.value(j, c) / nf);
        }
    }
    Ok(gp)
}

/// Invert the diffusion scaling back to integer counts (rounding to nearest).
pub fn unscale_diffusion(gp: &GridPath, n: u64) -> Vec<Vec<u64>> {
    let sqrt_n = (n as f64).sqrt();
    let nf = n as f64;
    (0..gp.len())
        .map(|j| {
            (0..gp.dim())
                .map(|c| {
                    let v = gp.value(j, c);
                    let raw = if c == 0 { v * sqrt_n + nf } else { v * sqrt_n };
                    raw.round() as u64
                })
                .collect()
        })
        .collect()
}
