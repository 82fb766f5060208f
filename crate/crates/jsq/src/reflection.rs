//! One-sided reflection at an upper barrier.
//!
//! On grid data the regulator is the running maximum of the barrier excess,
//! which is exact for piecewise-constant paths: `psi(t) = sup_{s<=t} (x(s) - kappa)^+`
//! and `phi = x - psi <= kappa`. An infinite barrier leaves the path unchanged
//! with a regulator identically zero.

use crate::error::{Error, Result};
use crate::scaling::GridPath;

/// Upper barrier height: a nonnegative real or infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barrier(f64);

impl Barrier {
    pub const ZERO: Barrier = Barrier(0.0);
    pub const INFINITE: Barrier = Barrier(f64::INFINITY);

    pub fn new(value: f64) -> Result<Barrier> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::InvalidParams(format!(
                "barrier must be nonnegative or infinite, got {value}"
            )));
        }
        Ok(Barrier(value))
    }

    pub fn finite(value: f64) -> Result<Barrier> {
        let b = Barrier::new(value)?;
        if b.is_infinite() {
            return Err(Error::InvalidParams("barrier must be finite".into()));
        }
        Ok(b)
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }
}

impl std::fmt::Display for Barrier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Write the regulator values for `x` into `out`, continuing a running
/// maximum from `carry` (the regulator value just before `x[0]`).
///
/// With an infinite barrier the regulator is exactly zero everywhere.
pub fn regulator_into(x: &[f64], barrier: Barrier, carry: f64, out: &mut [f64]) {
    debug_assert_eq!(x.len(), out.len());
    if barrier.is_infinite() {
        out.fill(0.0);
        return;
    }
    let kappa = barrier.value();
    let mut m = carry;
    for (o, &v) in out.iter_mut().zip(x) {
        let excess = v - kappa;
        if excess > m {
            m = excess;
        }
        *o = m;
    }
}

/// Regulator values of `x` with respect to an upper barrier.
pub fn regulator(x: &[f64], barrier: Barrier) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    regulator_into(x, barrier, 0.0, &mut out);
    out
}

/// One-sided reflection of a single-coordinate grid path at an upper barrier:
/// returns `(phi, psi)` with `phi = x - psi <= kappa` and `psi` the
/// nondecreasing running maximum of the barrier excess.
pub fn reflect_upper(x: &GridPath, barrier: Barrier) -> Result<(GridPath, GridPath)> {
    if x.dim() != 1 {
        return Err(Error::PreconditionViolation(format!(
            "reflection applies to one coordinate at a time, got dim = {}",
            x.dim()
        )));
    }
    if x.value(0, 0) > barrier.value() {
        return Err(Error::PreconditionViolation(format!(
            "path starts at {} above the barrier {}",
            x.value(0, 0),
            barrier
        )));
    }
    let column = x.column(0);
    let psi = regulator(&column, barrier);
    let phi: Vec<f64> = column.iter().zip(&psi).map(|(v, p)| v - p).collect();
    Ok((
        GridPath::from_column(x.grid(), phi),
        GridPath::from_column(x.grid(), psi),
    ))
}

/// Keep a path at or below zero: reflection at the upper barrier 0, as used
/// for the idle-server coordinate. Thin wrapper over [`reflect_upper`].
pub fn reflect_ceiling_at_zero(x: &GridPath) -> Result<(GridPath, GridPath)> {
    reflect_upper(x, Barrier::ZERO)
}

/// Keep a path at or above zero by negating, reflecting at the upper barrier
/// 0, and negating back; same single code path as [`reflect_upper`].
pub fn reflect_floor_at_zero(x: &GridPath) -> Result<(GridPath, GridPath)> {
    if x.dim() != 1 {
        return Err(Error::PreconditionViolation(
            "reflection applies to one coordinate at a time".into(),
        ));
    }
    let negated = GridPath::from_column(x.grid(), x.column(0).iter().map(|v| -v).collect());
    let (phi_neg, psi) = reflect_upper(&negated, Barrier::ZERO)?;
    let phi = GridPath::from_column(x.grid(), phi_neg.column(0).iter().map(|v| -v).collect());
    Ok((phi, psi))
}
