//! Double-integration operator from per-step accelerations to CoM positions,
//! plus the finite-difference operators used by the objective.
//!
//! Accelerations are held constant over each step of length `dt`, and
//! `s_i` is the position at the end of step `i`, i.e. at time `(i + 1) dt`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::sparse::{CscMatrix, TripletBuilder};
use crate::{Error, Vec3};

/// Standard gravity as a signed vector (z up).
pub const GRAVITY: Vec3 = Vec3::new(0.0, 0.0, -9.81);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationMatrix {
    pub n: usize,
    pub dt: f64,
    pub p: DMatrix<f64>,
}

impl IntegrationMatrix {
    /// Closed-form entry `dt² (2(i−j)+1)/2` for `j ≤ i`.
    pub fn entry(n: usize, dt: f64, i: usize, j: usize) -> f64 {
        debug_assert!(i < n && j < n);
        if j > i {
            0.0
        } else {
            dt * dt * (2 * (i - j) + 1) as f64 / 2.0
        }
    }
}

fn check_horizon(n: usize, dt: f64, min_n: usize) -> Result<(), Error> {
    if n < min_n {
        return Err(Error::InvalidHorizon(format!("N = {n}, need at least {min_n}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidHorizon(format!("dt = {dt} must be positive")));
    }
    Ok(())
}

pub fn build_p(n: usize, dt: f64) -> Result<IntegrationMatrix, Error> {
    check_horizon(n, dt, 1)?;
    let p = DMatrix::from_fn(n, n, |i, j| IntegrationMatrix::entry(n, dt, i, j));
    Ok(IntegrationMatrix { n, dt, p })
}

/// CoM positions for per-step total contact accelerations.
///
/// The net acceleration at step `i` is `total_accel[i] + gravity`, with
/// `gravity` the signed gravity vector (`GRAVITY` on Earth). `v0` is the
/// initial CoM velocity.
pub fn integrate(
    p: &IntegrationMatrix,
    total_accel: &[Vec3],
    gravity: Vec3,
    s0: Vec3,
    v0: Vec3,
) -> Result<Vec<Vec3>, Error> {
    if total_accel.len() != p.n {
        return Err(Error::DimensionMismatch(format!(
            "{} accelerations for a horizon of {}",
            total_accel.len(),
            p.n
        )));
    }
    Ok((0..p.n)
        .map(|i| {
            let mut s = s0 + v0 * (p.dt * (i + 1) as f64);
            for (j, a) in total_accel.iter().enumerate().take(i + 1) {
                s += (a + gravity) * p.p[(i, j)];
            }
            s
        })
        .collect())
}

/// Forward differences of a position sequence divided by `dt`, (N−1)×N.
pub fn velocity_op(n: usize, dt: f64) -> Result<CscMatrix, Error> {
    first_difference(n, dt)
}

/// Rate of change of an acceleration sequence: forward differences divided by `dt`, (N−1)×N.
pub fn jerk_op(n: usize, dt: f64) -> Result<CscMatrix, Error> {
    first_difference(n, dt)
}

fn first_difference(n: usize, dt: f64) -> Result<CscMatrix, Error> {
    check_horizon(n, dt, 2)?;
    let mut t = TripletBuilder::new(n - 1, n);
    for i in 0..n - 1 {
        t.push(i, i, -1.0 / dt);
        t.push(i, i + 1, 1.0 / dt);
    }
    Ok(t.to_csc())
}

/// Finite-difference velocities of a trajectory starting at `s0`: entry `i`
/// is `(s_i − s_{i−1}) / dt` with `s_{−1} = s0`.
pub fn finite_difference_velocity(s0: Vec3, s: &[Vec3], dt: f64) -> Vec<Vec3> {
    let mut prev = s0;
    s.iter()
        .map(|&si| {
            let v = (si - prev) / dt;
            prev = si;
            v
        })
        .collect()
}
