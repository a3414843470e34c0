//! Convex QP solver contract and the reference splitting solver.
//!
//! Problems are in the standard form
//!
//! ```text
//! minimize    ½ xᵀ P x + qᵀ x
//! subject to  l ≤ A x ≤ u
//! ```
//!
//! with `P` symmetric positive semidefinite (stored as its upper triangle).
//! Any backend implementing [`QpSolver`] can be plugged into the planner.

mod admm;
pub mod ldl;

use serde::{Deserialize, Serialize};

use crate::sparse::{dot, CscMatrix};
use crate::Error;

pub use admm::AdmmSolver;

/// Standard-form quadratic program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpProblem {
    /// Upper triangle of the symmetric quadratic term.
    pub p: CscMatrix,
    pub q: Vec<f64>,
    pub a: CscMatrix,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    /// Constant offset added to the objective value (does not affect the minimizer).
    pub constant: f64,
}

impl QpProblem {
    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.l.len()
    }

    pub fn check_dimensions(&self) -> Result<(), Error> {
        let n = self.q.len();
        let m = self.l.len();
        let ok = self.p.nrows == n
            && self.p.ncols == n
            && self.a.ncols == n
            && self.a.nrows == m
            && self.u.len() == m;
        if !ok {
            return Err(Error::DimensionMismatch(format!(
                "P is {}x{}, q has {n}, A is {}x{}, l has {m}, u has {}",
                self.p.nrows,
                self.p.ncols,
                self.a.nrows,
                self.a.ncols,
                self.u.len()
            )));
        }
        if !self.p.is_upper_triangular() {
            return Err(Error::DimensionMismatch(
                "quadratic term must be stored as an upper triangle".into(),
            ));
        }
        if self.l.iter().zip(&self.u).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return Err(Error::DimensionMismatch("constraint bounds have l > u".into()));
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut px = vec![0.0; x.len()];
        self.p.sym_upper_mul_vec(x, &mut px);
        0.5 * dot(x, &px) + dot(&self.q, x) + self.constant
    }

    /// Largest violation of `l ≤ A x ≤ u`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.num_constraints()];
        self.a.mul_vec(x, &mut ax);
        ax.iter()
            .zip(self.l.iter().zip(&self.u))
            .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    PrimalInfeasible,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Constraint multipliers (positive on active upper bounds, negative on lower).
    pub y: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub polished: bool,
    /// Wall-clock seconds spent inside the solver.
    pub solve_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Initial ADMM penalty.
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation factor in (0, 2).
    pub relaxation: f64,
    pub adaptive_rho: bool,
    pub adaptive_rho_interval: usize,
    pub scaling_iters: usize,
    pub check_interval: usize,
    pub infeasibility_tol: f64,
    pub polish: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-6,
            rel_tol: 1e-6,
            max_iter: 20_000,
            rho: 0.1,
            sigma: 1e-6,
            relaxation: 1.6,
            adaptive_rho: true,
            adaptive_rho_interval: 50,
            scaling_iters: 10,
            check_interval: 10,
            infeasibility_tol: 1e-4,
            polish: true,
        }
    }
}

/// Initial iterate for a solve.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
}

pub trait QpSolver {
    fn solve(&self, problem: &QpProblem, warm_start: Option<&WarmStart>) -> Result<QpSolution, Error>;
}
