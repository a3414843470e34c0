//! Assembly of one reweighted footstep QP in standard form.
//!
//! Variables are the scale factors α (one per candidate, time-major) followed
//! by the CoM positions s (three per step). Contact accelerations
//! `α · leg_dir` are substituted directly, so they never appear as variables.
//!
//! When a previous solution is given, each α column is stored normalized as
//! `α / (prev + ε)`, which turns the cardinality rows into plain sums and
//! keeps the problem well scaled for first-order solvers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::config::{DesiredPath, PlannerConfig};
use crate::env::CandidateSet;
use crate::solver::QpProblem;
use crate::sparse::TripletBuilder;
use crate::{Error, Vec3};

/// Scale factors of a previous solve keyed by (time index, surface id).
/// Missing keys count as zero.
pub type PrevAlpha = HashMap<(usize, usize), f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub n: usize,
    /// First α column of each step; `alpha_start[n]` is the α count.
    pub alpha_start: Vec<usize>,
    /// (time index, surface id) of every α column.
    pub alpha_keys: Vec<(usize, usize)>,
    /// α = scale · x for every α column.
    pub alpha_scale: Vec<f64>,
}

impl VariableLayout {
    pub fn num_alpha(&self) -> usize {
        self.alpha_start[self.n]
    }

    pub fn num_vars(&self) -> usize {
        self.num_alpha() + 3 * self.n
    }

    pub fn alpha(&self, i: usize, k: usize) -> usize {
        debug_assert!(self.alpha_start[i] + k < self.alpha_start[i + 1]);
        self.alpha_start[i] + k
    }

    pub fn s(&self, i: usize, axis: usize) -> usize {
        self.num_alpha() + 3 * i + axis
    }
}

/// Row offsets of each constraint block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowLayout {
    pub kinematics: usize,
    /// Two-sided per-axis path rows, three per step.
    pub path_box: usize,
    pub alpha_bounds: usize,
    pub cardinality: usize,
    /// Steps that have a cardinality row, in row order.
    pub cardinality_steps: Vec<usize>,
    pub total: usize,
}

#[derive(Debug, Clone)]
pub struct AssembledQp {
    pub problem: QpProblem,
    pub layout: VariableLayout,
    pub rows: RowLayout,
}

impl AssembledQp {
    /// Scale factors per step, in candidate order.
    pub fn split_alpha(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let alpha = self.alpha_values(x);
        (0..self.layout.n)
            .map(|i| alpha[self.layout.alpha_start[i]..self.layout.alpha_start[i + 1]].to_vec())
            .collect()
    }

    /// Scale factors of all α columns, unnormalized.
    pub fn alpha_values(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.layout.alpha_scale).map(|(v, s)| v * s).collect()
    }

    pub fn positions(&self, x: &[f64]) -> Vec<Vec3> {
        (0..self.layout.n)
            .map(|i| {
                let o = self.layout.s(i, 0);
                Vec3::new(x[o], x[o + 1], x[o + 2])
            })
            .collect()
    }
}

/// Sum of `α · leg_dir` over the candidates of each step.
pub fn total_accel(candidates: &CandidateSet, alpha: &[Vec<f64>]) -> Vec<Vec3> {
    candidates
        .steps
        .iter()
        .zip(alpha)
        .map(|(cands, a)| cands.iter().zip(a).map(|(c, &ai)| c.leg_dir * ai).sum())
        .collect()
}

/// Accumulates `weight · (Σ cⱼ xⱼ − b)²` into the upper-triangular quadratic
/// term (with the ½ convention), the linear term and the constant.
struct Objective {
    p: TripletBuilder,
    q: Vec<f64>,
    constant: f64,
}

impl Objective {
    fn add_square(&mut self, terms: &[(usize, f64)], b: f64, weight: f64) {
        if weight == 0.0 {
            return;
        }
        debug_assert!(
            terms.iter().enumerate().all(|(a, t)| terms[a + 1..].iter().all(|o| o.0 != t.0)),
            "duplicate column in squared term"
        );
        for (a, &(ja, ca)) in terms.iter().enumerate() {
            for &(jb, cb) in &terms[a..] {
                let (r, c) = if ja <= jb { (ja, jb) } else { (jb, ja) };
                self.p.push(r, c, 2.0 * weight * ca * cb);
            }
            self.q[ja] -= 2.0 * weight * b * ca;
        }
        self.constant += weight * b * b;
    }
}

pub fn assemble(
    candidates: &CandidateSet,
    path: &DesiredPath,
    config: &PlannerConfig,
    prev_alpha: Option<&PrevAlpha>,
) -> Result<AssembledQp, Error> {
    let n = config.n;
    path.validate(n)?;
    if candidates.horizon() != n {
        return Err(Error::DimensionMismatch(format!(
            "candidate set covers {} steps, horizon is {n}",
            candidates.horizon()
        )));
    }
    if candidates.total() == 0 {
        return Err(Error::NoCandidates);
    }
    let dt = config.dt;
    let w = &config.weights;

    let mut alpha_start = Vec::with_capacity(n + 1);
    let mut alpha_keys = Vec::with_capacity(candidates.total());
    alpha_start.push(0);
    for (i, step) in candidates.steps.iter().enumerate() {
        alpha_keys.extend(step.iter().map(|c| (i, c.surface_id)));
        alpha_start.push(alpha_keys.len());
    }
    let alpha_scale = alpha_keys
        .iter()
        .map(|key| match prev_alpha {
            Some(prev) => prev.get(key).copied().unwrap_or(0.0) + config.epsilon,
            None => 1.0,
        })
        .collect();
    let layout = VariableLayout {
        n,
        alpha_start,
        alpha_keys,
        alpha_scale,
    };
    let sc = &layout.alpha_scale;
    let nv = layout.num_vars();

    let mut obj = Objective {
        p: TripletBuilder::new(nv, nv),
        q: vec![0.0; nv],
        constant: 0.0,
    };

    // terrain cost and reweighted cardinality penalty
    for (i, step) in candidates.steps.iter().enumerate() {
        for (k, c) in step.iter().enumerate() {
            let j = layout.alpha(i, k);
            obj.q[j] += w.w0 * c.cost * sc[j];
            if prev_alpha.is_some() {
                obj.q[j] += w.w4;
            }
        }
    }

    // temporal consistency of each surface across consecutive steps
    let tc = w.w1 / (dt * dt);
    for i in 0..n.saturating_sub(1) {
        let next: HashMap<usize, usize> = candidates.steps[i + 1]
            .iter()
            .enumerate()
            .map(|(k, c)| (c.surface_id, k))
            .collect();
        for (k, c) in candidates.steps[i].iter().enumerate() {
            let j = layout.alpha(i, k);
            match next.get(&c.surface_id) {
                Some(&k2) => {
                    let j2 = layout.alpha(i + 1, k2);
                    obj.add_square(&[(j, sc[j]), (j2, -sc[j2])], 0.0, tc)
                }
                None => obj.add_square(&[(j, sc[j])], 0.0, tc),
            }
        }
    }

    // path and velocity tracking
    for i in 0..n {
        for axis in 0..3 {
            obj.add_square(&[(layout.s(i, axis), 1.0)], path.s_star[i][axis], w.w2);
            if i + 1 < n {
                obj.add_square(
                    &[(layout.s(i + 1, axis), 1.0 / dt), (layout.s(i, axis), -1.0 / dt)],
                    path.v_star[i][axis],
                    w.w2 * w.w,
                );
            }
        }
    }

    // rate of change of the total contact acceleration
    let jw = w.w3 / (dt * dt);
    for i in 0..n.saturating_sub(1) {
        for axis in 0..3 {
            let mut terms: Vec<(usize, f64)> = Vec::new();
            for (k, c) in candidates.steps[i + 1].iter().enumerate() {
                let j = layout.alpha(i + 1, k);
                terms.push((j, c.leg_dir[axis] * sc[j]));
            }
            for (k, c) in candidates.steps[i].iter().enumerate() {
                let j = layout.alpha(i, k);
                terms.push((j, -c.leg_dir[axis] * sc[j]));
            }
            terms.retain(|t| t.1 != 0.0);
            if !terms.is_empty() {
                obj.add_square(&terms, 0.0, jw);
            }
        }
    }

    // constraints
    let num_alpha = layout.num_alpha();
    let card_steps: Vec<usize> = if prev_alpha.is_some() {
        (0..n).filter(|&i| !candidates.steps[i].is_empty()).collect()
    } else {
        Vec::new()
    };
    let rows = RowLayout {
        kinematics: 0,
        path_box: 3 * n,
        alpha_bounds: 6 * n,
        cardinality: 6 * n + num_alpha,
        total: 6 * n + num_alpha + card_steps.len(),
        cardinality_steps: card_steps,
    };
    let mut a = TripletBuilder::new(rows.total, nv);
    let mut l = vec![0.0; rows.total];
    let mut u = vec![0.0; rows.total];

    // s_i − 2 s_{i−1} + s_{i−2} = dt²/2 (net_i + net_{i−1}), with the known
    // initial state folded into the right-hand side for i < 2
    let h = 0.5 * dt * dt;
    let g = config.gravity;
    for i in 0..n {
        for axis in 0..3 {
            let r = rows.kinematics + 3 * i + axis;
            a.push(r, layout.s(i, axis), 1.0);
            let rhs = match i {
                0 => path.s0[axis] + path.v0[axis] * dt + h * g[axis],
                1 => {
                    a.push(r, layout.s(0, axis), -2.0);
                    -path.s0[axis] + 2.0 * h * g[axis]
                }
                _ => {
                    a.push(r, layout.s(i - 1, axis), -2.0);
                    a.push(r, layout.s(i - 2, axis), 1.0);
                    2.0 * h * g[axis]
                }
            };
            for (k, c) in candidates.steps[i].iter().enumerate() {
                let j = layout.alpha(i, k);
                a.push(r, j, -h * c.leg_dir[axis] * sc[j]);
            }
            if i >= 1 {
                for (k, c) in candidates.steps[i - 1].iter().enumerate() {
                    let j = layout.alpha(i - 1, k);
                    a.push(r, j, -h * c.leg_dir[axis] * sc[j]);
                }
            }
            l[r] = rhs;
            u[r] = rhs;
        }
    }

    for i in 0..n {
        for axis in 0..3 {
            let r = rows.path_box + 3 * i + axis;
            a.push(r, layout.s(i, axis), 1.0);
            l[r] = path.s_star[i][axis] - config.tol;
            u[r] = path.s_star[i][axis] + config.tol;
        }
    }

    for (i, step) in candidates.steps.iter().enumerate() {
        for (k, c) in step.iter().enumerate() {
            let j = layout.alpha(i, k);
            let r = rows.alpha_bounds + j;
            a.push(r, j, 1.0);
            l[r] = 0.0;
            u[r] = config.a_max / (c.leg_dir.norm() * sc[j]);
        }
    }

    // Σ α / (prev + ε) over each step, a plain sum in normalized columns
    for (row, &i) in rows.cardinality_steps.iter().enumerate() {
        let r = rows.cardinality + row;
        for k in 0..candidates.steps[i].len() {
            a.push(r, layout.alpha(i, k), 1.0);
        }
        l[r] = f64::NEG_INFINITY;
        u[r] = config.card_limit;
    }

    let problem = QpProblem {
        p: obj.p.to_csc(),
        q: obj.q,
        a: a.to_csc(),
        l,
        u,
        constant: obj.constant,
    };
    Ok(AssembledQp {
        problem,
        layout,
        rows,
    })
}

#[cfg(test)]
mod tests;
