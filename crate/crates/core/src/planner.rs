//! The reweighting loop that turns a sequence of convex QPs into a sparse
//! contact schedule, and a checker for the resulting plans.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{DesiredPath, PlannerConfig};
use crate::env::{friction_components, select_candidates, CandidateSet, Environment};
use crate::kinematics::{build_p, finite_difference_velocity, integrate};
use crate::phases::{assign_phases, ContactPhase};
use crate::qp::{assemble, total_accel, AssembledQp, PrevAlpha};
use crate::solver::{AdmmSolver, QpSolver, SolveStatus, WarmStart};
use crate::{Error, Vec3};

/// Largest number of simultaneous contacts for a biped.
pub const MAX_CONTACTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactForce {
    pub surface_id: usize,
    pub alpha: f64,
    /// Vector from the foothold to the approximate CoM the force was aligned with.
    pub leg_dir: Vec3,
    /// `alpha * leg_dir`, m/s².
    pub accel: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub candidates: usize,
    pub max_cardinality: usize,
    pub solver_iterations: usize,
    pub solve_time: f64,
    pub status: SolveStatus,
    pub warm_started: bool,
    /// The cardinality rows made the QP infeasible and were dropped for this
    /// solve; the reweighting penalty stayed in the objective.
    pub relaxed_cardinality: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub n: usize,
    pub dt: f64,
    pub path: DesiredPath,
    /// Every candidate of every step with its scale factor.
    pub contacts: Vec<Vec<ContactForce>>,
    /// Contacts whose scale factor exceeds `active_threshold`.
    pub active_contacts: Vec<Vec<ContactForce>>,
    pub active_threshold: f64,
    /// CoM positions at the end of each step.
    pub com: Vec<Vec3>,
    pub com_vel: Vec<Vec3>,
    /// Approximate CoM used for the leg directions of the final solve.
    pub s_tilde: Vec<Vec3>,
    pub phases: Vec<ContactPhase>,
    /// Reweighting iterations after the first solve.
    pub iterations_used: usize,
    pub converged: bool,
    pub iterations: Vec<IterationStats>,
    /// Wall-clock seconds for the whole planning call.
    pub total_time: f64,
}

impl Plan {
    pub fn cardinality(&self) -> Vec<usize> {
        self.active_contacts.iter().map(Vec::len).collect()
    }

    pub fn max_cardinality(&self) -> usize {
        self.cardinality().into_iter().max().unwrap_or(0)
    }

    pub fn total_accel(&self) -> Vec<Vec3> {
        self.contacts
            .iter()
            .map(|step| step.iter().map(|c| c.accel).sum())
            .collect()
    }

    pub fn flight_steps(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.active_contacts[i].is_empty()).collect()
    }

    pub fn solve_time(&self) -> f64 {
        self.iterations.iter().map(|s| s.solve_time).sum()
    }
}

pub fn plan(env: &Environment, path: &DesiredPath, config: &PlannerConfig) -> Result<Plan, Error> {
    plan_with(&AdmmSolver::new(config.solver), env, path, config)
}

pub fn plan_with(
    solver: &dyn QpSolver,
    env: &Environment,
    path: &DesiredPath,
    config: &PlannerConfig,
) -> Result<Plan, Error> {
    let start = Instant::now();
    config.validate()?;
    path.validate(config.n)?;
    if env.is_empty() {
        return Err(Error::InvalidEnvironment("environment has no surfaces".into()));
    }

    let mut s_tilde = path.s_star.clone();
    let mut prev: Option<PrevAlpha> = None;
    let mut last: Option<(AssembledQp, Vec<f64>)> = None;
    let mut stats = Vec::new();
    let mut result: Option<(CandidateSet, Vec<Vec<f64>>, Vec<Vec3>, f64)> = None;
    let mut converged = false;
    let mut r = 0;
    loop {
        let cands = select_candidates(env, &s_tilde, config.k, config.radius)?;
        let mut qp = assemble(&cands, path, config, prev.as_ref())?;
        let warm = last.as_ref().map(|(old, x)| map_warm_start(old, x, &qp));
        let mut sol = solver.solve(&qp.problem, warm.as_ref())?;
        let mut relaxed = false;
        let (mut solver_iterations, mut solve_time) = (sol.iterations, sol.solve_time);
        if sol.status != SolveStatus::Optimal && !qp.rows.cardinality_steps.is_empty() {
            log::info!(
                "iteration {r}: cardinality rows not solvable ({:?}), solving with the penalty only",
                sol.status
            );
            qp = qp.without_cardinality_rows();
            sol = solver.solve(&qp.problem, warm.as_ref())?;
            solver_iterations += sol.iterations;
            solve_time += sol.solve_time;
            relaxed = true;
        }
        if sol.status == SolveStatus::PrimalInfeasible {
            return Err(Error::Infeasible {
                empty_steps: cands.empty_steps(),
            });
        }
        if sol.status == SolveStatus::MaxIterations {
            log::warn!(
                "iteration {r}: solver hit the iteration limit (primal {:.2e}, dual {:.2e})",
                sol.primal_residual,
                sol.dual_residual
            );
        }
        let alpha = qp.split_alpha(&sol.x);
        let stalled = sol.status == SolveStatus::MaxIterations && result.is_some();
        let min_leg = cands
            .iter()
            .map(|c| c.distance)
            .fold(f64::INFINITY, f64::min);
        let threshold = config.zero_threshold(min_leg);
        let max_card = alpha
            .iter()
            .map(|a| a.iter().filter(|&&v| v > threshold).count())
            .max()
            .unwrap_or(0);
        stats.push(IterationStats {
            candidates: cands.total(),
            max_cardinality: max_card,
            solver_iterations,
            solve_time,
            status: sol.status,
            warm_started: warm.is_some(),
            relaxed_cardinality: relaxed,
        });
        log::debug!("iteration {r}: max cardinality {max_card}, {} solver iterations", sol.iterations);
        if stalled {
            log::warn!("iteration {r}: keeping the previous solution");
            r -= 1;
            break;
        }

        let fixed_point = result
            .as_ref()
            .is_some_and(|(old_c, old_a, _, _)| same_alpha(old_c, old_a, &cands, &alpha));
        let positions = qp.positions(&sol.x);
        let next_prev: PrevAlpha = qp
            .layout
            .alpha_keys
            .iter()
            .zip(qp.alpha_values(&sol.x))
            .map(|(&key, v)| (key, v.max(0.0)))
            .collect();
        result = Some((cands, alpha, s_tilde.clone(), threshold));
        last = Some((qp, sol.x));
        if max_card <= MAX_CONTACTS {
            converged = true;
            break;
        }
        if r >= config.n_rw || fixed_point {
            break;
        }
        prev = Some(next_prev);
        s_tilde = positions
            .iter()
            .zip(&path.s_star)
            .map(|(s, t)| {
                Vec3::new(
                    s.x.clamp(t.x - config.tol, t.x + config.tol),
                    s.y.clamp(t.y - config.tol, t.y + config.tol),
                    s.z.clamp(t.z - config.tol, t.z + config.tol),
                )
            })
            .collect();
        r += 1;
    }

    let (cands, alpha, s_tilde, threshold) = result.expect("at least one solve");
    let contacts: Vec<Vec<ContactForce>> = cands
        .steps
        .iter()
        .zip(&alpha)
        .map(|(step, a)| {
            step.iter()
                .zip(a)
                .map(|(c, &ai)| {
                    let ai = ai.max(0.0);
                    ContactForce {
                        surface_id: c.surface_id,
                        alpha: ai,
                        leg_dir: c.leg_dir,
                        accel: c.leg_dir * ai,
                    }
                })
                .collect()
        })
        .collect();
    let active_contacts: Vec<Vec<ContactForce>> = contacts
        .iter()
        .map(|step| step.iter().filter(|c| c.alpha > threshold).cloned().collect())
        .collect();
    let p = build_p(config.n, config.dt)?;
    let acc = total_accel(&cands, &alpha);
    let com = integrate(&p, &acc, config.gravity, path.s0, path.v0)?;
    let com_vel = finite_difference_velocity(path.s0, &com, config.dt);

    let mut plan = Plan {
        n: config.n,
        dt: config.dt,
        path: path.clone(),
        contacts,
        active_contacts,
        active_threshold: threshold,
        com,
        com_vel,
        s_tilde,
        phases: Vec::new(),
        iterations_used: r,
        converged,
        iterations: stats,
        total_time: 0.0,
    };
    if converged {
        match assign_phases(&plan, env) {
            Ok(phases) => plan.phases = phases,
            Err(e) => log::warn!("phase assignment failed: {e}"),
        }
    }
    plan.total_time = start.elapsed().as_secs_f64();
    Ok(plan)
}

fn same_alpha(ca: &CandidateSet, aa: &[Vec<f64>], cb: &CandidateSet, ab: &[Vec<f64>]) -> bool {
    ca.steps.iter().zip(&cb.steps).zip(aa.iter().zip(ab)).all(|((sa, sb), (xa, xb))| {
        sa.len() == sb.len()
            && sa.iter().zip(sb).all(|(a, b)| a.surface_id == b.surface_id)
            && xa.iter().zip(xb).all(|(a, b)| (a - b).abs() <= 1e-9)
    })
}

/// Carries the previous iterate over to a QP with a different candidate set:
/// scale factors by (time, surface), positions by index.
fn map_warm_start(old: &AssembledQp, x: &[f64], new: &AssembledQp) -> WarmStart {
    let lookup: PrevAlpha = old
        .layout
        .alpha_keys
        .iter()
        .zip(old.alpha_values(x))
        .map(|(&k, v)| (k, v))
        .collect();
    let mut xw = vec![0.0; new.layout.num_vars()];
    for (j, key) in new.layout.alpha_keys.iter().enumerate() {
        xw[j] = lookup.get(key).copied().unwrap_or(0.0) / new.layout.alpha_scale[j];
    }
    for i in 0..new.layout.n {
        for axis in 0..3 {
            xw[new.layout.s(i, axis)] = x[old.layout.s(i, axis)];
        }
    }
    WarmStart { x: xw, y: None }
}

impl AssembledQp {
    /// The same QP without its cardinality rows.
    pub fn without_cardinality_rows(&self) -> AssembledQp {
        let keep = self.rows.cardinality;
        let mut t = crate::sparse::TripletBuilder::new(keep, self.problem.num_vars());
        for j in 0..self.problem.a.ncols {
            for (i, v) in self.problem.a.col(j) {
                if i < keep {
                    t.push(i, j, v);
                }
            }
        }
        let mut out = self.clone();
        out.problem.a = t.to_csc();
        out.problem.l.truncate(keep);
        out.problem.u.truncate(keep);
        out.rows.cardinality_steps.clear();
        out.rows.total = keep;
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    Cardinality,
    Friction,
    MaxAcceleration,
    PathDeviation,
    Kinematics,
    UnknownSurface,
    Dimension,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub step: usize,
    pub surface_id: Option<usize>,
    /// Amount by which the constraint is exceeded, in its own units.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub max_cardinality: usize,
    /// Largest `tangential - mu * normal` over active contacts (≤ 0 is inside the cone).
    pub max_friction_excess: f64,
    pub max_accel: f64,
    pub max_path_deviation: f64,
    pub max_kinematic_residual: f64,
    /// Largest angle between an applied force and the leg to the solved CoM, radians.
    pub max_linearization_angle: f64,
    /// `atan(tol·√3 / shortest active leg)`, radians.
    pub linearization_bound: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Slack on the hard limits for solver round-off.
pub const VALIDATION_SLACK: f64 = 1e-6;

/// Checks a plan against the unrelaxed contact model. Never fails; problems
/// are listed in the report.
pub fn validate(plan: &Plan, env: &Environment, config: &PlannerConfig) -> ValidationReport {
    let mut report = ValidationReport {
        violations: Vec::new(),
        max_cardinality: 0,
        max_friction_excess: f64::NEG_INFINITY,
        max_accel: 0.0,
        max_path_deviation: 0.0,
        max_kinematic_residual: 0.0,
        max_linearization_angle: 0.0,
        linearization_bound: 0.0,
    };
    let n = plan.n;
    let dims_ok = plan.contacts.len() == n
        && plan.active_contacts.len() == n
        && plan.com.len() == n
        && plan.path.s_star.len() == n
        && n == config.n
        && (plan.dt - config.dt).abs() <= 1e-12 * config.dt;
    if !dims_ok {
        report.violations.push(Violation {
            kind: ViolationKind::Dimension,
            step: 0,
            surface_id: None,
            magnitude: (plan.com.len() as f64 - config.n as f64).abs(),
        });
        return report;
    }
    let slack = VALIDATION_SLACK;
    let mut min_leg = f64::INFINITY;
    for (i, step) in plan.active_contacts.iter().enumerate() {
        report.max_cardinality = report.max_cardinality.max(step.len());
        if step.len() > MAX_CONTACTS {
            report.violations.push(Violation {
                kind: ViolationKind::Cardinality,
                step: i,
                surface_id: None,
                magnitude: (step.len() - MAX_CONTACTS) as f64,
            });
        }
        for c in step {
            let Some(surf) = env.surface(c.surface_id) else {
                report.violations.push(Violation {
                    kind: ViolationKind::UnknownSurface,
                    step: i,
                    surface_id: Some(c.surface_id),
                    magnitude: 1.0,
                });
                continue;
            };
            let mag = c.accel.norm();
            report.max_accel = report.max_accel.max(mag);
            if mag > config.a_max * (1.0 + slack) {
                report.violations.push(Violation {
                    kind: ViolationKind::MaxAcceleration,
                    step: i,
                    surface_id: Some(c.surface_id),
                    magnitude: mag - config.a_max,
                });
            }
            let excess = if mag > 0.0 {
                let (nc, t) = friction_components(&(c.accel / mag), &surf.normal);
                if nc <= 0.0 {
                    1.0 + t - nc
                } else {
                    t - surf.mu * nc
                }
            } else {
                0.0
            };
            report.max_friction_excess = report.max_friction_excess.max(excess);
            if excess > slack {
                report.violations.push(Violation {
                    kind: ViolationKind::Friction,
                    step: i,
                    surface_id: Some(c.surface_id),
                    magnitude: excess,
                });
            }
            let true_leg = plan.com[i] - surf.position;
            min_leg = min_leg.min(true_leg.norm());
            if mag > 0.0 && true_leg.norm() > 0.0 {
                let cos = (c.accel.dot(&true_leg) / (mag * true_leg.norm())).clamp(-1.0, 1.0);
                report.max_linearization_angle = report.max_linearization_angle.max(cos.acos());
            }
        }
    }
    if report.max_friction_excess == f64::NEG_INFINITY {
        report.max_friction_excess = 0.0;
    }
    if min_leg.is_finite() && min_leg > 0.0 {
        report.linearization_bound = (config.tol * 3f64.sqrt() / min_leg).atan();
    }

    for (i, (s, s_star)) in plan.com.iter().zip(&plan.path.s_star).enumerate() {
        let dev = (s - s_star).amax();
        report.max_path_deviation = report.max_path_deviation.max(dev);
        if dev > config.tol + slack {
            report.violations.push(Violation {
                kind: ViolationKind::PathDeviation,
                step: i,
                surface_id: None,
                magnitude: dev - config.tol,
            });
        }
    }

    if let Ok(p) = build_p(n, plan.dt) {
        if let Ok(expected) = integrate(&p, &plan.total_accel(), config.gravity, plan.path.s0, plan.path.v0) {
            for (i, (e, s)) in expected.iter().zip(&plan.com).enumerate() {
                let res = (e - s).norm();
                report.max_kinematic_residual = report.max_kinematic_residual.max(res);
                if res > slack {
                    report.violations.push(Violation {
                        kind: ViolationKind::Kinematics,
                        step: i,
                        surface_id: None,
                        magnitude: res,
                    });
                }
            }
        }
    }
    report
}
