use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::config::Weights;
use crate::env::{select_candidates, Environment, Surface};
use crate::kinematics::{build_p, integrate};
use crate::solver::ldl::LdlFactor;
use crate::solver::{AdmmSolver, QpSolver, SolveStatus};
use crate::sparse::CscMatrix;

fn flat_patch(n_side: usize, spacing: f64) -> Environment {
    let mut surfaces = Vec::new();
    for a in 0..n_side {
        for b in 0..n_side {
            let id = surfaces.len();
            surfaces.push(Surface {
                id,
                position: Vec3::new(
                    (a as f64 - (n_side - 1) as f64 / 2.0) * spacing,
                    (b as f64 - (n_side - 1) as f64 / 2.0) * spacing,
                    0.0,
                ),
                normal: Vec3::z(),
                mu: 0.7,
                cost: 1.0 + 0.1 * ((id * 7) % 5) as f64,
            });
        }
    }
    Environment::new(surfaces).unwrap()
}

fn only_path_weight() -> Weights {
    Weights {
        w0: 0.0,
        w1: 0.0,
        w2: 1.0,
        w: 0.0,
        w3: 0.0,
        w4: 0.0,
    }
}

fn single_vertical(n: usize, tol: f64) -> (CandidateSet, DesiredPath, PlannerConfig) {
    let env = Environment::new(vec![Surface {
        id: 0,
        position: Vec3::zeros(),
        normal: Vec3::z(),
        mu: 0.5,
        cost: 1.0,
    }])
    .unwrap();
    let s0 = Vec3::new(0.0, 0.0, 1.0);
    let path = DesiredPath::straight(s0, Vec3::zeros(), n, 0.15);
    let cfg = PlannerConfig {
        n,
        tol,
        weights: only_path_weight(),
        ..Default::default()
    };
    let cands = select_candidates(&env, &path.s_star, cfg.k, cfg.radius).unwrap();
    (cands, path, cfg)
}

#[test]
fn hover_balances_gravity() {
    let (cands, path, cfg) = single_vertical(1, 0.1);
    let qp = assemble(&cands, &path, &cfg, None).unwrap();
    let sol = AdmmSolver::default().solve(&qp.problem, None).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let alpha = qp.split_alpha(&sol.x);
    assert!((alpha[0][0] - 9.81).abs() < 1e-4, "alpha = {}", alpha[0][0]);
}

#[test]
fn unreachable_path_is_infeasible() {
    let (cands, mut path, cfg) = single_vertical(3, 0.01);
    path.s_star[0].x = 5.0;
    let qp = assemble(&cands, &path, &cfg, None).unwrap();
    let sol = AdmmSolver::default().solve(&qp.problem, None).unwrap();
    assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
}

#[test]
fn constraint_counts() {
    let env = flat_patch(5, 0.2);
    let n = 4;
    let path = DesiredPath::straight(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.1, 0.0, 0.0), n, 0.15);
    let cfg = PlannerConfig {
        n,
        k: 6,
        ..Default::default()
    };
    let cands = select_candidates(&env, &path.s_star, cfg.k, cfg.radius).unwrap();
    let qp = assemble(&cands, &path, &cfg, None).unwrap();
    let na = cands.total();
    assert_eq!(na, 4 * 6);
    assert_eq!(qp.problem.num_vars(), na + 3 * n);
    assert_eq!(qp.rows.path_box - qp.rows.kinematics, 3 * n);
    assert_eq!(qp.rows.alpha_bounds - qp.rows.path_box, 3 * n);
    assert_eq!(qp.rows.cardinality - qp.rows.alpha_bounds, na);
    assert_eq!(qp.rows.total, qp.rows.cardinality);
    // every path row is two-sided, so the block holds 6N inequalities
    let two_sided = (qp.rows.path_box..qp.rows.alpha_bounds)
        .filter(|&r| qp.problem.l[r].is_finite() && qp.problem.u[r].is_finite() && qp.problem.l[r] < qp.problem.u[r])
        .count();
    assert_eq!(2 * two_sided, 6 * n);
    for r in qp.rows.kinematics..qp.rows.path_box {
        assert_eq!(qp.problem.l[r], qp.problem.u[r]);
    }
    for r in qp.rows.alpha_bounds..qp.rows.cardinality {
        assert_eq!(qp.problem.l[r], 0.0);
    }

    let prev = PrevAlpha::new();
    let qp = assemble(&cands, &path, &cfg, Some(&prev)).unwrap();
    assert_eq!(qp.rows.total - qp.rows.cardinality, n);
}

#[test]
fn cost_scaling_is_consistent() {
    let env = flat_patch(4, 0.25);
    let n = 3;
    let path = DesiredPath::straight(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.2, 0.0, 0.0), n, 0.15);
    let cfg = PlannerConfig {
        n,
        k: 5,
        ..Default::default()
    };
    let cands = select_candidates(&env, &path.s_star, cfg.k, cfg.radius).unwrap();
    let mut doubled = cands.clone();
    for c in doubled.steps.iter_mut().flatten() {
        c.cost *= 2.0;
    }
    let mut cfg2 = cfg.clone();
    cfg2.weights.w0 *= 0.5;
    let a = assemble(&cands, &path, &cfg, None).unwrap();
    let b = assemble(&doubled, &path, &cfg2, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let x: Vec<f64> = (0..a.problem.num_vars()).map(|_| rng.random::<f64>()).collect();
        let (fa, fb) = (a.problem.objective(&x), b.problem.objective(&x));
        assert!((fa - fb).abs() <= 1e-12 * fa.abs().max(1.0));
    }
}

#[test]
fn jerk_term_matches_direct_evaluation() {
    let env = flat_patch(5, 0.2);
    let n = 5;
    let dt = 0.15;
    let path = DesiredPath::straight(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.3, 0.0, 0.0), n, dt);
    let cfg = PlannerConfig {
        n,
        dt,
        k: 4,
        weights: Weights {
            w0: 0.0,
            w1: 0.0,
            w2: 0.0,
            w: 0.0,
            w3: 0.7,
            w4: 0.0,
        },
        ..Default::default()
    };
    let cands = select_candidates(&env, &path.s_star, cfg.k, cfg.radius).unwrap();
    let qp = assemble(&cands, &path, &cfg, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let x: Vec<f64> = (0..qp.problem.num_vars()).map(|_| 10.0 * rng.random::<f64>()).collect();
        let acc = total_accel(&cands, &qp.split_alpha(&x));
        let direct: f64 = acc
            .windows(2)
            .map(|w| ((w[1] - w[0]) / dt).norm_squared())
            .sum::<f64>()
            * cfg.weights.w3;
        let assembled = qp.problem.objective(&x);
        assert!((direct - assembled).abs() <= 1e-9 * direct.max(1.0), "{direct} vs {assembled}");
    }
}

#[test]
fn temporal_consistency_decays_to_zero() {
    // one surface reachable at step 0 only
    let env = Environment::new(vec![Surface {
        id: 0,
        position: Vec3::zeros(),
        normal: Vec3::z(),
        mu: 0.7,
        cost: 1.0,
    }])
    .unwrap();
    let path = DesiredPath {
        s0: Vec3::new(0.0, 0.0, 1.0),
        v0: Vec3::zeros(),
        s_star: vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(3.0, 0.0, 1.0)],
        v_star: vec![Vec3::zeros(); 2],
    };
    let cfg = PlannerConfig {
        n: 2,
        weights: Weights {
            w0: 0.0,
            w1: 0.3,
            w2: 0.0,
            w: 0.0,
            w3: 0.0,
            w4: 0.0,
        },
        ..Default::default()
    };
    let cands = select_candidates(&env, &path.s_star, cfg.k, cfg.radius).unwrap();
    assert_eq!(cands.steps[1].len(), 0);
    let qp = assemble(&cands, &path, &cfg, None).unwrap();
    let mut x = vec![0.0; qp.problem.num_vars()];
    x[0] = 2.0;
    let expected = 0.3 * 4.0 / (cfg.dt * cfg.dt);
    assert!((qp.problem.objective(&x) - expected).abs() < 1e-9);
}

#[test]
fn kinematic_rows_agree_with_integration() {
    let env = flat_patch(5, 0.2);
    let n = 6;
    let mut path = DesiredPath::straight(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.3, 0.0, 0.0), n, 0.15);
    path.v0 = Vec3::new(0.3, -0.1, 0.05);
    let cfg = PlannerConfig {
        n,
        k: 5,
        ..Default::default()
    };
    let cands = select_candidates(&env, &path.s_star, cfg.k, cfg.radius).unwrap();
    let qp = assemble(&cands, &path, &cfg, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut x: Vec<f64> = (0..qp.problem.num_vars()).map(|_| 5.0 * rng.random::<f64>()).collect();
    let acc = total_accel(&cands, &qp.split_alpha(&x));
    let s = integrate(&build_p(n, cfg.dt).unwrap(), &acc, cfg.gravity, path.s0, path.v0).unwrap();
    for (i, si) in s.iter().enumerate() {
        for axis in 0..3 {
            x[qp.layout.s(i, axis)] = si[axis];
        }
    }
    let mut ax = vec![0.0; qp.problem.num_constraints()];
    qp.problem.a.mul_vec(&x, &mut ax);
    for r in qp.rows.kinematics..qp.rows.path_box {
        assert!((ax[r] - qp.problem.l[r]).abs() < 1e-12, "row {r}: {} vs {}", ax[r], qp.problem.l[r]);
    }
}

#[test]
fn quadratic_term_is_psd() {
    let env = flat_patch(6, 0.15);
    let n = 8;
    let path = DesiredPath::straight(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.1, 0.05, 0.0), n, 0.15);
    let cfg = PlannerConfig {
        n,
        k: 8,
        ..Default::default()
    };
    let cands = select_candidates(&env, &path.s_star, cfg.k, cfg.radius).unwrap();
    let qp = assemble(&cands, &path, &cfg, None).unwrap();
    let nv = qp.problem.num_vars();
    let mut shifted = qp.problem.p.clone();
    let eye = CscMatrix::identity(nv);
    let mut t = crate::sparse::TripletBuilder::new(nv, nv);
    for j in 0..nv {
        for (i, v) in shifted.col(j) {
            t.push(i, j, v);
        }
        for (i, v) in eye.col(j) {
            t.push(i, j, 1e-8 * v);
        }
    }
    shifted = t.to_csc();
    let f = LdlFactor::new(&shifted).unwrap();
    assert_eq!(f.negative_pivots(), 0);
}

#[test]
fn rejects_mismatched_inputs() {
    let (cands, path, mut cfg) = single_vertical(2, 0.1);
    cfg.n = 3;
    assert!(matches!(assemble(&cands, &path, &cfg, None), Err(Error::DimensionMismatch(_))));
    let empty = CandidateSet {
        steps: vec![Vec::new(); 2],
    };
    cfg.n = 2;
    assert!(matches!(assemble(&empty, &path, &cfg, None), Err(Error::NoCandidates)));
}

