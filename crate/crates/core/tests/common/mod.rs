#![allow(dead_code)]

use footstep_core::sparse::CscMatrix;
use footstep_core::{Environment, QpProblem, Surface, Vec3};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Piecewise-constant acceleration stepped exactly; position after each step.
pub fn simulate(accel: &[Vec3], gravity: Vec3, s0: Vec3, v0: Vec3, dt: f64) -> Vec<Vec3> {
    let (mut s, mut v) = (s0, v0);
    accel
        .iter()
        .map(|a| {
            let net = a + gravity;
            s += v * dt + net * (0.5 * dt * dt);
            v += net * dt;
            s
        })
        .collect()
}

pub fn random_environment(rng: &mut ChaCha8Rng, m: usize) -> Environment {
    let surfaces = (0..m)
        .map(|id| {
            let tilt = Vec3::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), 1.0);
            Surface {
                id,
                position: Vec3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-0.5..0.5),
                ),
                normal: tilt.normalize(),
                mu: rng.random_range(0.2..1.2),
                // a few exact ties exercise the cost tie-break
                cost: (rng.random_range(1..4) as f64) * 0.5,
            }
        })
        .collect();
    Environment::new(surfaces).unwrap()
}

/// Angle between the push direction and the surface normal against the
/// cone half-angle, without the decomposition used by the planner.
pub fn brute_force_friction_ok(leg: &Vec3, normal: &Vec3, mu: f64) -> bool {
    let cos = leg.dot(normal) / (leg.norm() * normal.norm());
    cos > 0.0 && cos.clamp(-1.0, 1.0).acos() <= mu.atan()
}

/// Feasible random QP with a positive definite quadratic term. Some rows are
/// one-sided and some are equalities.
pub fn random_qp(seed: u64, n: usize, m: usize) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let p = g.transpose() * &g / n as f64 + DMatrix::identity(n, n);
    let a = DMatrix::from_fn(m, n, |_, _| {
        if rng.random_bool(0.3) {
            rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    });
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let ax0 = &a * &x0;
    let mut l = vec![0.0; m];
    let mut u = vec![0.0; m];
    for i in 0..m {
        let (lo, hi) = (rng.random_range(0.0..0.5), rng.random_range(0.0..0.5));
        match rng.random_range(0..10) {
            0 => (l[i], u[i]) = (ax0[i], ax0[i]),
            1 | 2 => (l[i], u[i]) = (f64::NEG_INFINITY, ax0[i] + hi),
            3 | 4 => (l[i], u[i]) = (ax0[i] - lo, f64::INFINITY),
            _ => (l[i], u[i]) = (ax0[i] - lo, ax0[i] + hi),
        }
    }
    // pull the unconstrained optimum well outside the feasible set
    let q: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let upper: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if j >= i { p[(i, j)] } else { 0.0 }).collect())
        .collect();
    let dense_a: Vec<Vec<f64>> = (0..m).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect();
    QpProblem {
        p: CscMatrix::from_dense(&upper),
        q,
        a: CscMatrix::from_dense(&dense_a),
        l,
        u,
        constant: 0.0,
    }
}

fn dense(m: &CscMatrix) -> DMatrix<f64> {
    let d = m.to_dense();
    DMatrix::from_fn(m.nrows, m.ncols, |i, j| d[i][j])
}

/// Optimal value by accelerated projected gradient ascent on the dual, where
/// the projection is onto the nonnegative orthant.
pub fn dual_projected_gradient(qp: &QpProblem, iterations: usize) -> f64 {
    let upper = dense(&qp.p);
    let p = &upper + upper.transpose() - DMatrix::from_diagonal(&upper.diagonal());
    let a = dense(&qp.a);
    let q = DVector::from_column_slice(&qp.q);
    let p_inv = p.clone().try_inverse().expect("positive definite");
    let h = &a * &p_inv * a.transpose();
    let c = &a * &p_inv * &q;
    let step = 1.0 / (2.0 * h.norm());
    let m = qp.l.len();
    let project = |v: &mut DVector<f64>, bounds: &[f64]| {
        for i in 0..m {
            v[i] = if bounds[i].is_finite() { v[i].max(0.0) } else { 0.0 };
        }
    };
    // multipliers of A x ≤ u and of l ≤ A x
    let mut yu = DVector::zeros(m);
    let mut yl = DVector::zeros(m);
    let (mut zu, mut zl) = (yu.clone(), yl.clone());
    let mut t = 1.0_f64;
    for _ in 0..iterations {
        let lam = &zu - &zl;
        let ax = -(&c + &h * &lam);
        let mut nu = &zu + step * (&ax - DVector::from_iterator(m, qp.u.iter().map(|v| v.min(1e300))));
        let mut nl = &zl + step * (DVector::from_iterator(m, qp.l.iter().map(|v| v.max(-1e300))) - &ax);
        project(&mut nu, &qp.u);
        project(&mut nl, &qp.l);
        // gradient restart: drop momentum when it points uphill
        let uphill = (&zu - &nu).dot(&(&nu - &yu)) + (&zl - &nl).dot(&(&nl - &yl)) > 0.0;
        if uphill {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        zu = &nu + beta * (&nu - &yu);
        zl = &nl + beta * (&nl - &yl);
        yu = nu;
        yl = nl;
        t = t_next;
    }
    let lam = &yu - &yl;
    let w = &q + a.transpose() * &lam;
    let bound = |y: &DVector<f64>, b: &[f64]| -> f64 {
        (0..m).filter(|&i| y[i] != 0.0).map(|i| y[i] * b[i]).sum()
    };
    -0.5 * w.dot(&(&p_inv * &w)) - bound(&yu, &qp.u) + bound(&yl, &qp.l) + qp.constant
}
