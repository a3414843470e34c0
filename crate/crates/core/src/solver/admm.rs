// Operator-splitting (ADMM) QP solver: Ruiz equilibration, over-relaxation,
// adaptive penalty, infeasibility certificates and active-set polishing.

use std::time::Instant;

use super::ldl::LdlFactor;
use super::{QpProblem, QpSolution, QpSolver, SolveStatus, SolverSettings, WarmStart};
use crate::sparse::{inf_norm, CscMatrix, TripletBuilder};
use crate::Error;

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_SCALE: f64 = 1e3;
const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;
const POLISH_DELTA: f64 = 1e-7;
const POLISH_REFINE_ITERS: usize = 4;
const POLISH_CORRECTIONS: usize = 3;
/// Iterations between failed early polish attempts, doubled after each.
const POLISH_BACKOFF: usize = 50;

#[derive(Debug, Clone, Default)]
pub struct AdmmSolver {
    pub settings: SolverSettings,
}

impl AdmmSolver {
    pub fn new(settings: SolverSettings) -> Self {
        Self { settings }
    }
}

impl QpSolver for AdmmSolver {
    fn solve(&self, problem: &QpProblem, warm_start: Option<&WarmStart>) -> Result<QpSolution, Error> {
        problem.check_dimensions()?;
        if let Some(ws) = warm_start {
            if ws.x.len() != problem.num_vars()
                || ws.y.as_ref().is_some_and(|y| y.len() != problem.num_constraints())
            {
                return Err(Error::DimensionMismatch("warm start has the wrong length".into()));
            }
        }
        let start = Instant::now();
        let mut work = Workspace::new(problem, &self.settings)?;
        let mut sol = work.run(warm_start)?;
        sol.solve_time = start.elapsed().as_secs_f64();
        Ok(sol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RowKind {
    Equality,
    Inequality,
    Free,
}

struct Scaling {
    /// variable scaling, x = D x̄
    d: Vec<f64>,
    d_inv: Vec<f64>,
    /// constraint scaling, z̄ = E z
    e: Vec<f64>,
    e_inv: Vec<f64>,
    /// cost scaling
    c: f64,
}

struct Workspace<'a> {
    settings: SolverSettings,
    original: &'a QpProblem,
    n: usize,
    m: usize,
    p: CscMatrix,
    q: Vec<f64>,
    a: CscMatrix,
    l: Vec<f64>,
    u: Vec<f64>,
    scaling: Scaling,
    kinds: Vec<RowKind>,
    rho: f64,
    rho_vec: Vec<f64>,
    factor: LdlFactor,
}

struct Residuals {
    prim: f64,
    dual: f64,
    eps_prim: f64,
    eps_dual: f64,
    // scaled-space quantities for adaptive rho
    prim_ratio: f64,
    dual_ratio: f64,
}

impl<'a> Workspace<'a> {
    fn new(problem: &'a QpProblem, settings: &SolverSettings) -> Result<Self, Error> {
        let n = problem.num_vars();
        let m = problem.num_constraints();
        let mut p = problem.p.clone();
        let mut q = problem.q.clone();
        let mut a = problem.a.clone();
        let scaling = equilibrate(&mut p, &mut q, &mut a, settings.scaling_iters);
        let l: Vec<f64> = problem.l.iter().zip(&scaling.e).map(|(v, e)| v * e).collect();
        let u: Vec<f64> = problem.u.iter().zip(&scaling.e).map(|(v, e)| v * e).collect();
        let kinds: Vec<RowKind> = l
            .iter()
            .zip(&u)
            .map(|(&lo, &hi)| {
                if lo.is_infinite() && hi.is_infinite() {
                    RowKind::Free
                } else if (hi - lo).abs() < 1e-12 * (1.0 + lo.abs()) {
                    RowKind::Equality
                } else {
                    RowKind::Inequality
                }
            })
            .collect();
        let rho = settings.rho.clamp(RHO_MIN, RHO_MAX);
        let rho_vec = rho_vector(&kinds, rho);
        let kkt = kkt_upper(&p, &a, settings.sigma, &rho_vec);
        let factor = LdlFactor::new(&kkt).map_err(|e| Error::Factorization(e.0))?;
        Ok(Self {
            settings: *settings,
            original: problem,
            n,
            m,
            p,
            q,
            a,
            l,
            u,
            scaling,
            kinds,
            rho,
            rho_vec,
            factor,
        })
    }

    fn project(&self, v: &mut [f64]) {
        for ((vi, &lo), &hi) in v.iter_mut().zip(&self.l).zip(&self.u) {
            *vi = vi.clamp(lo, hi);
        }
    }

    fn run(&mut self, warm_start: Option<&WarmStart>) -> Result<QpSolution, Error> {
        let (n, m) = (self.n, self.m);
        let sigma = self.settings.sigma;
        let relax = self.settings.relaxation;
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; m];
        let mut z = vec![0.0; m];
        if let Some(ws) = warm_start {
            for i in 0..n {
                x[i] = ws.x[i] * self.scaling.d_inv[i];
            }
            self.a.mul_vec(&x, &mut z);
            self.project(&mut z);
            if let Some(yw) = &ws.y {
                for i in 0..m {
                    y[i] = yw[i] * self.scaling.e_inv[i] * self.scaling.c;
                }
            }
        }
        let mut rhs = vec![0.0; n + m];
        let mut x_prev = x.clone();
        let mut y_prev = y.clone();
        let mut z_tilde = vec![0.0; m];
        let mut status = SolveStatus::MaxIterations;
        let mut iter = 0;
        let max_iter = self.settings.max_iter.max(1);
        let mut last_res = None;
        let mut prev_active: Option<Vec<i8>> = None;
        let mut tried_active: Option<Vec<i8>> = None;
        let mut next_polish = 0;
        let mut polish_gap = POLISH_BACKOFF;
        let mut early: Option<(Vec<f64>, Vec<f64>, f64, f64)> = None;
        while iter < max_iter {
            iter += 1;
            x_prev.copy_from_slice(&x);
            y_prev.copy_from_slice(&y);
            for i in 0..n {
                rhs[i] = sigma * x[i] - self.q[i];
            }
            for i in 0..m {
                rhs[n + i] = z[i] - y[i] / self.rho_vec[i];
            }
            self.factor.solve(&mut rhs);
            // rhs[..n] = x̃, rhs[n..] = ν ; z̃ = z + (ν - y)/ρ
            for i in 0..m {
                z_tilde[i] = z[i] + (rhs[n + i] - y[i]) / self.rho_vec[i];
            }
            for i in 0..n {
                x[i] = relax * rhs[i] + (1.0 - relax) * x_prev[i];
            }
            for i in 0..m {
                let zr = relax * z_tilde[i] + (1.0 - relax) * z[i];
                let z_new = (zr + y[i] / self.rho_vec[i]).clamp(self.l[i], self.u[i]);
                y[i] += self.rho_vec[i] * (zr - z_new);
                z[i] = z_new;
            }

            let check = iter % self.settings.check_interval.max(1) == 0 || iter == max_iter;
            let adapt = self.settings.adaptive_rho
                && iter % self.settings.adaptive_rho_interval.max(1) == 0;
            if !(check || adapt) {
                continue;
            }
            let res = self.residuals(&x, &y, &z);
            if check {
                if res.prim <= res.eps_prim && res.dual <= res.eps_dual {
                    status = SolveStatus::Optimal;
                    last_res = Some(res);
                    break;
                }
                if self.primal_infeasible(&y, &y_prev) {
                    status = SolveStatus::PrimalInfeasible;
                    last_res = Some(res);
                    break;
                }
                // once the active set settles, try to finish with an exact solve on it
                if self.settings.polish {
                    let active = self.active_set(&y, &z);
                    if iter >= next_polish
                        && prev_active.as_ref() == Some(&active)
                        && tried_active.as_ref() != Some(&active)
                    {
                        if let Some(p) = self.polish(&active) {
                            if p.2 <= res.eps_prim && p.3 <= res.eps_dual {
                                status = SolveStatus::Optimal;
                                early = Some(p);
                                last_res = Some(res);
                                break;
                            }
                        }
                        tried_active = Some(active.clone());
                        next_polish = iter + polish_gap;
                        polish_gap *= 2;
                    }
                    prev_active = Some(active);
                }
            }
            if adapt {
                self.adapt_rho(&res)?;
            }
            last_res = Some(res);
        }
        let res = last_res.unwrap_or_else(|| self.residuals(&x, &y, &z));
        let mut polished = false;
        let (mut prim, mut dual) = (res.prim, res.dual);
        if let Some((xp, yp, pr, du)) = early {
            x = xp;
            y = yp;
            prim = pr;
            dual = du;
            polished = true;
        } else if status != SolveStatus::PrimalInfeasible && self.settings.polish {
            if let Some((xp, yp, pr, du)) = self.polish(&self.active_set(&y, &z)) {
                let within = pr <= res.eps_prim && du <= res.eps_dual;
                if within || (status == SolveStatus::Optimal && pr <= prim.max(res.eps_prim) && du <= dual.max(res.eps_dual)) {
                    if within {
                        status = SolveStatus::Optimal;
                    }
                    x = xp;
                    y = yp;
                    prim = pr;
                    dual = du;
                    polished = true;
                }
            }
        }
        let x_out: Vec<f64> = x.iter().zip(&self.scaling.d).map(|(v, d)| v * d).collect();
        let y_out: Vec<f64> = y
            .iter()
            .zip(&self.scaling.e)
            .map(|(v, e)| v * e / self.scaling.c)
            .collect();
        let objective = self.original.objective(&x_out);
        Ok(QpSolution {
            x: x_out,
            y: y_out,
            status,
            iterations: iter,
            primal_residual: prim,
            dual_residual: dual,
            objective,
            polished,
            solve_time: 0.0,
        })
    }

    fn residuals(&self, x: &[f64], y: &[f64], z: &[f64]) -> Residuals {
        let (n, m) = (self.n, self.m);
        let s = &self.scaling;
        let mut ax = vec![0.0; m];
        self.a.mul_vec(x, &mut ax);
        let mut px = vec![0.0; n];
        self.p.sym_upper_mul_vec(x, &mut px);
        let mut aty = vec![0.0; n];
        self.a.mul_t_vec(y, &mut aty);

        let mut prim = 0.0_f64;
        let mut ax_n = 0.0_f64;
        let mut z_n = 0.0_f64;
        let mut prim_s = 0.0_f64;
        let mut ax_s = 0.0_f64;
        let mut z_s = 0.0_f64;
        for i in 0..m {
            prim = prim.max(((ax[i] - z[i]) * s.e_inv[i]).abs());
            ax_n = ax_n.max((ax[i] * s.e_inv[i]).abs());
            z_n = z_n.max((z[i] * s.e_inv[i]).abs());
            prim_s = prim_s.max((ax[i] - z[i]).abs());
            ax_s = ax_s.max(ax[i].abs());
            z_s = z_s.max(z[i].abs());
        }
        let cinv = 1.0 / s.c;
        let mut dual = 0.0_f64;
        let mut px_n = 0.0_f64;
        let mut aty_n = 0.0_f64;
        let mut q_n = 0.0_f64;
        let mut dual_s = 0.0_f64;
        let mut px_s = 0.0_f64;
        let mut aty_s = 0.0_f64;
        let mut q_s = 0.0_f64;
        for i in 0..n {
            let r = px[i] + self.q[i] + aty[i];
            dual = dual.max((r * s.d_inv[i] * cinv).abs());
            px_n = px_n.max((px[i] * s.d_inv[i] * cinv).abs());
            aty_n = aty_n.max((aty[i] * s.d_inv[i] * cinv).abs());
            q_n = q_n.max((self.q[i] * s.d_inv[i] * cinv).abs());
            dual_s = dual_s.max(r.abs());
            px_s = px_s.max(px[i].abs());
            aty_s = aty_s.max(aty[i].abs());
            q_s = q_s.max(self.q[i].abs());
        }
        let abs = self.settings.abs_tol;
        let rel = self.settings.rel_tol;
        Residuals {
            prim,
            dual,
            eps_prim: abs + rel * ax_n.max(z_n),
            eps_dual: abs + rel * px_n.max(aty_n).max(q_n),
            prim_ratio: prim_s / ax_s.max(z_s).max(1e-30),
            dual_ratio: dual_s / px_s.max(aty_s).max(q_s).max(1e-30),
        }
    }

    /// Certificate check on δy, projected onto the polar of the recession cone
    /// of [l, u] (components pushing against an infinite bound are dropped).
    fn primal_infeasible(&self, y: &[f64], y_prev: &[f64]) -> bool {
        let s = &self.scaling;
        let dy: Vec<f64> = y
            .iter()
            .zip(y_prev)
            .zip(self.l.iter().zip(&self.u))
            .map(|((a, b), (&lo, &hi))| {
                let d = a - b;
                if hi.is_infinite() && d > 0.0 || lo.is_infinite() && d < 0.0 {
                    0.0
                } else {
                    d
                }
            })
            .collect();
        let dy_norm = dy
            .iter()
            .zip(&s.e)
            .fold(0.0_f64, |acc, (v, e)| acc.max((v * e).abs()));
        if dy_norm < 1e-12 {
            return false;
        }
        let eps = self.settings.infeasibility_tol * dy_norm;
        let support: f64 = dy
            .iter()
            .zip(self.l.iter().zip(&self.u))
            .map(|(&d, (&lo, &hi))| match d {
                d if d > 0.0 => hi * d,
                d if d < 0.0 => lo * d,
                _ => 0.0,
            })
            .sum();
        if support >= -eps {
            return false;
        }
        let mut atdy = vec![0.0; self.n];
        self.a.mul_t_vec(&dy, &mut atdy);
        let atdy_norm = atdy
            .iter()
            .zip(&s.d_inv)
            .fold(0.0_f64, |acc, (v, d)| acc.max((v * d).abs()));
        atdy_norm <= eps
    }

    fn adapt_rho(&mut self, res: &Residuals) -> Result<(), Error> {
        let ratio = res.prim_ratio / res.dual_ratio.max(1e-30);
        let new_rho = (self.rho * ratio.sqrt()).clamp(RHO_MIN, RHO_MAX);
        if new_rho > 5.0 * self.rho || new_rho < 0.2 * self.rho {
            self.rho = new_rho;
            self.rho_vec = rho_vector(&self.kinds, self.rho);
            let kkt = kkt_upper(&self.p, &self.a, self.settings.sigma, &self.rho_vec);
            self.factor
                .refactor(&kkt)
                .map_err(|e| Error::Factorization(e.0))?;
        }
        Ok(())
    }

    /// Guessed active set: -1 at the lower bound, 1 at the upper, 0 inactive.
    /// Equality rows count as lower.
    fn active_set(&self, y: &[f64], z: &[f64]) -> Vec<i8> {
        (0..self.m)
            .map(|i| {
                if self.kinds[i] == RowKind::Equality || z[i] - self.l[i] < -y[i] {
                    -1
                } else if self.u[i] - z[i] < y[i] {
                    1
                } else {
                    0
                }
            })
            .collect()
    }

    /// Solves the equality-constrained QP on the guessed active set, then
    /// corrects the guess a few times: rows whose multiplier has the wrong
    /// sign are released and violated rows are added. Returns `None` if the
    /// set does not settle or the reduced system is singular.
    #[allow(clippy::type_complexity)]
    fn polish(&self, guess: &[i8]) -> Option<(Vec<f64>, Vec<f64>, f64, f64)> {
        let m = self.m;
        let mut set = guess.to_vec();
        for _ in 0..=POLISH_CORRECTIONS {
            let (xp, yp) = self.solve_reduced(&set)?;
            let mut ax = vec![0.0; m];
            self.a.mul_vec(&xp, &mut ax);
            let y_tol = 1e-9 * inf_norm(&yp).max(1.0);
            let mut changed = false;
            for i in 0..m {
                let next = match set[i] {
                    _ if self.kinds[i] == RowKind::Equality => -1,
                    -1 if yp[i] > y_tol => 0,
                    1 if yp[i] < -y_tol => 0,
                    0 if ax[i] < self.l[i] - 1e-9 * (1.0 + self.l[i].abs()) => -1,
                    0 if ax[i] > self.u[i] + 1e-9 * (1.0 + self.u[i].abs()) => 1,
                    side => side,
                };
                changed |= next != set[i];
                set[i] = next;
            }
            if !changed {
                let mut zp = ax;
                self.project(&mut zp);
                let res = self.residuals(&xp, &yp, &zp);
                return Some((xp, yp, res.prim, res.dual));
            }
        }
        None
    }

    /// KKT solve with the rows of `set` held at their bounds.
    fn solve_reduced(&self, set: &[i8]) -> Option<(Vec<f64>, Vec<f64>)> {
        let (n, m) = (self.n, self.m);
        let active: Vec<(usize, f64)> = set
            .iter()
            .enumerate()
            .filter_map(|(i, &side)| match side {
                -1 => Some((i, self.l[i])),
                1 => Some((i, self.u[i])),
                _ => None,
            })
            .collect();
        let k = active.len();
        let mut row_of = vec![usize::MAX; m];
        for (r, &(i, _)) in active.iter().enumerate() {
            row_of[i] = r;
        }
        let mut ared = TripletBuilder::new(k, n);
        for j in 0..n {
            for (i, v) in self.a.col(j) {
                if row_of[i] != usize::MAX {
                    ared.push(row_of[i], j, v);
                }
            }
        }
        let ared = ared.to_csc();
        let kkt = assemble_kkt(&self.p, &ared, POLISH_DELTA, &vec![POLISH_DELTA; k]);
        let factor = LdlFactor::new(&kkt).ok()?;
        let mut b = vec![0.0; n + k];
        for i in 0..n {
            b[i] = -self.q[i];
        }
        for (r, &(_, bound)) in active.iter().enumerate() {
            b[n + r] = bound;
        }
        let mut sol = b.clone();
        factor.solve(&mut sol);
        // iterative refinement against the unregularized system
        for _ in 0..POLISH_REFINE_ITERS {
            let mut resid = b.clone();
            let kx = kkt_mul(&self.p, &ared, &sol);
            for (r, v) in resid.iter_mut().zip(&kx) {
                *r -= v;
            }
            if inf_norm(&resid) < 1e-14 {
                break;
            }
            factor.solve(&mut resid);
            for (s, d) in sol.iter_mut().zip(&resid) {
                *s += d;
            }
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut yp = vec![0.0; m];
        for (r, &(i, _)) in active.iter().enumerate() {
            yp[i] = sol[n + r];
        }
        sol.truncate(n);
        Some((sol, yp))
    }
}

fn rho_vector(kinds: &[RowKind], rho: f64) -> Vec<f64> {
    kinds
        .iter()
        .map(|k| match k {
            RowKind::Equality => (RHO_EQ_SCALE * rho).min(RHO_MAX),
            RowKind::Inequality => rho,
            RowKind::Free => RHO_MIN,
        })
        .collect()
}

/// Upper triangle of `[P + σI, Aᵀ; A, -diag(1/ρ)]`.
fn kkt_upper(p: &CscMatrix, a: &CscMatrix, sigma: f64, rho: &[f64]) -> CscMatrix {
    let inv: Vec<f64> = rho.iter().map(|r| 1.0 / r).collect();
    assemble_kkt(p, a, sigma, &inv)
}

/// Upper triangle of `[P + σI, Aᵀ; A, -diag(d)]`.
fn assemble_kkt(p: &CscMatrix, a: &CscMatrix, sigma: f64, lower_diag: &[f64]) -> CscMatrix {
    let n = p.ncols;
    let m = a.nrows;
    let mut t = TripletBuilder::new(n + m, n + m);
    for j in 0..n {
        for (i, v) in p.col(j) {
            t.push(i, j, v);
        }
        t.push(j, j, sigma);
    }
    for j in 0..n {
        for (i, v) in a.col(j) {
            t.push(j, n + i, v);
        }
    }
    for (i, &d) in lower_diag.iter().enumerate() {
        t.push(n + i, n + i, -d);
    }
    t.to_csc()
}

/// `[P, Aᵀ; A, 0] v`
fn kkt_mul(p: &CscMatrix, a: &CscMatrix, v: &[f64]) -> Vec<f64> {
    let n = p.ncols;
    let m = a.nrows;
    let (vx, vy) = v.split_at(n);
    let mut out = vec![0.0; n + m];
    let mut px = vec![0.0; n];
    p.sym_upper_mul_vec(vx, &mut px);
    let mut aty = vec![0.0; n];
    a.mul_t_vec(vy, &mut aty);
    for i in 0..n {
        out[i] = px[i] + aty[i];
    }
    let mut ax = vec![0.0; m];
    a.mul_vec(vx, &mut ax);
    out[n..].copy_from_slice(&ax);
    out
}

/// Modified Ruiz equilibration of the KKT matrix plus cost scaling.
fn equilibrate(p: &mut CscMatrix, q: &mut [f64], a: &mut CscMatrix, iters: usize) -> Scaling {
    let n = q.len();
    let m = a.nrows;
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let mut c = 1.0;
    for _ in 0..iters {
        let p_norms = p.sym_upper_col_inf_norms();
        let a_col = a.col_inf_norms();
        let a_row = a.row_inf_norms();
        let dd: Vec<f64> = (0..n)
            .map(|j| {
                let nrm = p_norms[j].max(a_col[j]);
                if nrm < 1e-8 {
                    1.0
                } else {
                    (1.0 / nrm.sqrt()).clamp(SCALE_MIN, SCALE_MAX)
                }
            })
            .collect();
        let de: Vec<f64> = (0..m)
            .map(|i| {
                if a_row[i] < 1e-8 {
                    1.0
                } else {
                    (1.0 / a_row[i].sqrt()).clamp(SCALE_MIN, SCALE_MAX)
                }
            })
            .collect();
        p.scale_rows_cols(&dd, &dd);
        a.scale_rows_cols(&de, &dd);
        for j in 0..n {
            q[j] *= dd[j];
            d[j] *= dd[j];
        }
        for i in 0..m {
            e[i] *= de[i];
        }
        // cost scaling
        let p_norms = p.sym_upper_col_inf_norms();
        let mean = if n > 0 {
            p_norms.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        let q_norm = inf_norm(q);
        let scale = mean.max(q_norm);
        let gamma = if scale < 1e-8 {
            1.0
        } else {
            (1.0 / scale).clamp(SCALE_MIN, SCALE_MAX)
        };
        if (gamma - 1.0).abs() > 0.0 {
            for v in p.values.iter_mut() {
                *v *= gamma;
            }
            q.iter_mut().for_each(|v| *v *= gamma);
            c *= gamma;
        }
    }
    Scaling {
        d_inv: d.iter().map(|v| 1.0 / v).collect(),
        e_inv: e.iter().map(|v| 1.0 / v).collect(),
        d,
        e,
        c,
    }
}
