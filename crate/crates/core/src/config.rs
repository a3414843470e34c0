use serde::{Deserialize, Serialize};

use crate::kinematics::GRAVITY;
use crate::solver::SolverSettings;
use crate::{Error, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    /// Terrain cost of each contact.
    pub w0: f64,
    /// Temporal consistency of each surface's scale factor.
    pub w1: f64,
    /// Path tracking.
    pub w2: f64,
    /// Velocity tracking inside the path term.
    pub w: f64,
    /// Jerk of the total contact acceleration.
    pub w3: f64,
    /// Reweighted cardinality penalty.
    pub w4: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            w0: 1.0,
            w1: 0.01,
            w2: 10.0,
            w: 1.0,
            w3: 0.01,
            w4: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Horizon length in steps.
    pub n: usize,
    /// Step duration, s.
    pub dt: f64,
    /// Maximum candidate footholds per step.
    pub k: usize,
    /// Reach radius around the approximate CoM, m.
    pub radius: f64,
    /// Largest acceleration a single contact may apply, m/s².
    pub a_max: f64,
    /// Per-axis bound on the deviation from the desired path, m.
    pub tol: f64,
    pub weights: Weights,
    pub epsilon: f64,
    /// Bound on the reweighted contact count per step.
    pub card_limit: f64,
    /// Maximum number of reweighting iterations after the first solve.
    pub n_rw: usize,
    /// Scale factors above this count as active contacts. Derived from
    /// `a_max` and the shortest candidate leg when unset.
    pub alpha_zero_tol: Option<f64>,
    pub gravity: Vec3,
    /// Swing apex height above the higher endpoint, m.
    pub swing_clearance: f64,
    pub solver: SolverSettings,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            n: 10,
            dt: 0.15,
            k: 20,
            radius: 1.2,
            a_max: 3.0 * 9.81,
            tol: 0.1,
            weights: Weights::default(),
            epsilon: 0.1,
            card_limit: 2.9,
            n_rw: 6,
            alpha_zero_tol: None,
            gravity: GRAVITY,
            swing_clearance: 0.1,
            solver: SolverSettings::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 {
            return Err(Error::InvalidHorizon("N must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidHorizon(format!("dt = {} must be positive", self.dt)));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        for (name, v) in [
            ("radius", self.radius),
            ("a_max", self.a_max),
            ("tol", self.tol),
            ("epsilon", self.epsilon),
            ("card_limit", self.card_limit),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        let w = &self.weights;
        for (name, v) in [("w0", w.w0), ("w1", w.w1), ("w2", w.w2), ("w", w.w), ("w3", w.w3), ("w4", w.w4)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("weight {name} = {v} must be non-negative"));
            }
        }
        if let Some(t) = self.alpha_zero_tol {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("alpha_zero_tol = {t} must be positive"));
            }
        }
        if !(self.swing_clearance >= 0.0) {
            return bad("swing_clearance must be non-negative".into());
        }
        if !self.gravity.iter().all(|v| v.is_finite()) {
            return bad("gravity must be finite".into());
        }
        Ok(())
    }

    /// Activity threshold for a scale factor, given the shortest leg in use.
    pub fn zero_threshold(&self, min_leg_length: f64) -> f64 {
        self.alpha_zero_tol
            .unwrap_or(1e-4 * self.a_max / min_leg_length.max(1e-6))
    }

    pub fn horizon_seconds(&self) -> f64 {
        self.n as f64 * self.dt
    }
}

/// Desired CoM positions and velocities at the end of each step, with the
/// initial state the plan starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesiredPath {
    pub s0: Vec3,
    #[serde(default)]
    pub v0: Vec3,
    pub s_star: Vec<Vec3>,
    pub v_star: Vec<Vec3>,
}

impl DesiredPath {
    /// Constant-velocity straight line from `s0`, starting at rest.
    pub fn straight(s0: Vec3, velocity: Vec3, n: usize, dt: f64) -> Self {
        let s_star = (1..=n).map(|i| s0 + velocity * (dt * i as f64)).collect();
        Self {
            s0,
            v0: Vec3::zeros(),
            s_star,
            v_star: vec![velocity; n],
        }
    }

    pub fn len(&self) -> usize {
        self.s_star.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_star.is_empty()
    }

    pub fn validate(&self, n: usize) -> Result<(), Error> {
        if self.s_star.len() != n || self.v_star.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "path has {} positions and {} velocities, horizon is {n}",
                self.s_star.len(),
                self.v_star.len()
            )));
        }
        let finite = |v: &Vec3| v.iter().all(|x| x.is_finite());
        if !(finite(&self.s0) && finite(&self.v0) && self.s_star.iter().all(finite) && self.v_star.iter().all(finite))
        {
            return Err(Error::InvalidConfig("desired path has non-finite entries".into()));
        }
        Ok(())
    }
}
