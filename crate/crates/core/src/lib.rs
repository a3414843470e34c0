//! Coupled CoM trajectory and footstep planning for a SLIP-like biped.
//!
//! Each contact on a candidate foothold pushes the CoM along the leg, with a
//! non-negative scale factor. A sequence of convex QPs with reweighted l1
//! penalties on these factors picks a sparse set of contacts: at most two
//! per step, none during flight. Contact phases, foot sides and swing
//! trajectories are recovered from the result.

pub mod config;
pub mod env;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod phases;
pub mod planner;
pub mod qp;
pub mod scenarios;
pub mod solver;
pub mod sparse;

pub type Vec3 = nalgebra::Vector3<f64>;

pub use config::{DesiredPath, PlannerConfig, Weights};
pub use env::{select_candidates, Candidate, CandidateSet, Environment, Surface};
pub use error::Error;
pub use kinematics::{build_p, integrate, IntegrationMatrix, GRAVITY};
pub use phases::{assign_phases, gait_summary, support_sequence, swing_trajectories, ContactPhase, FootTrajectory, GaitSummary, Side, Support};
pub use planner::{plan, plan_with, validate, Plan, ValidationReport};
pub use qp::{assemble, AssembledQp};
pub use scenarios::{generate, Scenario, ScenarioKind, ScenarioSpec};
pub use solver::{AdmmSolver, QpProblem, QpSolution, QpSolver, SolveStatus, SolverSettings, WarmStart};
