//! Fixtures shared by the planner benchmarks.

use footstep_core::{
    assemble, generate, select_candidates, AssembledQp, CandidateSet, Scenario, ScenarioKind, ScenarioSpec,
};

/// Flat ground with the given horizon in steps, seed 0.
pub fn flat_ground(n: usize) -> Scenario {
    let mut spec = ScenarioSpec::new(ScenarioKind::FlatGround);
    spec.horizon = Some(n as f64 * spec.dt);
    generate(&spec).expect("flat ground scenario")
}

/// Candidates around the desired path, as used by the first reweighting pass.
pub fn first_candidates(sc: &Scenario) -> CandidateSet {
    select_candidates(&sc.env, &sc.path.s_star, sc.config.k, sc.config.radius).expect("candidates")
}

/// The unweighted first-pass QP.
pub fn first_qp(sc: &Scenario) -> AssembledQp {
    assemble(&first_candidates(sc), &sc.path, &sc.config, None).expect("assembled qp")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_matching_horizon() {
        let sc = flat_ground(10);
        assert_eq!(sc.config.n, 10);
        let qp = first_qp(&sc);
        assert!(qp.problem.num_vars() > 0);
        assert!(qp.problem.check_dimensions().is_ok());
    }
}
