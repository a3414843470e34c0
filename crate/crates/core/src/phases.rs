//! Stance phases with left/right assignment, and Hermite swing trajectories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::planner::Plan;
use crate::{Error, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactPhase {
    pub side: Side,
    pub surface_id: usize,
    pub foothold: Vec3,
    /// First and last active step, inclusive.
    pub start_index: usize,
    pub end_index: usize,
    pub mean_force_dir: Vec3,
}

impl ContactPhase {
    pub fn overlaps(&self, other: &ContactPhase) -> bool {
        self.start_index <= other.end_index && other.start_index <= self.end_index
    }

    pub fn steps(&self) -> usize {
        self.end_index - self.start_index + 1
    }
}

/// Horizontal unit heading at step `i`: CoM velocity, else the desired velocity, else +x.
fn heading(plan: &Plan, i: usize) -> Vec3 {
    let flat = |v: Vec3| Vec3::new(v.x, v.y, 0.0);
    let v = flat(plan.com_vel[i]);
    if v.norm() >= 1e-3 {
        return v.normalize();
    }
    let v = flat(plan.path.v_star[i]);
    if v.norm() >= 1e-3 {
        return v.normalize();
    }
    Vec3::x()
}

/// Lateral offset of `foothold` from the CoM at step `i`, positive to the left.
pub fn lateral_offset(plan: &Plan, i: usize, foothold: &Vec3) -> f64 {
    let left = Vec3::z().cross(&heading(plan, i));
    (foothold - plan.com[i]).dot(&left)
}

/// Merges runs of steps on the same surface into phases and assigns feet.
///
/// A phase prefers the side its foothold lies on relative to the CoM. A
/// foot that is still in stance cannot take a new phase, and phases starting
/// together get opposite sides with the more leftward one on the left.
pub fn assign_phases(plan: &Plan, env: &Environment) -> Result<Vec<ContactPhase>, Error> {
    // runs of consecutive active steps per surface
    let mut open: BTreeMap<usize, (usize, usize, Vec3)> = BTreeMap::new();
    let mut runs: Vec<(usize, usize, usize, Vec3)> = Vec::new();
    for (i, step) in plan.active_contacts.iter().enumerate() {
        let here: BTreeMap<usize, Vec3> = step.iter().map(|c| (c.surface_id, c.accel)).collect();
        let closed: Vec<usize> = open.keys().filter(|id| !here.contains_key(id)).copied().collect();
        for id in closed {
            let (s, e, f) = open.remove(&id).unwrap();
            runs.push((id, s, e, f));
        }
        for (&id, &acc) in &here {
            open.entry(id)
                .and_modify(|(_, e, f)| {
                    *e = i;
                    *f += acc;
                })
                .or_insert((i, i, acc));
        }
    }
    runs.extend(open.into_iter().map(|(id, (s, e, f))| (id, s, e, f)));

    let mut phases: Vec<(f64, ContactPhase)> = Vec::with_capacity(runs.len());
    for (id, s, e, force) in runs {
        let surf = env.surface(id).ok_or_else(|| {
            Error::InvalidEnvironment(format!("plan references unknown surface {id}"))
        })?;
        let lateral = lateral_offset(plan, s, &surf.position);
        let dir = if force.norm() > 0.0 { force.normalize() } else { Vec3::zeros() };
        phases.push((
            lateral,
            ContactPhase {
                side: Side::Left,
                surface_id: id,
                foothold: surf.position,
                start_index: s,
                end_index: e,
                mean_force_dir: dir,
            },
        ));
    }
    phases.sort_by(|a, b| {
        a.1.start_index
            .cmp(&b.1.start_index)
            .then(b.0.total_cmp(&a.0))
            .then(a.1.surface_id.cmp(&b.1.surface_id))
    });

    // last step each foot is busy until
    let mut busy: BTreeMap<Side, usize> = BTreeMap::new();
    let mut out: Vec<ContactPhase> = Vec::with_capacity(phases.len());
    for idx in 0..phases.len() {
        let (lateral, ref phase) = phases[idx];
        let start = phase.start_index;
        let free = |side: Side| busy.get(&side).is_none_or(|&end| end < start);
        let partner_starts_now = phases
            .get(idx + 1)
            .is_some_and(|(_, p)| p.start_index == start);
        let side = match (free(Side::Left), free(Side::Right)) {
            (false, false) => return Err(Error::SideConflict(start)),
            (true, false) => Side::Left,
            (false, true) => Side::Right,
            (true, true) => {
                // the more leftward of two simultaneous phases takes the left foot
                if partner_starts_now || lateral >= 0.0 {
                    Side::Left
                } else {
                    Side::Right
                }
            }
        };
        busy.insert(side, phase.end_index);
        let mut phase = phase.clone();
        phase.side = side;
        out.push(phase);
    }
    Ok(out)
}

/// What supports the CoM over a run of steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    Flight,
    Single(Side),
    /// Two feet, identified by their indices in the phase list.
    Double(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportInterval {
    pub support: Support,
    pub start_index: usize,
    pub end_index: usize,
}

/// Splits `0..n` into maximal runs with the same support. More than two
/// simultaneous phases are reported as the first two.
pub fn support_sequence(phases: &[ContactPhase], n: usize) -> Vec<SupportInterval> {
    let mut out: Vec<SupportInterval> = Vec::new();
    for i in 0..n {
        let here: Vec<usize> = (0..phases.len())
            .filter(|&k| phases[k].start_index <= i && i <= phases[k].end_index)
            .collect();
        let support = match here.as_slice() {
            [] => Support::Flight,
            [k] => Support::Single(phases[*k].side),
            [a, b, ..] => Support::Double(*a, *b),
        };
        match out.last_mut() {
            Some(last) if last.support == support => last.end_index = i,
            _ => out.push(SupportInterval {
                support,
                start_index: i,
                end_index: i,
            }),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaitSummary {
    /// Sides of the phases in start order.
    pub sides: Vec<Side>,
    /// Consecutive phases never share a side.
    pub phases_alternate: bool,
    /// Single-support intervals never repeat a side.
    pub single_support_alternates: bool,
    /// Adjacent double-support intervals on different foot pairs.
    pub consecutive_double_support: usize,
    pub flight_steps: usize,
}

impl GaitSummary {
    pub fn is_alternating_walk(&self) -> bool {
        self.phases_alternate && self.single_support_alternates && self.consecutive_double_support == 0
    }
}

pub fn gait_summary(phases: &[ContactPhase], n: usize) -> GaitSummary {
    let sides: Vec<Side> = phases.iter().map(|p| p.side).collect();
    let seq = support_sequence(phases, n);
    let singles: Vec<Side> = seq
        .iter()
        .filter_map(|s| match s.support {
            Support::Single(side) => Some(side),
            _ => None,
        })
        .collect();
    GaitSummary {
        phases_alternate: sides.windows(2).all(|w| w[0] != w[1]),
        single_support_alternates: singles.windows(2).all(|w| w[0] != w[1]),
        consecutive_double_support: seq
            .windows(2)
            .filter(|w| matches!((w[0].support, w[1].support), (Support::Double(..), Support::Double(..))))
            .count(),
        flight_steps: seq
            .iter()
            .filter(|s| s.support == Support::Flight)
            .map(|s| s.end_index - s.start_index + 1)
            .sum(),
        sides,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermiteSegment {
    pub t0: f64,
    pub t1: f64,
    pub p0: Vec3,
    pub p1: Vec3,
    pub v0: Vec3,
    pub v1: Vec3,
    /// Apex height of the swing this segment belongs to; zero for stance.
    pub apex_height: f64,
}

impl HermiteSegment {
    pub fn stance(t0: f64, t1: f64, p: Vec3) -> Self {
        Self {
            t0,
            t1,
            p0: p,
            p1: p,
            v0: Vec3::zeros(),
            v1: Vec3::zeros(),
            apex_height: 0.0,
        }
    }

    pub fn position(&self, t: f64) -> Vec3 {
        let dur = self.t1 - self.t0;
        if dur <= 0.0 {
            return self.p0;
        }
        let s = ((t - self.t0) / dur).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        self.p0 * h00 + self.v0 * (h10 * dur) + self.p1 * h01 + self.v1 * (h11 * dur)
    }

    pub fn velocity(&self, t: f64) -> Vec3 {
        let dur = self.t1 - self.t0;
        if dur <= 0.0 {
            return Vec3::zeros();
        }
        let s = ((t - self.t0) / dur).clamp(0.0, 1.0);
        let s2 = s * s;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        (self.p0 * d00 + self.p1 * d01) / dur + self.v0 * d10 + self.v1 * d11
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootTrajectory {
    pub side: Side,
    /// Consecutive segments, stance and swing interleaved.
    pub segments: Vec<HermiteSegment>,
    /// Swings that had to be squeezed between back-to-back stance phases.
    pub min_duration_swings: usize,
}

impl FootTrajectory {
    pub fn start_time(&self) -> Option<f64> {
        self.segments.first().map(|s| s.t0)
    }

    pub fn end_time(&self) -> Option<f64> {
        self.segments.last().map(|s| s.t1)
    }

    /// Position at `t`, or `None` outside the covered interval.
    pub fn position(&self, t: f64) -> Option<Vec3> {
        let (first, last) = (self.start_time()?, self.end_time()?);
        if t < first || t > last {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.t1 < t);
        self.segments.get(idx.min(self.segments.len() - 1)).map(|s| s.position(t))
    }
}

/// Liftoff-to-touchdown swing through an apex at the temporal midpoint,
/// `clearance` above the higher endpoint, with zero end velocities.
pub fn swing(t0: f64, t1: f64, liftoff: Vec3, touchdown: Vec3, clearance: f64) -> [HermiteSegment; 2] {
    let tm = 0.5 * (t0 + t1);
    let apex_h = liftoff.z.max(touchdown.z) + clearance;
    let mid = (liftoff + touchdown) * 0.5;
    let apex = Vec3::new(mid.x, mid.y, apex_h);
    // horizontal speed of a single smoothstep at its midpoint
    let delta = touchdown - liftoff;
    let apex_vel = Vec3::new(delta.x, delta.y, 0.0) * (1.5 / (t1 - t0));
    [
        HermiteSegment {
            t0,
            t1: tm,
            p0: liftoff,
            p1: apex,
            v0: Vec3::zeros(),
            v1: apex_vel,
            apex_height: apex_h,
        },
        HermiteSegment {
            t0: tm,
            t1,
            p0: apex,
            p1: touchdown,
            v0: apex_vel,
            v1: Vec3::zeros(),
            apex_height: apex_h,
        },
    ]
}

/// Per-foot trajectories covering the first touchdown to the last liftoff.
pub fn swing_trajectories(phases: &[ContactPhase], dt: f64, clearance: f64) -> Vec<FootTrajectory> {
    [Side::Left, Side::Right]
        .into_iter()
        .filter_map(|side| {
            let mut own: Vec<&ContactPhase> = phases.iter().filter(|p| p.side == side).collect();
            if own.is_empty() {
                return None;
            }
            own.sort_by_key(|p| p.start_index);
            // stance windows in seconds
            let mut windows: Vec<(f64, f64, Vec3)> = own
                .iter()
                .map(|p| (p.start_index as f64 * dt, (p.end_index + 1) as f64 * dt, p.foothold))
                .collect();
            let mut squeezed = 0;
            for k in 1..windows.len() {
                if windows[k].0 - windows[k - 1].1 < 1e-12 {
                    log::warn!(
                        "{side:?} foot: stance phases at steps {} and {} are back to back; inserting a one-step swing",
                        own[k - 1].end_index,
                        own[k].start_index
                    );
                    windows[k - 1].1 -= 0.5 * dt;
                    windows[k].0 += 0.5 * dt;
                    squeezed += 1;
                }
            }
            let mut segments = Vec::with_capacity(3 * windows.len());
            for (k, &(t0, t1, p)) in windows.iter().enumerate() {
                if k > 0 {
                    let (_, prev_end, prev_p) = windows[k - 1];
                    segments.extend(swing(prev_end, t0, prev_p, p, clearance));
                }
                segments.push(HermiteSegment::stance(t0, t1, p));
            }
            Some(FootTrajectory {
                side,
                segments,
                min_duration_swings: squeezed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DesiredPath;
    use crate::env::Surface;
    use crate::planner::ContactForce;

    fn env_at(points: &[Vec3]) -> Environment {
        Environment::new(
            points
                .iter()
                .enumerate()
                .map(|(id, &position)| Surface {
                    id,
                    position,
                    normal: Vec3::z(),
                    mu: 0.7,
                    cost: 1.0,
                })
                .collect(),
        )
        .unwrap()
    }

    /// Plan walking along +x with the given active surfaces per step.
    fn schedule(env: &Environment, steps: &[&[usize]]) -> Plan {
        let n = steps.len();
        let dt = 0.15;
        let path = DesiredPath::straight(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.3, 0.0, 0.0), n, dt);
        let contacts: Vec<Vec<ContactForce>> = steps
            .iter()
            .enumerate()
            .map(|(i, ids)| {
                ids.iter()
                    .map(|&id| {
                        let leg = path.s_star[i] - env.surfaces()[id].position;
                        ContactForce {
                            surface_id: id,
                            alpha: 5.0,
                            leg_dir: leg,
                            accel: leg * 5.0,
                        }
                    })
                    .collect()
            })
            .collect();
        Plan {
            n,
            dt,
            com: path.s_star.clone(),
            com_vel: path.v_star.clone(),
            s_tilde: path.s_star.clone(),
            path,
            active_contacts: contacts.clone(),
            contacts,
            active_threshold: 1e-3,
            phases: Vec::new(),
            iterations_used: 0,
            converged: true,
            iterations: Vec::new(),
            total_time: 0.0,
        }
    }

    #[test]
    fn consecutive_steps_merge() {
        let env = env_at(&[Vec3::zeros(); 8]);
        let steps: [&[usize]; 6] = [&[], &[], &[7], &[7], &[7], &[]];
        let phases = assign_phases(&schedule(&env, &steps), &env).unwrap();
        assert_eq!(phases.len(), 1);
        assert_eq!((phases[0].surface_id, phases[0].start_index, phases[0].end_index), (7, 2, 4));
    }

    #[test]
    fn simultaneous_contacts_by_lateral_sign() {
        let env = env_at(&[Vec3::new(0.15, 0.1, 0.0), Vec3::new(0.15, -0.1, 0.0)]);
        let steps: [&[usize]; 1] = [&[1, 0]];
        let phases = assign_phases(&schedule(&env, &steps), &env).unwrap();
        let side_of = |id| phases.iter().find(|p| p.surface_id == id).unwrap().side;
        assert_eq!(side_of(0), Side::Left);
        assert_eq!(side_of(1), Side::Right);
    }

    #[test]
    fn same_side_pair_splits_by_order() {
        let env = env_at(&[Vec3::new(0.15, -0.05, 0.0), Vec3::new(0.15, -0.2, 0.0)]);
        let steps: [&[usize]; 1] = [&[0, 1]];
        let phases = assign_phases(&schedule(&env, &steps), &env).unwrap();
        let side_of = |id| phases.iter().find(|p| p.surface_id == id).unwrap().side;
        assert_eq!(side_of(0), Side::Left);
        assert_eq!(side_of(1), Side::Right);
    }

    #[test]
    fn busy_foot_forces_the_other_side() {
        // two right-hand footholds whose stances overlap
        let env = env_at(&[Vec3::new(0.0, -0.15, 0.0), Vec3::new(0.3, -0.15, 0.0)]);
        let steps: [&[usize]; 4] = [&[0], &[0, 1], &[1], &[1]];
        let phases = assign_phases(&schedule(&env, &steps), &env).unwrap();
        assert_eq!(phases[0].side, Side::Right);
        assert_eq!(phases[1].side, Side::Left);
    }

    #[test]
    fn three_overlapping_phases_conflict() {
        let env = env_at(&[Vec3::new(0.0, 0.1, 0.0), Vec3::new(0.0, -0.1, 0.0), Vec3::new(0.1, 0.0, 0.0)]);
        let steps: [&[usize]; 2] = [&[0, 1], &[0, 1, 2]];
        assert_eq!(assign_phases(&schedule(&env, &steps), &env), Err(Error::SideConflict(1)));
    }

    #[test]
    fn alternating_footholds_alternate_sides() {
        let pts: Vec<Vec3> = (0..6)
            .map(|k| Vec3::new(0.1 * k as f64, if k % 2 == 0 { 0.15 } else { -0.15 }, 0.0))
            .collect();
        let env = env_at(&pts);
        let steps: [&[usize]; 6] = [&[0], &[1], &[2], &[3], &[4], &[5]];
        let phases = assign_phases(&schedule(&env, &steps), &env).unwrap();
        let sides: Vec<Side> = phases.iter().map(|p| p.side).collect();
        for w in sides.windows(2) {
            assert_ne!(w[0], w[1]);
        }
        for (p, pt) in phases.iter().zip(&pts) {
            assert_eq!(p.side == Side::Left, pt.y > 0.0);
        }
    }

    #[test]
    fn symmetric_swing_apex() {
        let [up, down] = swing(0.0, 0.6, Vec3::zeros(), Vec3::new(0.3, 0.0, 0.0), 0.1);
        assert!((up.p1 - Vec3::new(0.15, 0.0, 0.1)).norm() < 1e-15);
        assert_eq!(up.t1, 0.3);
        assert_eq!(up.velocity(0.0), Vec3::zeros());
        assert_eq!(down.velocity(0.6), Vec3::zeros());
        assert!((up.position(0.3) - down.position(0.3)).norm() < 1e-12);
        assert!((up.velocity(0.3) - down.velocity(0.3)).norm() < 1e-12);
    }

    #[test]
    fn step_up_apex_clears_higher_end() {
        let [up, _] = swing(0.0, 0.4, Vec3::zeros(), Vec3::new(0.3, 0.0, 0.2), 0.1);
        assert!((up.apex_height - 0.3).abs() < 1e-15);
    }

    #[test]
    fn stance_and_swing_segments() {
        let phases = vec![
            ContactPhase {
                side: Side::Left,
                surface_id: 0,
                foothold: Vec3::zeros(),
                start_index: 0,
                end_index: 4,
                mean_force_dir: Vec3::z(),
            },
            ContactPhase {
                side: Side::Left,
                surface_id: 1,
                foothold: Vec3::new(0.3, 0.0, 0.0),
                start_index: 7,
                end_index: 8,
                mean_force_dir: Vec3::z(),
            },
        ];
        let trajs = swing_trajectories(&phases, 0.15, 0.1);
        assert_eq!(trajs.len(), 1);
        let segs = &trajs[0].segments;
        assert_eq!(segs.len(), 4);
        assert!((segs[0].t1 - segs[0].t0 - 5.0 * 0.15).abs() < 1e-12);
        for w in segs.windows(2) {
            assert!((w[0].t1 - w[1].t0).abs() < 1e-12);
            assert!((w[0].position(w[0].t1) - w[1].position(w[1].t0)).norm() < 1e-12);
        }
        assert_eq!(trajs[0].position(0.2), Some(Vec3::zeros()));
        assert_eq!(trajs[0].position(10.0), None);
    }

    #[test]
    fn back_to_back_stances_get_a_short_swing() {
        let mk = |id, s, e, x| ContactPhase {
            side: Side::Right,
            surface_id: id,
            foothold: Vec3::new(x, 0.0, 0.0),
            start_index: s,
            end_index: e,
            mean_force_dir: Vec3::z(),
        };
        let trajs = swing_trajectories(&[mk(0, 0, 2, 0.0), mk(1, 3, 5, 0.2)], 0.1, 0.1);
        assert_eq!(trajs[0].min_duration_swings, 1);
        let swing_seg = &trajs[0].segments[1];
        assert!((trajs[0].segments[2].t1 - swing_seg.t0 - 0.1).abs() < 1e-12);
    }

    fn phase(side: Side, start_index: usize, end_index: usize) -> ContactPhase {
        ContactPhase {
            side,
            surface_id: start_index,
            foothold: Vec3::zeros(),
            start_index,
            end_index,
            mean_force_dir: Vec3::z(),
        }
    }

    #[test]
    fn walking_support_sequence() {
        // L 0..=3, R 3..=6, L 6..=8, nothing at 9
        let phases = [phase(Side::Left, 0, 3), phase(Side::Right, 3, 6), phase(Side::Left, 6, 8)];
        let seq = support_sequence(&phases, 10);
        let kinds: Vec<Support> = seq.iter().map(|s| s.support).collect();
        assert_eq!(
            kinds,
            vec![
                Support::Single(Side::Left),
                Support::Double(0, 1),
                Support::Single(Side::Right),
                Support::Double(1, 2),
                Support::Single(Side::Left),
                Support::Flight,
            ]
        );
        assert_eq!((seq[1].start_index, seq[1].end_index), (3, 3));
        let gait = gait_summary(&phases, 10);
        assert!(gait.is_alternating_walk());
        assert_eq!(gait.flight_steps, 1);
    }

    #[test]
    fn hopping_between_double_supports_is_counted() {
        // both feet down, then both feet replaced at once
        let phases = [
            phase(Side::Left, 0, 2),
            phase(Side::Right, 0, 2),
            phase(Side::Left, 3, 5),
            phase(Side::Right, 3, 5),
        ];
        let gait = gait_summary(&phases, 6);
        assert_eq!(gait.consecutive_double_support, 1);
        assert!(!gait.is_alternating_walk());
    }

    #[test]
    fn repeated_single_support_side_breaks_alternation() {
        let phases = [phase(Side::Left, 0, 2), phase(Side::Left, 4, 6)];
        let gait = gait_summary(&phases, 7);
        assert!(!gait.single_support_alternates);
        assert_eq!(gait.flight_steps, 1);
    }
}
