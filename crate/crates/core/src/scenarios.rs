//! Built-in terrains and desired paths: flat ground, stepping stones, a
//! chasm, a staircase and a bent path.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{DesiredPath, PlannerConfig};
use crate::env::{Environment, Surface};
use crate::{Error, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    FlatGround,
    StepStones,
    Chasm,
    StaircaseUp,
    BentPath,
    DiscreteStepStones,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::FlatGround,
        ScenarioKind::StepStones,
        ScenarioKind::Chasm,
        ScenarioKind::StaircaseUp,
        ScenarioKind::BentPath,
        ScenarioKind::DiscreteStepStones,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::FlatGround => "flat_ground",
            ScenarioKind::StepStones => "step_stones",
            ScenarioKind::Chasm => "chasm",
            ScenarioKind::StaircaseUp => "staircase_up",
            ScenarioKind::BentPath => "bent_path",
            ScenarioKind::DiscreteStepStones => "discrete_step_stones",
        }
    }

    /// Horizon used when a spec does not set one, s.
    pub fn default_horizon(self) -> f64 {
        match self {
            ScenarioKind::FlatGround => 1.5,
            ScenarioKind::StepStones => 3.45,
            ScenarioKind::Chasm => 4.8,
            ScenarioKind::StaircaseUp => 5.1,
            ScenarioKind::BentPath => 5.1,
            ScenarioKind::DiscreteStepStones => 6.15,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                let names: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
                Error::InvalidSpec(format!("unknown scenario '{s}', expected one of: {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Horizon in seconds; the kind's default when unset.
    pub horizon: Option<f64>,
    pub dt: f64,
    /// Desired forward speed, m/s.
    pub speed: f64,
    pub com_height: f64,
    /// Spacing of ground samples along the direction of travel, m.
    pub grid_res: f64,
    /// Spacing of ground samples across the direction of travel, m.
    pub lateral_res: f64,
    /// Half-width of the sampled ground strip, m.
    pub lateral_extent: f64,
    pub mu: f64,
    pub base_cost: f64,
    /// Cost of samples near the edge of a stone or tread.
    pub edge_cost: f64,
    /// Each cost is multiplied by `1 + cost_jitter · U(0, 1)`.
    pub cost_jitter: f64,
    pub gap_start: f64,
    pub gap_width: f64,
    pub stone_spacing: f64,
    pub stone_radius: f64,
    /// Stone heights are drawn uniformly from this range, m.
    pub stone_height_range: (f64, f64),
    /// Lateral offset of alternating stones, m.
    pub stone_lateral: f64,
    pub stair_start: f64,
    pub stair_rise: f64,
    pub stair_run: f64,
    pub stair_count: usize,
    pub bend_angle_deg: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self::new(ScenarioKind::FlatGround)
    }
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            horizon: None,
            dt: 0.15,
            speed: 0.32,
            com_height: 1.0,
            grid_res: 0.1,
            lateral_res: 0.3,
            lateral_extent: match kind {
                ScenarioKind::StaircaseUp => 0.3,
                _ => 0.7,
            },
            mu: 0.7,
            base_cost: 1.0,
            edge_cost: 1.5,
            cost_jitter: 0.1,
            gap_start: 0.6,
            gap_width: 0.5,
            stone_spacing: 0.2,
            stone_radius: 0.1,
            stone_height_range: (0.0, 0.1),
            stone_lateral: 0.15,
            stair_start: 0.3,
            stair_rise: 0.15,
            stair_run: 0.3,
            stair_count: 5,
            bend_angle_deg: 45.0,
            seed: 0,
        }
    }

    pub fn horizon_seconds(&self) -> f64 {
        self.horizon.unwrap_or_else(|| self.kind.default_horizon())
    }

    pub fn steps(&self) -> Result<usize, Error> {
        let t = self.horizon_seconds();
        let ratio = t / self.dt;
        let n = ratio.round();
        if !(ratio.is_finite() && n >= 1.0 && (ratio - n).abs() <= 1e-9 * ratio.max(1.0)) {
            return Err(Error::InvalidSpec(format!(
                "horizon {t} s is not a whole number of {} s steps",
                self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        self.steps()?;
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return bad(format!("speed = {} must be non-negative", self.speed));
        }
        for (name, v) in [
            ("com_height", self.com_height),
            ("grid_res", self.grid_res),
            ("lateral_res", self.lateral_res),
            ("lateral_extent", self.lateral_extent),
            ("mu", self.mu),
            ("stone_spacing", self.stone_spacing),
            ("stone_radius", self.stone_radius),
            ("stair_run", self.stair_run),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        for (name, v) in [
            ("base_cost", self.base_cost),
            ("edge_cost", self.edge_cost),
            ("cost_jitter", self.cost_jitter),
            ("gap_width", self.gap_width),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be non-negative"));
            }
        }
        if self.stone_height_range.0 > self.stone_height_range.1 {
            return bad("stone_height_range must be ordered".into());
        }
        Ok(())
    }
}

/// A generated environment with its desired path and matching planner settings.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub env: Environment,
    pub path: DesiredPath,
    pub config: PlannerConfig,
}

struct Builder {
    surfaces: Vec<Surface>,
    rng: ChaCha8Rng,
    jitter: f64,
    mu: f64,
}

impl Builder {
    fn add(&mut self, position: Vec3, cost: f64) {
        let u: f64 = self.rng.random();
        let id = self.surfaces.len();
        self.surfaces.push(Surface {
            id,
            position,
            normal: Vec3::z(),
            mu: self.mu,
            cost: cost * (1.0 + self.jitter * u),
        });
    }
}

/// Evenly spaced offsets `±res/2, ±3res/2, …` strictly inside `±extent`.
fn lateral_offsets(res: f64, extent: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let y = (k as f64 + 0.5) * res;
        if y >= extent {
            break;
        }
        out.push(-y);
        out.push(y);
        k += 1;
    }
    out.sort_by(f64::total_cmp);
    out
}

fn samples(from: f64, to: f64, res: f64) -> Vec<f64> {
    let count = ((to - from) / res + 1e-9).floor() as usize;
    (0..=count).map(|i| from + i as f64 * res).collect()
}

/// Desired path from position and velocity functions of time.
fn path_from(f: impl Fn(f64) -> Vec3, fv: impl Fn(f64) -> Vec3, n: usize, dt: f64) -> DesiredPath {
    let s_star = (1..=n).map(|i| f(i as f64 * dt)).collect();
    let v_star: Vec<Vec3> = (1..=n).map(|i| fv(i as f64 * dt)).collect();
    DesiredPath {
        s0: f(0.0),
        v0: v_star.first().copied().unwrap_or_else(Vec3::zeros),
        s_star,
        v_star,
    }
}

pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, Error> {
    spec.validate()?;
    let n = spec.steps()?;
    let dt = spec.dt;
    let t_end = n as f64 * dt;
    let length = spec.speed * t_end;
    let h = spec.com_height;
    let mut b = Builder {
        surfaces: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        jitter: spec.cost_jitter,
        mu: spec.mu,
    };
    let lateral = lateral_offsets(spec.lateral_res, spec.lateral_extent);
    let margin = 0.6;
    let straight = |t: f64| Vec3::new(spec.speed * t, 0.0, h);
    let forward = |_: f64| Vec3::new(spec.speed, 0.0, 0.0);

    let path = match spec.kind {
        ScenarioKind::FlatGround | ScenarioKind::Chasm => {
            let (g0, g1) = (spec.gap_start, spec.gap_start + spec.gap_width);
            for x in samples(-margin, length + margin, spec.grid_res) {
                if spec.kind == ScenarioKind::Chasm && x > g0 && x < g1 {
                    continue;
                }
                for &y in &lateral {
                    b.add(Vec3::new(x, y, 0.0), spec.base_cost);
                }
            }
            path_from(straight, forward, n, dt)
        }
        ScenarioKind::StepStones | ScenarioKind::DiscreteStepStones => {
            let discrete = spec.kind == ScenarioKind::DiscreteStepStones;
            let (lo, hi) = spec.stone_height_range;
            // a starting pad, then alternating stones
            for x in samples(-margin, 0.0, spec.grid_res) {
                for &y in &lateral {
                    b.add(Vec3::new(x, y, 0.0), spec.base_cost);
                }
            }
            let mut k = 1;
            loop {
                let cx = k as f64 * spec.stone_spacing;
                if cx > length + margin {
                    break;
                }
                let side = if k % 2 == 0 { 1.0 } else { -1.0 };
                let z = lo + (hi - lo) * b.rng.random::<f64>();
                let center = Vec3::new(cx, side * spec.stone_lateral, z);
                if discrete {
                    b.add(center, spec.base_cost);
                } else {
                    b.add(center, spec.base_cost);
                    let r = spec.stone_radius;
                    for q in 0..4 {
                        let ang = q as f64 * PI / 2.0;
                        b.add(center + Vec3::new(r * ang.cos(), r * ang.sin(), 0.0), spec.edge_cost);
                    }
                }
                k += 1;
            }
            path_from(straight, forward, n, dt)
        }
        ScenarioKind::StaircaseUp => {
            let rise = spec.stair_rise;
            let run = spec.stair_run;
            let start = spec.stair_start;
            let count = spec.stair_count;
            let top = start + count as f64 * run;
            let edge_band = 0.05;
            let end = length.max(top) + margin;
            for x in samples(-margin, end, spec.grid_res) {
                let (z, edge) = if x < start {
                    (0.0, (start - x) < edge_band)
                } else if x < top {
                    let tread = ((x - start) / run).floor();
                    let local = x - start - tread * run;
                    ((tread + 1.0) * rise, local < edge_band || run - local < edge_band)
                } else {
                    (count as f64 * rise, (x - top) < edge_band)
                };
                let cost = if edge { spec.edge_cost } else { spec.base_cost };
                for &y in &lateral {
                    b.add(Vec3::new(x, y, z), cost);
                }
            }
            let ground = move |x: f64| ((x - start) / run * rise).clamp(0.0, count as f64 * rise);
            let climbing = move |x: f64| x > start && x < top;
            path_from(
                |t| {
                    let x = spec.speed * t;
                    Vec3::new(x, 0.0, h + ground(x))
                },
                |t| {
                    let vz = if climbing(spec.speed * t) { spec.speed * rise / run } else { 0.0 };
                    Vec3::new(spec.speed, 0.0, vz)
                },
                n,
                dt,
            )
        }
        ScenarioKind::BentPath => {
            let turn_at = 0.5 * length;
            let ang = spec.bend_angle_deg.to_radians();
            let dir2 = Vec3::new(ang.cos(), ang.sin(), 0.0);
            let pos = move |t: f64| {
                let d = spec.speed * t;
                if d <= turn_at {
                    Vec3::new(d, 0.0, h)
                } else {
                    Vec3::new(turn_at, 0.0, h) + dir2 * (d - turn_at)
                }
            };
            let bend = Vec3::new(turn_at, 0.0, 0.0);
            let end = bend + dir2 * (length - turn_at);
            let res = spec.grid_res.max(spec.lateral_res * 0.5);
            let (xmin, xmax) = (-margin, end.x.max(turn_at) + margin);
            let (ymin, ymax) = (-margin, end.y.max(0.0) + margin);
            for x in samples(xmin, xmax, res) {
                for y in samples(ymin, ymax, res) {
                    let p = Vec3::new(x, y, 0.0);
                    if distance_to_polyline(&p, &[Vec3::new(-margin, 0.0, 0.0), bend, end + dir2 * margin])
                        <= spec.lateral_extent
                    {
                        b.add(p, spec.base_cost);
                    }
                }
            }
            let vel = move |t: f64| {
                if spec.speed * t <= turn_at {
                    Vec3::new(spec.speed, 0.0, 0.0)
                } else {
                    dir2 * spec.speed
                }
            };
            path_from(pos, vel, n, dt)
        }
    };

    let env = Environment::new(b.surfaces)?;
    let config = PlannerConfig {
        n,
        dt,
        ..PlannerConfig::default()
    };
    Ok(Scenario {
        spec: spec.clone(),
        env,
        path,
        config,
    })
}

fn distance_to_polyline(p: &Vec3, pts: &[Vec3]) -> f64 {
    pts.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let ab = b - a;
            let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            (p - (a + ab * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_ground_horizon() {
        let sc = generate(&ScenarioSpec::new(ScenarioKind::FlatGround)).unwrap();
        assert_eq!(sc.config.n, 10);
        for s in &sc.path.s_star {
            assert_eq!(s.y, 0.0);
            assert_eq!(s.z, 1.0);
        }
        assert!((sc.path.s_star[9].x - 0.48).abs() < 1e-12);
        assert_eq!(sc.path.v_star[3], Vec3::new(0.32, 0.0, 0.0));
    }

    #[test]
    fn chasm_has_no_surfaces_in_the_gap() {
        let mut spec = ScenarioSpec::new(ScenarioKind::Chasm);
        spec.gap_start = 0.6;
        spec.gap_width = 0.5;
        let sc = generate(&spec).unwrap();
        assert!(sc
            .env
            .surfaces()
            .iter()
            .all(|s| s.position.x <= 0.6 || s.position.x >= 1.1));
        assert!(sc.env.surfaces().iter().any(|s| s.position.x > 1.1));
    }

    #[test]
    fn staircase_heights() {
        let mut spec = ScenarioSpec::new(ScenarioKind::StaircaseUp);
        spec.stair_start = 0.0;
        let sc = generate(&spec).unwrap();
        for i in 0..5 {
            let cx = (i as f64 + 0.5) * 0.3;
            let s = sc
                .env
                .surfaces()
                .iter()
                .min_by(|a, b| (a.position.x - cx).abs().total_cmp(&(b.position.x - cx).abs()))
                .unwrap();
            assert!((s.position.z - 0.15 * (i + 1) as f64).abs() < 1e-12, "tread {i}");
        }
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        for kind in ScenarioKind::ALL {
            let mut spec = ScenarioSpec::new(kind);
            spec.seed = 9;
            let a = generate(&spec).unwrap();
            let b = generate(&spec).unwrap();
            assert_eq!(a.env.surfaces(), b.env.surfaces());
            assert_eq!(a.path, b.path);
        }
    }

    #[test]
    fn every_path_point_has_reachable_ground() {
        for kind in ScenarioKind::ALL {
            if kind == ScenarioKind::Chasm {
                continue;
            }
            let sc = generate(&ScenarioSpec::new(kind)).unwrap();
            for (i, s) in sc.path.s_star.iter().enumerate() {
                assert!(
                    !sc.env.within(s, sc.config.radius).is_empty(),
                    "{kind}: step {i} has nothing in reach"
                );
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in ScenarioKind::ALL {
            assert_eq!(kind.name().parse::<ScenarioKind>().unwrap(), kind);
        }
        let err = "moon".parse::<ScenarioKind>().unwrap_err().to_string();
        assert!(err.contains("flat_ground") && err.contains("chasm"));
    }

    #[test]
    fn horizon_must_be_whole_steps() {
        let mut spec = ScenarioSpec::new(ScenarioKind::FlatGround);
        spec.horizon = Some(1.55);
        assert!(matches!(generate(&spec), Err(Error::InvalidSpec(_))));
    }
}
