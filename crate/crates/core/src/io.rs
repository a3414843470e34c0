//! File formats: plans as versioned JSON, environments, configs and
//! scenario specs as TOML, trajectories as CSV.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::PlannerConfig;
use crate::env::Environment;
use crate::phases::FootTrajectory;
use crate::planner::Plan;
use crate::scenarios::ScenarioSpec;
use crate::Error;

pub const PLAN_FORMAT: &str = "footstep-plan";
pub const PLAN_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub length: String,
    pub time: String,
    pub acceleration: String,
    pub alpha: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            length: "m".into(),
            time: "s".into(),
            acceleration: "m/s^2".into(),
            alpha: "1/s^2".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub format: String,
    pub version: u32,
    pub units: Units,
    pub config: PlannerConfig,
    pub plan: Plan,
}

impl PlanDocument {
    pub fn new(plan: Plan, config: PlannerConfig) -> Self {
        Self {
            format: PLAN_FORMAT.into(),
            version: PLAN_VERSION,
            units: Units::default(),
            config,
            plan,
        }
    }

    /// serde_json writes the shortest decimal that reads back to the same
    /// `f64`, so values round-trip exactly.
    pub fn to_json(&self) -> Result<String, Error> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let doc: PlanDocument = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        if doc.format != PLAN_FORMAT {
            return Err(Error::Parse(format!("not a plan document (format '{}')", doc.format)));
        }
        if doc.version != PLAN_VERSION {
            return Err(Error::Parse(format!("unsupported plan version {}", doc.version)));
        }
        Ok(doc)
    }
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, Error> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn to_toml<T: Serialize>(value: &T) -> Result<String, Error> {
    toml::to_string(value).map_err(|e| Error::Parse(e.to_string()))
}

pub fn environment_from_toml(text: &str) -> Result<Environment, Error> {
    parse_toml(text)
}

pub fn environment_to_toml(env: &Environment) -> Result<String, Error> {
    to_toml(env)
}

pub fn config_from_toml(text: &str) -> Result<PlannerConfig, Error> {
    let cfg: PlannerConfig = parse_toml(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn config_to_toml(cfg: &PlannerConfig) -> Result<String, Error> {
    to_toml(cfg)
}

/// A scenario file: the generator spec plus optional planner overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub scenario: ScenarioSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<toml::Table>,
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        parse_toml(text)
    }

    pub fn to_toml(&self) -> Result<String, Error> {
        to_toml(self)
    }

    /// Applies the planner overrides on top of `base`.
    pub fn planner_config(&self, base: &PlannerConfig) -> Result<PlannerConfig, Error> {
        let Some(over) = &self.planner else {
            return Ok(base.clone());
        };
        let mut merged = toml::Table::try_from(base).map_err(|e| Error::Parse(e.to_string()))?;
        merge_tables(&mut merged, over);
        let cfg: PlannerConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn merge_tables(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

pub fn read_to_string(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// `step,t,x,y,z,vx,vy,vz,x_des,y_des,z_des,contacts`
pub fn com_csv(plan: &Plan) -> String {
    let mut out = String::from("step,t,x,y,z,vx,vy,vz,x_des,y_des,z_des,contacts\n");
    for i in 0..plan.n {
        let s = plan.com[i];
        let v = plan.com_vel[i];
        let d = plan.path.s_star[i];
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{},{},{},{},{},{}",
            (i + 1) as f64 * plan.dt,
            s.x,
            s.y,
            s.z,
            v.x,
            v.y,
            v.z,
            d.x,
            d.y,
            d.z,
            plan.active_contacts[i].len()
        );
    }
    out
}

/// Foot positions sampled every `sample_dt`: `t,side,x,y,z`.
pub fn feet_csv(trajectories: &[FootTrajectory], sample_dt: f64) -> String {
    let mut out = String::from("t,side,x,y,z\n");
    for traj in trajectories {
        let (Some(t0), Some(t1)) = (traj.start_time(), traj.end_time()) else {
            continue;
        };
        let count = ((t1 - t0) / sample_dt + 1e-9).floor() as usize;
        for k in 0..=count {
            let t = t0 + k as f64 * sample_dt;
            if let Some(p) = traj.position(t) {
                let side = format!("{:?}", traj.side).to_lowercase();
                let _ = writeln!(out, "{t},{side},{},{},{}", p.x, p.y, p.z);
            }
        }
    }
    out
}
