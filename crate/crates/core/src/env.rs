//! Terrain as a set of discrete costed contact surfaces, and the per-step
//! selection of reachable, friction-feasible footholds.

use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use serde::{Deserialize, Serialize};

use crate::{Error, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub id: usize,
    pub position: Vec3,
    pub normal: Vec3,
    pub mu: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SurfaceList {
    surfaces: Vec<Surface>,
}

/// Surfaces plus a k-d tree over their positions. Immutable once built.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "SurfaceList", into = "SurfaceList")]
pub struct Environment {
    surfaces: Vec<Surface>,
    tree: ImmutableKdTree<f64, u32, 3, 32>,
}

impl std::fmt::Debug for Environment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Environment")
            .field("surfaces", &self.surfaces.len())
            .finish()
    }
}

impl TryFrom<SurfaceList> for Environment {
    type Error = Error;
    fn try_from(list: SurfaceList) -> Result<Self, Error> {
        Environment::new(list.surfaces)
    }
}

impl From<Environment> for SurfaceList {
    fn from(env: Environment) -> Self {
        SurfaceList {
            surfaces: env.surfaces,
        }
    }
}

impl Environment {
    /// Normals are normalized on construction. Ids must be exactly `0..M`
    /// in order.
    pub fn new(mut surfaces: Vec<Surface>) -> Result<Self, Error> {
        for (idx, s) in surfaces.iter_mut().enumerate() {
            if s.id != idx {
                return Err(Error::InvalidEnvironment(format!(
                    "surface at index {idx} has id {}, ids must be dense and ordered",
                    s.id
                )));
            }
            let norm = s.normal.norm();
            if !(norm > 1e-12 && norm.is_finite()) {
                return Err(Error::InvalidEnvironment(format!("surface {idx} has a zero normal")));
            }
            s.normal /= norm;
            if !(s.mu > 0.0 && s.mu.is_finite()) {
                return Err(Error::InvalidEnvironment(format!("surface {idx} has mu = {}", s.mu)));
            }
            if !(s.cost >= 0.0 && s.cost.is_finite()) {
                return Err(Error::InvalidEnvironment(format!("surface {idx} has cost = {}", s.cost)));
            }
            if !s.position.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidEnvironment(format!("surface {idx} has a non-finite position")));
            }
        }
        if surfaces.len() > u32::MAX as usize {
            return Err(Error::InvalidEnvironment("too many surfaces".into()));
        }
        let points: Vec<[f64; 3]> = surfaces.iter().map(|s| s.position.into()).collect();
        let tree = ImmutableKdTree::new_from_slice(&points);
        Ok(Self { surfaces, tree })
    }

    pub fn surfaces(&self) -> &[Surface] {
        &self.surfaces
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn surface(&self, id: usize) -> Option<&Surface> {
        self.surfaces.get(id)
    }

    /// Surfaces within `radius` of `point` (inclusive), nearest first; ties
    /// go to the lower cost, then the lower id.
    pub fn within(&self, point: &Vec3, radius: f64) -> Vec<(usize, f64)> {
        if self.surfaces.is_empty() {
            return Vec::new();
        }
        let query: [f64; 3] = (*point).into();
        // pad the query and apply the exact radius test below
        let r2 = radius * radius * (1.0 + 1e-9) + 1e-12;
        let mut hits: Vec<(usize, f64)> = self
            .tree
            .within_unsorted::<SquaredEuclidean>(&query, r2)
            .into_iter()
            .map(|nn| {
                let id = nn.item as usize;
                (id, (self.surfaces[id].position - point).norm())
            })
            .filter(|&(_, d)| d <= radius)
            .collect();
        hits.sort_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then(self.surfaces[a.0].cost.total_cmp(&self.surfaces[b.0].cost))
                .then(a.0.cmp(&b.0))
        });
        hits
    }
}

/// Normal component and tangential magnitude of a unit direction with
/// respect to a unit surface normal.
pub fn friction_components(unit_dir: &Vec3, normal: &Vec3) -> (f64, f64) {
    let nc = unit_dir.dot(normal);
    let tangential = (unit_dir - normal * nc).norm();
    (nc, tangential)
}

/// Whether a push along `dir` is inside the friction cone. Scale invariant
/// for any positive multiple of `dir`.
pub fn in_friction_cone(dir: &Vec3, normal: &Vec3, mu: f64) -> bool {
    let len = dir.norm();
    if len == 0.0 {
        return false;
    }
    let (nc, t) = friction_components(&(dir / len), normal);
    nc > 0.0 && mu * nc >= t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub time_index: usize,
    pub surface_id: usize,
    /// Vector from the foothold to the approximate CoM.
    pub leg_dir: Vec3,
    pub unit_dir: Vec3,
    pub normal_component: f64,
    pub tangential_magnitude: f64,
    pub distance: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub steps: Vec<Vec<Candidate>>,
}

impl CandidateSet {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn total(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }

    pub fn empty_steps(&self) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_empty())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Candidate> {
        self.steps.iter().flatten()
    }
}

/// The K nearest surfaces within `radius` of each `s_tilde[i]`, keeping those
/// that can push the CoM without slipping.
///
/// Steps without candidates are allowed (they can only be flight steps);
/// an error is returned only when every step is empty.
pub fn select_candidates(
    env: &Environment,
    s_tilde: &[Vec3],
    k: usize,
    radius: f64,
) -> Result<CandidateSet, Error> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig(format!("radius = {radius} must be positive")));
    }
    let steps: Vec<Vec<Candidate>> = s_tilde
        .iter()
        .enumerate()
        .map(|(i, st)| {
            env.within(st, radius)
                .into_iter()
                .take(k)
                .filter_map(|(id, distance)| {
                    let surf = &env.surfaces[id];
                    let leg_dir = st - surf.position;
                    if distance == 0.0 {
                        return None;
                    }
                    let unit_dir = leg_dir / distance;
                    let (nc, t) = friction_components(&unit_dir, &surf.normal);
                    (nc > 0.0 && surf.mu * nc >= t).then(|| Candidate {
                        time_index: i,
                        surface_id: id,
                        leg_dir,
                        unit_dir,
                        normal_component: nc,
                        tangential_magnitude: t,
                        distance,
                        cost: surf.cost,
                    })
                })
                .collect()
        })
        .collect();
    let set = CandidateSet { steps };
    let empty = set.empty_steps();
    if !s_tilde.is_empty() && empty.len() == s_tilde.len() {
        return Err(Error::NoCandidates);
    }
    if !empty.is_empty() {
        log::warn!("no candidate footholds at steps {empty:?}");
    }
    Ok(set)
}
