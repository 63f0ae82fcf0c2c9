//! Scenario file schema and conversion into library types. All relative file
//! references resolve against the scenario's own directory.

use kinoplan::dynamics::{State, SystemSpec};
use kinoplan::env::{build_potential, distance_transform, OccupancyGrid, PotentialField};
use kinoplan::multirobot::{RobotConfig, TeamMode, TeamScenario};
use kinoplan::obstacles::{obstacles_from_json, ConvexPolytope, LinearObstacle};
use kinoplan::poly::Polynomial;
use kinoplan::search::{GoalRegion, PlanMode, PlanRequest};
use serde::Deserialize;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub system: SystemSpec,
    #[serde(default)]
    pub grid: Option<serde_json::Value>,
    #[serde(default)]
    pub grid_file: Option<String>,
    #[serde(default = "default_true")]
    pub bounded_workspace: bool,
    #[serde(default)]
    pub lattice_resolution: Option<f64>,
    #[serde(default)]
    pub start: Option<StartSpec>,
    #[serde(default)]
    pub goal: Option<GoalSpec>,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub fov: Option<f64>,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    /// Plan a nominal trajectory first and constrain the final plan to a
    /// tunnel of this radius around it.
    #[serde(default)]
    pub tunnel_radius: Option<f64>,
    /// Baseline mode: occupy every cell with positive potential and plan
    /// shortest against the inflated map instead of pricing the field.
    #[serde(default)]
    pub treat_potential_as_obstacles: bool,
    #[serde(default)]
    pub mode: Option<ModeSpec>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub expansion_limit: Option<usize>,
    /// Inline obstacle schedule (same schema as the obstacle file).
    #[serde(default)]
    pub obstacles: Option<serde_json::Value>,
    #[serde(default)]
    pub obstacles_file: Option<String>,
    #[serde(default)]
    pub replan: Option<ReplanSpec>,
    #[serde(default)]
    pub team: Option<TeamSpec>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
pub struct StartSpec {
    pub pos: Vec<f64>,
    #[serde(default)]
    pub vel: Option<Vec<f64>>,
    #[serde(default)]
    pub acc: Option<Vec<f64>>,
    #[serde(default)]
    pub yaw: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct GoalSpec {
    pub center: Vec<f64>,
    pub pos_tol: f64,
    #[serde(default = "default_deriv_tol")]
    pub deriv_tol: f64,
}

fn default_deriv_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Deserialize)]
pub struct Weights {
    #[serde(default = "one")]
    pub rho_t: f64,
    #[serde(default)]
    pub rho_c: f64,
    #[serde(default)]
    pub rho_psi: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            rho_t: 1.0,
            rho_c: 0.0,
            rho_psi: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct PotentialSpec {
    pub f_max: f64,
    pub d_thr: f64,
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ReplanSpec {
    pub period: f64,
    pub max_epochs: usize,
    #[serde(default)]
    pub initial_map: InitialMap,
    #[serde(default)]
    pub sensor: Option<SensorSpec>,
    #[serde(default)]
    pub scripted_obstacles: Vec<ScriptedObstacle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialMap {
    #[default]
    Known,
    Unknown,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SensorSpec {
    pub fov: f64,
    pub range: f64,
}

/// Ground-truth moving obstacle: a box following a piecewise-polynomial
/// center path. The planner observes only position and velocity at each
/// epoch and predicts linearly with inflation `v_e`.
#[derive(Debug, Clone, Deserialize)]
pub struct ScriptedObstacle {
    pub half_extents: Vec<f64>,
    #[serde(default)]
    pub v_e: f64,
    pub path_segments: Vec<PathSegment>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PathSegment {
    pub duration: f64,
    /// One coefficient row per axis, lowest degree first.
    pub coeffs: Vec<Vec<f64>>,
}

impl ScriptedObstacle {
    /// True center at global time `tau` (clamped to the path domain).
    pub fn center_at(&self, tau: f64) -> Vec<f64> {
        let (seg, local) = self.locate(tau);
        seg.coeffs
            .iter()
            .map(|c| Polynomial::new(c.clone()).evaluate(local))
            .collect()
    }

    /// True velocity at global time `tau`.
    pub fn velocity_at(&self, tau: f64) -> Vec<f64> {
        let (seg, local) = self.locate(tau);
        seg.coeffs
            .iter()
            .map(|c| Polynomial::new(c.clone()).derivative().evaluate(local))
            .collect()
    }

    fn locate(&self, tau: f64) -> (&PathSegment, f64) {
        let mut t0 = 0.0;
        for seg in &self.path_segments {
            if tau <= t0 + seg.duration || std::ptr::eq(seg, self.path_segments.last().unwrap()) {
                return (seg, (tau - t0).clamp(0.0, seg.duration));
            }
            t0 += seg.duration;
        }
        unreachable!("path_segments validated non-empty")
    }

    /// The obstacle's true polytope at global time `tau`.
    pub fn shape_at(&self, tau: f64) -> ConvexPolytope {
        ConvexPolytope::axis_box(&self.center_at(tau), &self.half_extents)
    }

    /// The planner's linear prediction observed at epoch time `tau`.
    pub fn observe(&self, tau: f64) -> LinearObstacle {
        LinearObstacle {
            shape: self.shape_at(tau),
            velocity: self.velocity_at(tau),
            inflation_rate: self.v_e,
            active_from: tau,
            active_until: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct TeamSpec {
    pub mode: TeamModeSpec,
    pub replan_period: f64,
    pub rounds: usize,
    pub robots: Vec<RobotSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TeamModeSpec {
    Sequential,
    Decentralized,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RobotSpec {
    pub id: usize,
    pub half_extents: Vec<f64>,
    pub start: StartSpec,
    pub goal: GoalSpec,
    #[serde(default)]
    pub replan_period: Option<f64>,
}

/// A fully loaded scenario with environment handles resolved.
pub struct Loaded {
    pub file: ScenarioFile,
    pub grid: Option<Arc<OccupancyGrid>>,
    pub potential: Option<Arc<PotentialField>>,
    pub obstacles: Vec<LinearObstacle>,
}

pub fn load(path: &Path) -> Result<Loaded, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let file: ScenarioFile =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();

    let grid = match (&file.grid, &file.grid_file) {
        (Some(inline), _) => {
            Some(OccupancyGrid::from_json(&inline.to_string()).map_err(|e| e.to_string())?)
        }
        (None, Some(rel)) => {
            let p = dir.join(rel);
            let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            Some(OccupancyGrid::from_json(&text).map_err(|e| e.to_string())?)
        }
        (None, None) => None,
    }
    .map(Arc::new);

    let potential = match (&file.potential, &grid) {
        (Some(spec), Some(grid)) => {
            let df = distance_transform(grid);
            Some(Arc::new(build_potential(
                &df, spec.f_max, spec.d_thr, spec.k,
            )))
        }
        (Some(_), None) => {
            return Err("potential field requires a grid".into());
        }
        _ => None,
    };

    let obstacles = match (&file.obstacles, &file.obstacles_file) {
        (Some(inline), _) => obstacles_from_json(&inline.to_string()).map_err(|e| e.to_string())?,
        (None, Some(rel)) => {
            let p = dir.join(rel);
            let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            obstacles_from_json(&text).map_err(|e| e.to_string())?
        }
        (None, None) => Vec::new(),
    };

    if let Some(replan) = &file.replan {
        if replan
            .scripted_obstacles
            .iter()
            .any(|o| o.path_segments.is_empty())
        {
            return Err("scripted obstacle with empty path".into());
        }
    }

    Ok(Loaded {
        file,
        grid,
        potential,
        obstacles,
    })
}

impl Loaded {
    pub fn start_state(&self) -> Result<State, String> {
        let spec = &self.file.system;
        let start = self.file.start.as_ref().ok_or("scenario has no start")?;
        let dim = spec.dim;
        let mut derivs = Vec::new();
        derivs.push(start.vel.clone().unwrap_or_else(|| vec![0.0; dim]));
        if spec.order >= 3 {
            derivs.push(start.acc.clone().unwrap_or_else(|| vec![0.0; dim]));
        }
        derivs.truncate(spec.order - 1);
        Ok(State {
            pos: start.pos.clone(),
            derivs,
            yaw: if spec.yaw.is_some() {
                Some(start.yaw.unwrap_or(0.0))
            } else {
                None
            },
            t: 0.0,
        })
    }

    pub fn goal_region(&self) -> Result<GoalRegion, String> {
        let goal = self.file.goal.as_ref().ok_or("scenario has no goal")?;
        Ok(GoalRegion::new(
            goal.center.clone(),
            goal.pos_tol,
            goal.deriv_tol,
            &self.file.system,
        ))
    }

    /// The base plan request (without tunnel or dynamic obstacles applied).
    pub fn base_request(&self) -> Result<PlanRequest, String> {
        let start = self.start_state()?;
        let goal = self.goal_region()?;
        let mut req = PlanRequest::new(self.file.system.clone(), start, goal);
        req.rho_t = self.file.weights.rho_t;
        req.rho_c = self.file.weights.rho_c;
        req.rho_psi = self.file.weights.rho_psi;
        if let Some(fov) = self.file.fov {
            req.fov = fov;
        }
        req.grid = self.grid.clone();
        req.potential = self.potential.clone();
        req.bounded_workspace = self.file.bounded_workspace;
        req.lattice_resolution = self.file.lattice_resolution;
        req.t_max = self.file.t_max;
        if let Some(limit) = self.file.expansion_limit {
            req.expansion_limit = limit;
        }
        if self.file.mode == Some(ModeSpec::Dynamic) || !self.obstacles.is_empty() {
            req.mode = PlanMode::Dynamic;
        }
        Ok(req)
    }

    pub fn team_scenario(&self) -> Result<TeamScenario, String> {
        let team = self
            .file
            .team
            .as_ref()
            .ok_or("scenario has no team section")?;
        let spec = &self.file.system;
        let robots = team
            .robots
            .iter()
            .map(|r| {
                let mut derivs = Vec::new();
                derivs.push(r.start.vel.clone().unwrap_or_else(|| vec![0.0; spec.dim]));
                if spec.order >= 3 {
                    derivs.push(r.start.acc.clone().unwrap_or_else(|| vec![0.0; spec.dim]));
                }
                derivs.truncate(spec.order - 1);
                RobotConfig {
                    id: r.id,
                    geometry: ConvexPolytope::axis_box(&vec![0.0; spec.dim], &r.half_extents),
                    spec: spec.clone(),
                    start: State {
                        pos: r.start.pos.clone(),
                        derivs,
                        yaw: None,
                        t: 0.0,
                    },
                    goal: GoalRegion::new(
                        r.goal.center.clone(),
                        r.goal.pos_tol,
                        r.goal.deriv_tol,
                        spec,
                    ),
                    replan_period: r.replan_period,
                }
            })
            .collect();
        Ok(TeamScenario {
            robots,
            grid: self.grid.clone(),
            potential: self.potential.clone(),
            static_obstacles: self.obstacles.clone(),
            mode: match team.mode {
                TeamModeSpec::Sequential => TeamMode::Sequential,
                TeamModeSpec::Decentralized => TeamMode::Decentralized,
            },
            replan_period: team.replan_period,
            rounds: team.rounds,
            rho_t: self.file.weights.rho_t,
            rho_c: self.file.weights.rho_c,
            t_max: self.file.t_max.unwrap_or(60.0),
            bounded_workspace: self.file.bounded_workspace,
            lattice_resolution: self.file.lattice_resolution,
        })
    }
}
