//! Lattice search over motion primitives: A* for static, potential-cost,
//! tunnel and yaw/FOV planning, time-augmented search against moving
//! obstacles, and LPA* with edge re-weighting and graph pruning for
//! incremental replanning.

mod astar;
mod lpastar;

pub use astar::plan_astar;
pub use lpastar::{plan_lpastar, prune_graph, update_edges, MapDelta, SearchGraph};

use crate::dynamics::{
    angle_diff, check_dynamic_feasibility, generate_control_set, primitive_cost, propagate,
    ControlInput, MotionPrimitive, State, SystemSpec, Trajectory,
};
use crate::env::{
    collision_cost, primitive_collides_static, sample_count, OccupancyGrid, PotentialField, Tunnel,
};
use crate::obstacles::DynamicObstacle;
use crate::{Error, Result};
use std::sync::Arc;
use std::time::Duration;

/// Speed below which the motion direction is undefined and FOV terms are
/// skipped.
pub const EPS_V: f64 = 1e-3;

/// Quantized identity of a lattice state. Two states with equal keys differ
/// by less than half a quantum in every coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeKey {
    pub pos: Vec<i64>,
    pub derivs: Vec<i64>,
    pub yaw: Option<i64>,
    pub time: Option<i64>,
}

/// Deterministic state-to-key quantization. Positions round to grid cells,
/// derivatives to the control-induced lattice spacing, yaw to one yaw-rate
/// step per primitive, and (in dynamic mode) time to the primitive duration.
#[derive(Debug, Clone)]
pub struct Quantizer {
    origin: Vec<f64>,
    pos_res: f64,
    deriv_quanta: Vec<f64>,
    yaw_quantum: Option<f64>,
    time_quantum: f64,
    time_origin: f64,
    timed: bool,
}

impl Quantizer {
    pub fn for_request(req: &PlanRequest) -> Result<Quantizer> {
        let pos_res = req.resolution()?;
        let origin = match &req.grid {
            Some(g) => g.origin().to_vec(),
            None => vec![0.0; req.spec.dim],
        };
        let deriv_quanta: Vec<f64> = (1..req.spec.order)
            .map(|d| req.spec.deriv_quantum(d))
            .collect();
        let yaw_quantum = req.spec.yaw.as_ref().map(|y| {
            let rate_step = 2.0 * y.rate_max / (y.levels - 1) as f64;
            rate_step * req.spec.dt
        });
        Ok(Quantizer {
            origin,
            pos_res,
            deriv_quanta,
            yaw_quantum,
            time_quantum: req.spec.dt,
            time_origin: req.start.t,
            timed: req.mode == PlanMode::Dynamic,
        })
    }

    pub fn key_for(&self, s: &State) -> LatticeKey {
        let pos = s
            .pos
            .iter()
            .zip(&self.origin)
            .map(|(p, o)| ((p - o) / self.pos_res).floor() as i64)
            .collect();
        let mut derivs = Vec::with_capacity(s.derivs.len() * s.pos.len());
        for (d, ds) in s.derivs.iter().enumerate() {
            let q = self.deriv_quanta[d];
            derivs.extend(ds.iter().map(|v| (v / q).round() as i64));
        }
        let yaw = match (s.yaw, self.yaw_quantum) {
            (Some(y), Some(q)) => Some((y / q).round() as i64),
            _ => None,
        };
        let time = self
            .timed
            .then(|| ((s.t - self.time_origin) / self.time_quantum).round() as i64);
        LatticeKey {
            pos,
            derivs,
            yaw,
            time,
        }
    }

    /// Snap derivative values to the control-induced lattice. Returns None
    /// when the state is already on-lattice (within 1e-6 per coordinate).
    pub fn snapped_derivs(&self, s: &State) -> Option<Vec<Vec<f64>>> {
        let mut snapped = s.derivs.clone();
        let mut moved = false;
        for (d, ds) in snapped.iter_mut().enumerate() {
            let q = self.deriv_quanta[d];
            for v in ds.iter_mut() {
                let on = (*v / q).round() * q;
                if (on - *v).abs() > 1e-6 {
                    moved = true;
                }
                *v = on;
            }
        }
        moved.then_some(snapped)
    }

    pub fn time_origin(&self) -> f64 {
        self.time_origin
    }
}

/// Goal region: axis-wise position tolerance around a center plus a norm
/// bound per derivative order.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalRegion {
    pub center: Vec<f64>,
    pub pos_tol: Vec<f64>,
    pub deriv_tol: Vec<f64>,
}

impl GoalRegion {
    /// Goal at `center` within `pos_tol` per axis, requiring all derivative
    /// norms at or below `deriv_tol`.
    pub fn new(center: Vec<f64>, pos_tol: f64, deriv_tol: f64, spec: &SystemSpec) -> GoalRegion {
        GoalRegion {
            pos_tol: vec![pos_tol; center.len()],
            deriv_tol: vec![deriv_tol; spec.order - 1],
            center,
        }
    }

    pub fn contains(&self, s: &State) -> bool {
        let pos_ok = s
            .pos
            .iter()
            .zip(&self.center)
            .zip(&self.pos_tol)
            .all(|((p, c), tol)| (p - c).abs() <= *tol);
        if !pos_ok {
            return false;
        }
        s.derivs
            .iter()
            .zip(&self.deriv_tol)
            .all(|(d, tol)| d.iter().map(|x| x * x).sum::<f64>().sqrt() <= *tol)
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .pos_tol
            .iter()
            .chain(&self.deriv_tol)
            .any(|t| !(*t > 0.0))
        {
            return Err(Error::InvalidConfig(
                "goal tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Whether the workspace is time-varying (moving obstacles require
/// time-augmented states and a planning horizon).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    Static,
    Dynamic,
}

/// A full planning problem. Environment handles are shared snapshots, so a
/// request is cheap to clone and immutable while a search runs.
#[derive(Debug, Clone)]
pub struct PlanRequest {
    pub spec: SystemSpec,
    pub start: State,
    pub goal: GoalRegion,
    /// Trajectory-duration weight.
    pub rho_t: f64,
    /// Collision-cost (potential line integral) weight.
    pub rho_c: f64,
    /// Yaw-alignment cost weight.
    pub rho_psi: f64,
    /// Sensor field of view; `>= 2 pi` disables the hard bound.
    pub fov: f64,
    pub tunnel: Option<Arc<Tunnel>>,
    pub mode: PlanMode,
    /// Planning horizon, required in dynamic mode.
    pub t_max: Option<f64>,
    pub obstacles: Arc<Vec<DynamicObstacle>>,
    pub grid: Option<Arc<OccupancyGrid>>,
    pub potential: Option<Arc<PotentialField>>,
    /// Out-of-bounds reads count as occupied when set.
    pub bounded_workspace: bool,
    /// Lattice position resolution when no grid is attached.
    pub lattice_resolution: Option<f64>,
    /// Hard safety stop on vertex expansions.
    pub expansion_limit: usize,
}

impl PlanRequest {
    pub fn new(spec: SystemSpec, start: State, goal: GoalRegion) -> PlanRequest {
        PlanRequest {
            spec,
            start,
            goal,
            rho_t: 1.0,
            rho_c: 0.0,
            rho_psi: 0.0,
            fov: 2.0 * std::f64::consts::PI,
            tunnel: None,
            mode: PlanMode::Static,
            t_max: None,
            obstacles: Arc::new(Vec::new()),
            grid: None,
            potential: None,
            bounded_workspace: true,
            lattice_resolution: None,
            expansion_limit: 1_000_000,
        }
    }

    /// Grid resolution backing both the lattice position quantum and the
    /// per-primitive sampling rules.
    pub fn resolution(&self) -> Result<f64> {
        self.grid
            .as_ref()
            .map(|g| g.resolution())
            .or(self.lattice_resolution)
            .ok_or_else(|| {
                Error::InvalidConfig("no grid attached and no lattice_resolution given".into())
            })
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.goal.validate()?;
        if self.rho_t < 0.0 || self.rho_c < 0.0 || self.rho_psi < 0.0 {
            return Err(Error::InvalidConfig("weights must be non-negative".into()));
        }
        if self.mode == PlanMode::Dynamic && !self.t_max.is_some_and(|t| t > 0.0) {
            return Err(Error::InvalidConfig(
                "dynamic mode requires a positive t_max".into(),
            ));
        }
        if self.mode == PlanMode::Static && !self.obstacles.is_empty() {
            return Err(Error::InvalidConfig(
                "moving obstacles require dynamic mode (time-augmented states)".into(),
            ));
        }
        if self.start.pos.len() != self.spec.dim || self.start.derivs.len() + 1 != self.spec.order {
            return Err(Error::InvalidConfig(
                "start state shape mismatches the system".into(),
            ));
        }
        if self.spec.yaw.is_some() != self.start.yaw.is_some() {
            return Err(Error::InvalidConfig(
                "start yaw presence mismatches the system".into(),
            ));
        }
        for d in 1..self.spec.order {
            let bound = self.spec.deriv_bound(d) + 1e-9;
            if self.start.derivs[d - 1].iter().any(|v| v.abs() > bound) {
                return Err(Error::InvalidConfig(format!(
                    "start derivative order {d} outside dynamic bounds"
                )));
            }
        }
        self.resolution()?;
        Ok(())
    }

    /// Shared control set for this request.
    pub fn control_set(&self) -> Vec<ControlInput> {
        generate_control_set(&self.spec)
    }
}

/// Search outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStatus {
    Success,
    NoPath,
    /// Dynamic-mode frontier exhausted only because the horizon pruned it.
    HorizonExceeded,
    /// The expansion safety stop fired.
    LimitReached,
}

/// Planner output: the trajectory, its exact cost, and search statistics.
#[derive(Debug, Clone)]
pub struct PlanResult {
    pub trajectory: Trajectory,
    pub total_cost: f64,
    pub expansions: usize,
    pub runtime: Duration,
    pub status: PlanStatus,
    /// True when an off-lattice start was snapped with a correction primitive
    /// (prepended to the trajectory).
    pub snapped: bool,
}

impl PlanResult {
    pub fn is_success(&self) -> bool {
        self.status == PlanStatus::Success
    }

    pub(crate) fn failure(status: PlanStatus, expansions: usize, runtime: Duration) -> PlanResult {
        PlanResult {
            trajectory: Trajectory::empty(),
            total_cost: f64::INFINITY,
            expansions,
            runtime,
            status,
            snapped: false,
        }
    }
}

/// One admissible successor of a state.
#[derive(Debug, Clone)]
pub struct Successor {
    pub primitive: MotionPrimitive,
    pub cost: f64,
    pub collision_term: f64,
    pub yaw_term: f64,
}

/// Yaw-alignment cost: the sampled integral of the squared wrapped difference
/// between yaw and the motion direction `xi = atan2(v_y, v_x)`. Samples below
/// [`EPS_V`] are skipped (no defined direction at rest).
pub fn yaw_cost(p: &MotionPrimitive, samples: usize) -> f64 {
    let count = samples.max(2);
    let dt_s = p.dt / (count - 1) as f64;
    let mut total = 0.0;
    for i in 0..count {
        let s = dt_s * i as f64;
        let v = p.velocity_at(s);
        let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if speed < EPS_V {
            continue;
        }
        if let Some(yaw) = p.yaw_at(s) {
            let xi = v[1].atan2(v[0]);
            let d = angle_diff(yaw, xi);
            total += d * d * dt_s;
        }
    }
    total
}

/// Hard field-of-view bound: every sampled point moving faster than [`EPS_V`]
/// must keep the motion direction within `theta / 2` of the yaw.
pub fn fov_feasible(p: &MotionPrimitive, theta: f64, samples: usize) -> bool {
    if theta >= 2.0 * std::f64::consts::PI - 1e-12 {
        return true;
    }
    let count = samples.max(2);
    let dt_s = p.dt / (count - 1) as f64;
    for i in 0..count {
        let s = dt_s * i as f64;
        let v = p.velocity_at(s);
        let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if speed < EPS_V {
            continue;
        }
        let Some(yaw) = p.yaw_at(s) else { return true };
        let xi = v[1].atan2(v[0]);
        if angle_diff(yaw, xi).abs() > 0.5 * theta + 1e-9 {
            return false;
        }
    }
    true
}

/// Admissible, consistent lower bound on the remaining cost: the time weight
/// times the straight-line minimum travel time under the per-axis velocity
/// bound, shrunk by the goal's position tolerance.
pub fn heuristic(s: &State, req: &PlanRequest) -> f64 {
    let mut t_lb: f64 = 0.0;
    for ((p, c), tol) in s.pos.iter().zip(&req.goal.center).zip(&req.goal.pos_tol) {
        let gap = ((p - c).abs() - tol).max(0.0);
        t_lb = t_lb.max(gap / req.spec.v_max);
    }
    req.rho_t * t_lb
}

/// Map-independent part of an edge cost (control effort, time, yaw terms) and
/// the map-dependent part (potential line integral), with blocked edges at
/// infinite cost. Split so incremental replanning can re-evaluate only the
/// map-dependent side.
pub(crate) struct EdgeCost {
    pub base: f64,
    pub map: f64,
    pub collision_term: f64,
    pub yaw_term: f64,
}

pub(crate) fn edge_cost(p: &MotionPrimitive, req: &PlanRequest, r_m: f64) -> EdgeCost {
    let samples = sample_count(p, &req.spec, r_m);
    let yaw_term = if req.spec.yaw.is_some() {
        yaw_cost(p, samples)
    } else {
        0.0
    };
    let base = primitive_cost(p, req.rho_t) + req.rho_psi * yaw_term;
    let (map, collision_term) = edge_map_cost(p, req);
    EdgeCost {
        base,
        map,
        collision_term,
        yaw_term,
    }
}

/// The map-dependent edge cost: infinite when the primitive collides with the
/// static grid or any active moving obstacle, otherwise the weighted
/// potential-field line integral.
pub(crate) fn edge_map_cost(p: &MotionPrimitive, req: &PlanRequest) -> (f64, f64) {
    if let Some(grid) = &req.grid {
        if primitive_collides_static(p, grid, &req.spec, req.bounded_workspace) {
            return (f64::INFINITY, 0.0);
        }
    }
    if req.mode == PlanMode::Dynamic && !req.obstacles.is_empty() {
        let t_start = p.start.t;
        // conservative box prefilter before the exact root-based tests
        let (plo, phi) = p.position_aabb(0.0);
        for o in req.obstacles.iter() {
            let near = match o.swept_aabb(t_start, t_start + p.dt) {
                Some((olo, ohi)) => crate::obstacles::aabbs_overlap(&plo, &phi, &olo, &ohi),
                None => false,
            };
            if near && o.intersects_primitive(p, t_start) {
                return (f64::INFINITY, 0.0);
            }
        }
    }
    let collision_term = match &req.potential {
        Some(pf) => collision_cost(p, pf, &req.spec),
        None => 0.0,
    };
    (req.rho_c * collision_term, collision_term)
}

/// Sample count for the hard FOV bound: the cost-integral density is too
/// coarse to catch interior yaw/direction excursions, so enforce a dense
/// floor.
pub fn fov_sample_count(p: &MotionPrimitive, spec: &SystemSpec, r_m: f64) -> usize {
    (4 * sample_count(p, spec, r_m)).max(65)
}

/// Static admissibility filters that never change across replanning epochs:
/// dynamic feasibility, the tunnel constraint, and the hard FOV bound.
pub(crate) fn passes_static_filters(p: &MotionPrimitive, req: &PlanRequest, r_m: f64) -> bool {
    if !check_dynamic_feasibility(p, &req.spec) {
        return false;
    }
    let samples = sample_count(p, &req.spec, r_m);
    if let Some(tunnel) = &req.tunnel {
        if !tunnel.contains_primitive(p, 2 * samples) {
            return false;
        }
    }
    if req.spec.yaw.is_some() && !fov_feasible(p, req.fov, fov_sample_count(p, &req.spec, r_m)) {
        return false;
    }
    true
}

/// Expand a state: propagate every control in the set, drop successors that
/// are dynamically infeasible, colliding, outside the tunnel, violating the
/// FOV bound or beyond the horizon, and price the survivors.
///
/// Control evaluation is pure, so it runs data-parallel under the `parallel`
/// feature; results keep control-set order either way.
pub fn expand(s: &State, req: &PlanRequest, controls: &[ControlInput]) -> Vec<Successor> {
    let r_m = req.resolution().expect("validated request");
    let horizon = req.t_max.map(|t| req.start.t + t);
    expand_with_origin(s, req, controls, r_m, horizon).0
}

/// Outcome of evaluating one control from a state.
#[allow(clippy::large_enum_variant)] // outcomes are consumed immediately, never stored
pub(crate) enum ControlOutcome {
    /// Dropped by a filter that never changes across replanning epochs.
    StaticPruned,
    /// Dropped only because the end time passes the horizon.
    HorizonPruned,
    /// Admissible primitive with its cost split; `cost.map` is infinite when
    /// the primitive currently collides (kept so replanning can re-price it).
    Edge(MotionPrimitive, EdgeCost),
}

/// Evaluate every control from `s`, data-parallel under the `parallel`
/// feature; the result vector keeps control-set order.
pub(crate) fn evaluate_controls(
    s: &State,
    req: &PlanRequest,
    controls: &[ControlInput],
    r_m: f64,
    horizon: Option<f64>,
) -> Vec<ControlOutcome> {
    crate::parallel::map_slice(controls, |control| {
        let p = propagate(s, control, req.spec.dt);
        if let Some(h) = horizon {
            if req.mode == PlanMode::Dynamic && p.end.t > h + 1e-9 {
                return ControlOutcome::HorizonPruned;
            }
        }
        if !passes_static_filters(&p, req, r_m) {
            return ControlOutcome::StaticPruned;
        }
        let cost = edge_cost(&p, req, r_m);
        ControlOutcome::Edge(p, cost)
    })
}

/// Expansion with an explicit horizon origin (LPA* sessions keep the origin
/// fixed across replans). Returns the successors and whether any candidate
/// was pruned only by the horizon.
pub(crate) fn expand_with_origin(
    s: &State,
    req: &PlanRequest,
    controls: &[ControlInput],
    r_m: f64,
    horizon: Option<f64>,
) -> (Vec<Successor>, bool) {
    let mut horizon_pruned = false;
    let successors = evaluate_controls(s, req, controls, r_m, horizon)
        .into_iter()
        .filter_map(|outcome| match outcome {
            ControlOutcome::Edge(p, cost) if cost.map.is_finite() => Some(Successor {
                cost: cost.base + cost.map,
                collision_term: cost.collision_term,
                yaw_term: cost.yaw_term,
                primitive: p,
            }),
            ControlOutcome::HorizonPruned => {
                horizon_pruned = true;
                None
            }
            _ => None,
        })
        .collect();
    (successors, horizon_pruned)
}

/// Re-verify a finished trajectory against every constraint of the request.
pub(crate) fn validate_trajectory(traj: &Trajectory, req: &PlanRequest) -> Result<()> {
    let r_m = req.resolution()?;
    for seg in traj.segments() {
        if !passes_static_filters(seg, req, r_m) {
            return Err(Error::InvalidConfig(
                "planned trajectory violates a static constraint".into(),
            ));
        }
        if !edge_map_cost(seg, req).0.is_finite() {
            return Err(Error::InvalidConfig("planned trajectory collides".into()));
        }
    }
    if let Some(end) = traj.end_state() {
        if !req.goal.contains(end) {
            return Err(Error::InvalidConfig(
                "planned trajectory misses the goal".into(),
            ));
        }
    }
    Ok(())
}

/// Build the snap primitive for an off-lattice start (acceleration-controlled
/// tier): one correction primitive drives the derivatives onto the
/// control-induced lattice.
pub(crate) fn snap_start(
    req: &PlanRequest,
    quantizer: &Quantizer,
) -> Result<Option<MotionPrimitive>> {
    let Some(snapped) = quantizer.snapped_derivs(&req.start) else {
        return Ok(None);
    };
    if req.spec.order != 2 {
        return Err(Error::InvalidConfig(
            "off-lattice start derivatives are only snappable for order-2 systems".into(),
        ));
    }
    let u: Vec<f64> = snapped[0]
        .iter()
        .zip(&req.start.derivs[0])
        .map(|(target, v)| (target - v) / req.spec.dt)
        .collect();
    if u.iter().any(|x| x.abs() > req.spec.u_max + 1e-9) {
        return Err(Error::InvalidConfig(
            "start too far off the velocity lattice to snap within the control bound".into(),
        ));
    }
    let control = ControlInput {
        u,
        u_psi: req.spec.yaw.map(|_| 0.0),
    };
    let prim = propagate(&req.start, &control, req.spec.dt);
    let r_m = req.resolution()?;
    if !passes_static_filters(&prim, req, r_m) || !edge_map_cost(&prim, req).0.is_finite() {
        return Err(Error::InvalidConfig(
            "snap correction primitive is infeasible".into(),
        ));
    }
    Ok(Some(prim))
}
