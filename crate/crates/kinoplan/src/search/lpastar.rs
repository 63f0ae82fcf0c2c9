//! Lifelong Planning A* over the primitive lattice, with edge re-weighting
//! after map updates and graph pruning when the start advances along the
//! previous plan.
//!
//! The graph persists across planning epochs. Goal regions are handled
//! through a virtual sink vertex fed by zero-cost edges from every in-goal
//! state, which restores the single-goal structure LPA* needs without
//! distorting costs. Generated successor edges are cached including currently
//! blocked ones (at infinite map cost), so a later map change can re-price
//! them without re-propagating or re-checking untouched parts of the lattice.

use super::{
    evaluate_controls, heuristic, snap_start, validate_trajectory, ControlOutcome, EdgeCost,
    LatticeKey, PlanMode, PlanRequest, PlanResult, PlanStatus, Quantizer,
};
use crate::dynamics::{ControlInput, MotionPrimitive, State, SystemSpec, Trajectory};
use crate::search::{edge_map_cost, GoalRegion};
use crate::{Error, Result};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::time::Instant;

#[derive(Debug, Clone)]
struct Edge {
    target: LatticeKey,
    prim: MotionPrimitive,
    /// Control effort, time and yaw terms; never changes once generated.
    base_cost: f64,
    /// Collision-dependent part: `rho_c * J_c`, or infinity while blocked.
    map_cost: f64,
    aabb_lo: Vec<f64>,
    aabb_hi: Vec<f64>,
}

impl Edge {
    fn cost(&self) -> f64 {
        self.base_cost + self.map_cost
    }
}

#[derive(Debug)]
struct Vertex {
    state: State,
    g: f64,
    rhs: f64,
    h: f64,
    in_goal: bool,
    expanded: bool,
    succs: Vec<Edge>,
    preds: Vec<(LatticeKey, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum NodeId {
    Key(LatticeKey),
    Goal,
}

struct QueueEntry {
    k1: f64,
    k2: f64,
    node: NodeId,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse so the smallest key pops first
        other
            .k1
            .total_cmp(&self.k1)
            .then_with(|| other.k2.total_cmp(&self.k2))
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Configuration a graph session is pinned to; requests that change any of it
/// force a fresh session.
#[derive(Debug, Clone, PartialEq)]
struct SessionConfig {
    spec: SystemSpec,
    goal: GoalRegion,
    rho_t: f64,
    rho_c: f64,
    rho_psi: f64,
    fov: f64,
    mode: PlanMode,
}

impl SessionConfig {
    fn of(req: &PlanRequest) -> SessionConfig {
        SessionConfig {
            spec: req.spec.clone(),
            goal: req.goal.clone(),
            rho_t: req.rho_t,
            rho_c: req.rho_c,
            rho_psi: req.rho_psi,
            fov: req.fov,
            mode: req.mode,
        }
    }
}

/// Persistent LPA* store: per-key `g`/`rhs` records, cached successor edges,
/// and the priority queue of locally inconsistent vertices.
pub struct SearchGraph {
    quantizer: Option<Quantizer>,
    controls: Vec<ControlInput>,
    records: HashMap<LatticeKey, Vertex>,
    goal_g: f64,
    goal_rhs: f64,
    goal_preds: Vec<LatticeKey>,
    queue: BinaryHeap<QueueEntry>,
    start_key: Option<LatticeKey>,
    session: Option<SessionConfig>,
    /// Exact continuous start state the current root corresponds to.
    session_start: Option<State>,
    snap: Option<MotionPrimitive>,
    r_m: f64,
    horizon: Option<f64>,
    horizon_pruned: bool,
}

impl Default for SearchGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl SearchGraph {
    pub fn new() -> SearchGraph {
        SearchGraph {
            quantizer: None,
            controls: Vec::new(),
            records: HashMap::new(),
            goal_g: f64::INFINITY,
            goal_rhs: f64::INFINITY,
            goal_preds: Vec::new(),
            queue: BinaryHeap::new(),
            start_key: None,
            session: None,
            session_start: None,
            snap: None,
            r_m: 0.0,
            horizon: None,
            horizon_pruned: false,
        }
    }

    pub fn is_initialized(&self) -> bool {
        self.start_key.is_some()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Settled start-to-state cost of the lattice vertex a state maps to,
    /// when that vertex is locally consistent.
    pub fn g_of(&self, state: &State) -> Option<f64> {
        let key = self.quantizer.as_ref()?.key_for(state);
        let v = self.records.get(&key)?;
        (v.g == v.rhs && v.g.is_finite()).then_some(v.g)
    }

    fn reset(&mut self) {
        *self = SearchGraph::new();
    }

    fn init_session(&mut self, req: &PlanRequest) -> Result<()> {
        self.reset();
        let quantizer = Quantizer::for_request(req)?;
        self.r_m = req.resolution()?;
        self.controls = req.control_set();
        self.snap = snap_start(req, &quantizer)?;
        let start = match &self.snap {
            Some(prim) => prim.end.clone(),
            None => req.start.clone(),
        };
        let start_key = quantizer.key_for(&start);
        let vertex = Vertex {
            h: heuristic(&start, req),
            in_goal: req.goal.contains(&start),
            state: start,
            g: f64::INFINITY,
            rhs: 0.0,
            expanded: false,
            succs: Vec::new(),
            preds: Vec::new(),
        };
        self.records.insert(start_key.clone(), vertex);
        self.push_vertex(&start_key);
        self.start_key = Some(start_key);
        self.quantizer = Some(quantizer);
        self.session = Some(SessionConfig::of(req));
        self.session_start = Some(req.start.clone());
        self.horizon = match req.mode {
            PlanMode::Dynamic => req.t_max.map(|t| req.start.t + t),
            PlanMode::Static => None,
        };
        Ok(())
    }

    fn vertex_queue_key(&self, key: &LatticeKey) -> Option<(f64, f64)> {
        let v = self.records.get(key)?;
        let k2 = v.g.min(v.rhs);
        Some((k2 + v.h, k2))
    }

    fn goal_queue_key(&self) -> (f64, f64) {
        let k2 = self.goal_g.min(self.goal_rhs);
        (k2, k2)
    }

    /// Queue a vertex iff locally inconsistent (lazy entries; stale ones are
    /// dropped on pop by re-deriving the current key).
    fn push_vertex(&mut self, key: &LatticeKey) {
        let v = &self.records[key];
        if v.g != v.rhs {
            let k2 = v.g.min(v.rhs);
            self.queue.push(QueueEntry {
                k1: k2 + v.h,
                k2,
                node: NodeId::Key(key.clone()),
            });
        }
    }

    fn push_goal(&mut self) {
        if self.goal_g != self.goal_rhs {
            let (k1, k2) = self.goal_queue_key();
            self.queue.push(QueueEntry {
                k1,
                k2,
                node: NodeId::Goal,
            });
        }
    }

    /// Recompute `rhs` from the cached predecessor edges and queue on
    /// inconsistency. The start vertex keeps `rhs = 0` by definition.
    fn update_vertex(&mut self, key: &LatticeKey) {
        if Some(key) == self.start_key.as_ref() {
            self.push_vertex(key);
            return;
        }
        let rhs = {
            let v = &self.records[key];
            let mut best = f64::INFINITY;
            for (pk, idx) in &v.preds {
                let p = &self.records[pk];
                let c = p.succs[*idx as usize].cost();
                let cand = p.g + c;
                if cand < best {
                    best = cand;
                }
            }
            best
        };
        self.records.get_mut(key).unwrap().rhs = rhs;
        self.push_vertex(key);
    }

    fn recompute_goal_rhs(&mut self) {
        self.goal_rhs = self
            .goal_preds
            .iter()
            .map(|k| self.records[k].g)
            .fold(f64::INFINITY, f64::min);
        self.push_goal();
    }

    /// Generate and cache the successor edges of a vertex. Blocked primitives
    /// are kept at infinite map cost; statically infeasible ones are dropped
    /// for good.
    fn expand_vertex(&mut self, key: &LatticeKey, req: &PlanRequest) {
        let state = self.records[key].state.clone();
        let outcomes = evaluate_controls(&state, req, &self.controls, self.r_m, self.horizon);
        let mut edges = Vec::new();
        for outcome in outcomes {
            match outcome {
                ControlOutcome::StaticPruned => {}
                ControlOutcome::HorizonPruned => self.horizon_pruned = true,
                ControlOutcome::Edge(prim, EdgeCost { base, map, .. }) => {
                    let (aabb_lo, aabb_hi) = prim.position_aabb(self.r_m);
                    let target = self.quantizer.as_ref().unwrap().key_for(&prim.end);
                    edges.push(Edge {
                        target,
                        prim,
                        base_cost: base,
                        map_cost: map,
                        aabb_lo,
                        aabb_hi,
                    });
                }
            }
        }
        for (idx, edge) in edges.iter().enumerate() {
            if !self.records.contains_key(&edge.target) {
                let end = edge.prim.end.clone();
                let in_goal = req.goal.contains(&end);
                let vertex = Vertex {
                    h: heuristic(&end, req),
                    in_goal,
                    state: end,
                    g: f64::INFINITY,
                    rhs: f64::INFINITY,
                    expanded: false,
                    succs: Vec::new(),
                    preds: Vec::new(),
                };
                self.records.insert(edge.target.clone(), vertex);
                if in_goal {
                    self.goal_preds.push(edge.target.clone());
                }
            }
            if edge.target != *key {
                self.records
                    .get_mut(&edge.target)
                    .unwrap()
                    .preds
                    .push((key.clone(), idx as u32));
            }
        }
        let v = self.records.get_mut(key).unwrap();
        v.succs = edges;
        v.expanded = true;
    }

    /// Repair until the goal is consistent and no queued key precedes it.
    /// Returns (expansions, limit_hit).
    fn compute_shortest_path(&mut self, req: &PlanRequest) -> (usize, bool) {
        let mut expansions = 0usize;
        loop {
            // drop stale or already-consistent entries
            let top = loop {
                let Some((ek1, ek2, enode)) =
                    self.queue.peek().map(|e| (e.k1, e.k2, e.node.clone()))
                else {
                    break None;
                };
                let current = match &enode {
                    NodeId::Goal => Some(self.goal_queue_key()),
                    NodeId::Key(k) => self.vertex_queue_key(k),
                };
                let consistent = match &enode {
                    NodeId::Goal => self.goal_g == self.goal_rhs,
                    NodeId::Key(k) => self.records.get(k).is_none_or(|v| v.g == v.rhs),
                };
                match current {
                    Some((k1, k2)) if !consistent && k1 == ek1 && k2 == ek2 => {
                        break Some((ek1, ek2, enode));
                    }
                    _ => {
                        self.queue.pop();
                    }
                }
            };
            let Some((k1, k2, node)) = top else { break };
            let (gk1, gk2) = self.goal_queue_key();
            // the virtual sink is fed by zero-cost edges, so an in-goal vertex
            // can tie the goal key exactly; rank the goal node last so tied
            // vertices repair before termination is declared
            let before_goal = (k1, k2, &node) < (gk1, gk2, &NodeId::Goal);
            if !before_goal && self.goal_g == self.goal_rhs {
                break;
            }
            self.queue.pop();
            expansions += 1;
            if expansions > req.expansion_limit {
                return (expansions, true);
            }
            match node {
                NodeId::Goal => {
                    if self.goal_g > self.goal_rhs {
                        self.goal_g = self.goal_rhs;
                    } else {
                        self.goal_g = f64::INFINITY;
                        self.recompute_goal_rhs();
                    }
                }
                NodeId::Key(key) => {
                    let v = &self.records[&key];
                    if v.g > v.rhs {
                        // over-consistent: settle and relax successors
                        let new_g = v.rhs;
                        let expanded = v.expanded;
                        let in_goal = v.in_goal;
                        self.records.get_mut(&key).unwrap().g = new_g;
                        if !expanded {
                            self.expand_vertex(&key, req);
                        }
                        let succ_count = self.records[&key].succs.len();
                        for idx in 0..succ_count {
                            let (target, cand) = {
                                let v = &self.records[&key];
                                let e = &v.succs[idx];
                                (e.target.clone(), new_g + e.cost())
                            };
                            if target == key {
                                continue;
                            }
                            let t = self.records.get_mut(&target).unwrap();
                            if cand < t.rhs {
                                t.rhs = cand;
                                self.push_vertex(&target);
                            }
                        }
                        if in_goal && new_g < self.goal_rhs {
                            self.goal_rhs = new_g;
                            self.push_goal();
                        }
                    } else {
                        // under-consistent: invalidate and re-derive dependents
                        let old_g = v.g;
                        let in_goal = v.in_goal;
                        self.records.get_mut(&key).unwrap().g = f64::INFINITY;
                        self.update_vertex(&key);
                        let succ_count = self.records[&key].succs.len();
                        for idx in 0..succ_count {
                            let (target, supported) = {
                                let v = &self.records[&key];
                                let e = &v.succs[idx];
                                let t = &self.records[&e.target];
                                (e.target.clone(), t.rhs == old_g + e.cost())
                            };
                            if supported && target != key {
                                self.update_vertex(&target);
                            }
                        }
                        if in_goal && self.goal_rhs == old_g {
                            self.recompute_goal_rhs();
                        }
                    }
                }
            }
        }
        (expansions, false)
    }

    /// Re-stamp a reconstructed chain so consecutive time stamps line up.
    /// Static-mode keys carry no time, so a cached edge keeps the stamp of
    /// its first discovery even when repairs later route to it at a different
    /// depth; re-propagating restores consistent stamps without changing the
    /// geometry.
    fn retime(&self, chain: Vec<MotionPrimitive>, start: &State) -> Result<Vec<MotionPrimitive>> {
        let mut out = Vec::with_capacity(chain.len());
        let mut cursor = start.clone();
        for prim in chain {
            let rebuilt = crate::dynamics::propagate(&cursor, &prim.control, prim.dt);
            debug_assert!(
                rebuilt
                    .end
                    .pos
                    .iter()
                    .zip(&prim.end.pos)
                    .all(|(a, b)| (a - b).abs() < 1e-6),
                "re-timed chain diverged"
            );
            cursor = rebuilt.end.clone();
            out.push(rebuilt);
        }
        Ok(out)
    }

    /// Extract the optimal chain by greedy backward walk over consistent
    /// predecessors.
    fn reconstruct(&self) -> Result<Vec<MotionPrimitive>> {
        let mut cursor = self
            .goal_preds
            .iter()
            .filter(|k| self.records[*k].g.is_finite())
            .min_by(|a, b| {
                self.records[*a]
                    .g
                    .total_cmp(&self.records[*b].g)
                    .then_with(|| a.cmp(b))
            })
            .cloned()
            .ok_or_else(|| Error::InvalidConfig("no consistent goal predecessor".into()))?;
        let mut chain = Vec::new();
        let start_key = self.start_key.clone().unwrap();
        let mut guard = self.records.len() + 1;
        while cursor != start_key {
            let v = &self.records[&cursor];
            let mut best: Option<(f64, &LatticeKey, u32)> = None;
            for (pk, idx) in &v.preds {
                let p = &self.records[pk];
                let cand = p.g + p.succs[*idx as usize].cost();
                let better = match &best {
                    None => true,
                    Some((c, bk, bi)) => {
                        cand < *c - 1e-12 || ((cand - *c).abs() <= 1e-12 && (pk, *idx) < (bk, *bi))
                    }
                };
                if better {
                    best = Some((cand, pk, *idx));
                }
            }
            let (cand, pk, idx) = best.ok_or_else(|| {
                Error::InvalidConfig("dead end while reconstructing the plan".into())
            })?;
            if (cand - v.g).abs() > 1e-6 {
                return Err(Error::InvalidConfig(format!(
                    "inconsistent reconstruction: best pred gives {cand}, g is {}",
                    v.g
                )));
            }
            chain.push(self.records[pk].succs[idx as usize].prim.clone());
            cursor = pk.clone();
            guard -= 1;
            if guard == 0 {
                return Err(Error::InvalidConfig("cyclic reconstruction".into()));
            }
        }
        if let Some(prim) = &self.snap {
            chain.push(prim.clone());
        }
        chain.reverse();
        Ok(chain)
    }
}

/// Map change fed to [`update_edges`]: grid cells whose occupancy flipped
/// and/or a wholesale change of the moving-obstacle set.
#[derive(Debug, Clone, Default)]
pub struct MapDelta {
    pub changed_cells: Vec<Vec<usize>>,
    pub obstacles_changed: bool,
}

impl MapDelta {
    pub fn is_empty(&self) -> bool {
        self.changed_cells.is_empty() && !self.obstacles_changed
    }
}

/// Re-evaluate cached edges affected by a map change against the new
/// environment in `req`, update the `rhs` of their targets and queue the
/// now-inconsistent vertices. Returns how many distinct vertices became
/// inconsistent.
pub fn update_edges(graph: &mut SearchGraph, delta: &MapDelta, req: &PlanRequest) -> usize {
    if !graph.is_initialized() || delta.is_empty() {
        return 0;
    }
    // world-space boxes of the changed cells, padded so every edge whose
    // samples or potential values could differ is re-checked
    let pad = req.potential.as_ref().map(|p| p.d_thr).unwrap_or(0.0) + graph.r_m;
    let cell_boxes: Vec<(Vec<f64>, Vec<f64>)> = match &req.grid {
        Some(grid) => delta
            .changed_cells
            .iter()
            .map(|idx| {
                let c = grid.cell_center(idx);
                let half = 0.5 * grid.resolution() + pad;
                (
                    c.iter().map(|x| x - half).collect(),
                    c.iter().map(|x| x + half).collect(),
                )
            })
            .collect(),
        None => Vec::new(),
    };

    let keys: Vec<LatticeKey> = graph.records.keys().cloned().collect();
    let mut touched: Vec<(LatticeKey, usize, f64)> = Vec::new();
    for key in &keys {
        let v = &graph.records[key];
        for (idx, edge) in v.succs.iter().enumerate() {
            let cell_hit = cell_boxes
                .iter()
                .any(|(lo, hi)| boxes_overlap(&edge.aabb_lo, &edge.aabb_hi, lo, hi));
            let obstacle_hit = delta.obstacles_changed
                && (!edge.map_cost.is_finite() || {
                    let t0 = edge.prim.start.t;
                    let t1 = t0 + edge.prim.dt;
                    req.obstacles.iter().any(|o| {
                        o.swept_aabb(t0, t1).is_some_and(|(lo, hi)| {
                            boxes_overlap(&edge.aabb_lo, &edge.aabb_hi, &lo, &hi)
                        })
                    })
                });
            if cell_hit || obstacle_hit {
                let (new_map, _) = edge_map_cost(&edge.prim, req);
                if new_map != edge.map_cost
                    && !(new_map.is_infinite() && edge.map_cost.is_infinite())
                {
                    touched.push((key.clone(), idx, new_map));
                }
            }
        }
    }

    let mut dirty: HashSet<LatticeKey> = HashSet::new();
    for (key, idx, new_map) in touched {
        let target = {
            let v = graph.records.get_mut(&key).unwrap();
            v.succs[idx].map_cost = new_map;
            v.succs[idx].target.clone()
        };
        dirty.insert(target);
    }
    let mut inconsistent = 0;
    for target in dirty {
        graph.update_vertex(&target);
        let v = &graph.records[&target];
        if v.g != v.rhs {
            inconsistent += 1;
        }
    }
    inconsistent
}

fn boxes_overlap(alo: &[f64], ahi: &[f64], blo: &[f64], bhi: &[f64]) -> bool {
    alo.iter()
        .zip(ahi)
        .zip(blo.iter().zip(bhi))
        .all(|((al, ah), (bl, bh))| al <= bh && bl <= ah)
}

/// Re-root the graph at a start that advanced along the previous plan:
/// drop everything unreachable from the new start, shift the surviving
/// start-to-state costs, and queue whatever became inconsistent. No collision
/// checks or heuristic evaluations happen here.
///
/// A new start that is not a finitely-costed vertex of the graph resets the
/// session (the next plan starts fresh).
pub fn prune_graph(graph: &mut SearchGraph, new_start: &State) {
    let Some(quantizer) = &graph.quantizer else {
        return;
    };
    let new_key = quantizer.key_for(new_start);
    if Some(&new_key) == graph.start_key.as_ref() {
        return; // unchanged start
    }
    let delta = match graph.records.get(&new_key) {
        Some(v) if v.g.is_finite() => v.g,
        _ => {
            graph.reset();
            return;
        }
    };

    // reachability over cached directed edges (blocked edges included: their
    // targets stay warm for later unblocking)
    let mut retained: HashSet<LatticeKey> = HashSet::new();
    let mut frontier = VecDeque::new();
    retained.insert(new_key.clone());
    frontier.push_back(new_key.clone());
    while let Some(k) = frontier.pop_front() {
        for edge in &graph.records[&k].succs {
            if retained.insert(edge.target.clone()) {
                frontier.push_back(edge.target.clone());
            }
        }
    }

    graph.records.retain(|k, _| retained.contains(k));
    for v in graph.records.values_mut() {
        if v.g.is_finite() {
            v.g -= delta;
        }
        v.preds.retain(|(pk, _)| retained.contains(pk));
    }
    graph.goal_preds.retain(|k| retained.contains(k));
    if graph.goal_g.is_finite() {
        graph.goal_g -= delta;
    }

    // re-derive every rhs from the surviving edges; the new start overrides
    let keys: Vec<LatticeKey> = graph.records.keys().cloned().collect();
    graph.records.get_mut(&new_key).unwrap().rhs = 0.0;
    graph.start_key = Some(new_key.clone());
    graph.queue.clear();
    for key in keys {
        if key != new_key {
            let rhs = {
                let v = &graph.records[&key];
                let mut best = f64::INFINITY;
                for (pk, idx) in &v.preds {
                    let p = &graph.records[pk];
                    let cand = p.g + p.succs[*idx as usize].cost();
                    if cand < best {
                        best = cand;
                    }
                }
                best
            };
            graph.records.get_mut(&key).unwrap().rhs = rhs;
        }
        graph.push_vertex(&key);
    }
    graph.goal_rhs = graph
        .goal_preds
        .iter()
        .map(|k| graph.records[k].g)
        .fold(f64::INFINITY, f64::min);
    graph.push_goal();
    graph.snap = None;
    graph.session_start = Some(new_start.clone());
}

/// Incremental plan over the persistent graph. The first call on an empty
/// graph degenerates to A*; later calls repair only locally inconsistent
/// state and return the same optimal cost a fresh A* would.
pub fn plan_lpastar(graph: &mut SearchGraph, req: &PlanRequest) -> Result<PlanResult> {
    let clock = Instant::now();
    req.validate()?;
    if !(req.rho_t > 0.0) {
        // zero-cost lattice edges would break the termination argument of the
        // incremental repair loop
        return Err(Error::InvalidConfig(
            "incremental planning requires rho_t > 0".into(),
        ));
    }

    if req.goal.contains(&req.start) {
        return Ok(PlanResult {
            trajectory: Trajectory::empty(),
            total_cost: 0.0,
            expansions: 0,
            runtime: clock.elapsed(),
            status: PlanStatus::Success,
            snapped: false,
        });
    }
    if let Some(grid) = &req.grid {
        if grid.occupied_at_point(&req.start.pos, req.bounded_workspace) {
            return Ok(PlanResult::failure(PlanStatus::NoPath, 0, clock.elapsed()));
        }
    }

    let session = SessionConfig::of(req);
    let needs_init = !graph.is_initialized()
        || graph.session.as_ref() != Some(&session)
        || graph.session_start.as_ref() != Some(&req.start);
    if needs_init {
        graph.init_session(req)?;
    }

    let (expansions, limit_hit) = graph.compute_shortest_path(req);
    if limit_hit {
        return Ok(PlanResult::failure(
            PlanStatus::LimitReached,
            expansions,
            clock.elapsed(),
        ));
    }

    if graph.goal_g.is_finite() && graph.goal_g == graph.goal_rhs {
        let chain = graph.reconstruct()?;
        let chain = graph.retime(chain, &req.start)?;
        let snap_cost = graph
            .snap
            .as_ref()
            .map(|p| {
                let c = crate::search::edge_cost(p, req, graph.r_m);
                c.base + c.map
            })
            .unwrap_or(0.0);
        let trajectory = Trajectory::from_segments(chain)?;
        validate_trajectory(&trajectory, req)?;
        return Ok(PlanResult {
            total_cost: graph.goal_g + snap_cost,
            snapped: graph.snap.is_some(),
            trajectory,
            expansions,
            runtime: clock.elapsed(),
            status: PlanStatus::Success,
        });
    }
    let status = if graph.horizon_pruned {
        PlanStatus::HorizonExceeded
    } else {
        PlanStatus::NoPath
    };
    Ok(PlanResult::failure(status, expansions, clock.elapsed()))
}
