//! A* over the motion-primitive lattice with duplicate detection by quantized
//! keys. With the admissible, consistent heuristic the first goal expansion is
//! optimal, so vertices close on first pop.

use super::{
    expand_with_origin, heuristic, snap_start, validate_trajectory, LatticeKey, PlanMode,
    PlanRequest, PlanResult, PlanStatus, Quantizer,
};
use crate::dynamics::{MotionPrimitive, State, Trajectory};
use crate::{Error, Result};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

struct NodeRec {
    state: State,
    g: f64,
    parent: Option<(LatticeKey, MotionPrimitive)>,
    closed: bool,
}

/// Open-list entry ordered by (f ascending, g descending, key ascending).
/// Deeper states win ties so equal-cost plans resolve deterministically.
struct OpenEntry {
    f: f64,
    g: f64,
    key: LatticeKey,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenEntry {}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert f and key so the smallest pops first
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.key.cmp(&self.key))
    }
}

/// Optimal lattice plan from the request's start into its goal region.
///
/// Returns `HorizonExceeded` when a dynamic-mode frontier dies out only
/// because every extension would pass the horizon, `NoPath` when the reachable
/// lattice is exhausted, and `LimitReached` at the expansion safety stop.
pub fn plan_astar(req: &PlanRequest) -> Result<PlanResult> {
    let clock = Instant::now();
    req.validate()?;
    let quantizer = Quantizer::for_request(req)?;
    let r_m = req.resolution()?;

    // Occupied or out-of-bounds starts cannot move anywhere.
    if let Some(grid) = &req.grid {
        if grid.occupied_at_point(&req.start.pos, req.bounded_workspace) {
            return Ok(PlanResult::failure(PlanStatus::NoPath, 0, clock.elapsed()));
        }
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

    let snap = snap_start(req, &quantizer)?;
    let (search_start, snap_cost) = match &snap {
        Some(prim) => {
            let c = super::edge_cost(prim, req, r_m);
            (prim.end.clone(), c.base + c.map)
        }
        None => (req.start.clone(), 0.0),
    };

    let controls = req.control_set();
    let horizon = match req.mode {
        PlanMode::Dynamic => req.t_max.map(|t| req.start.t + t),
        PlanMode::Static => None,
    };

    let mut nodes: HashMap<LatticeKey, NodeRec> = HashMap::new();
    let mut open = BinaryHeap::new();
    let start_key = quantizer.key_for(&search_start);
    open.push(OpenEntry {
        f: heuristic(&search_start, req),
        g: 0.0,
        key: start_key.clone(),
    });
    nodes.insert(
        start_key,
        NodeRec {
            state: search_start,
            g: 0.0,
            parent: None,
            closed: false,
        },
    );

    let mut expansions = 0usize;
    let mut horizon_pruned = false;

    while let Some(entry) = open.pop() {
        let rec = nodes
            .get_mut(&entry.key)
            .expect("open entry without record");
        if rec.closed || entry.g > rec.g + 1e-12 {
            continue; // stale
        }
        rec.closed = true;
        let state = rec.state.clone();
        let g = rec.g;
        expansions += 1;

        if req.goal.contains(&state) {
            let trajectory = reconstruct(&nodes, &entry.key, &snap)?;
            let total_cost = g + snap_cost;
            validate_trajectory(&trajectory, req)?;
            return Ok(PlanResult {
                trajectory,
                total_cost,
                expansions,
                runtime: clock.elapsed(),
                status: PlanStatus::Success,
                snapped: snap.is_some(),
            });
        }
        if expansions >= req.expansion_limit {
            return Ok(PlanResult::failure(
                PlanStatus::LimitReached,
                expansions,
                clock.elapsed(),
            ));
        }

        let (succs, pruned) = expand_with_origin(&state, req, &controls, r_m, horizon);
        horizon_pruned |= pruned;
        for succ in succs {
            let key = quantizer.key_for(&succ.primitive.end);
            let tentative = g + succ.cost;
            match nodes.get_mut(&key) {
                Some(existing) => {
                    if !existing.closed && tentative < existing.g - 1e-12 {
                        existing.g = tentative;
                        existing.state = succ.primitive.end.clone();
                        existing.parent = Some((entry.key.clone(), succ.primitive));
                        open.push(OpenEntry {
                            f: tentative + heuristic(&existing.state, req),
                            g: tentative,
                            key,
                        });
                    }
                }
                None => {
                    let h = heuristic(&succ.primitive.end, req);
                    nodes.insert(
                        key.clone(),
                        NodeRec {
                            state: succ.primitive.end.clone(),
                            g: tentative,
                            parent: Some((entry.key.clone(), succ.primitive)),
                            closed: false,
                        },
                    );
                    open.push(OpenEntry {
                        f: tentative + h,
                        g: tentative,
                        key,
                    });
                }
            }
        }
    }

    let status = if horizon_pruned {
        PlanStatus::HorizonExceeded
    } else {
        PlanStatus::NoPath
    };
    Ok(PlanResult::failure(status, expansions, clock.elapsed()))
}

fn reconstruct(
    nodes: &HashMap<LatticeKey, NodeRec>,
    goal_key: &LatticeKey,
    snap: &Option<MotionPrimitive>,
) -> Result<Trajectory> {
    let mut chain = Vec::new();
    let mut cursor = goal_key.clone();
    let mut guard = nodes.len() + 1;
    loop {
        let rec = nodes
            .get(&cursor)
            .ok_or_else(|| Error::InvalidConfig("broken parent chain".into()))?;
        match &rec.parent {
            Some((pred, prim)) => {
                chain.push(prim.clone());
                cursor = pred.clone();
            }
            None => break,
        }
        guard -= 1;
        if guard == 0 {
            return Err(Error::InvalidConfig("cyclic parent chain".into()));
        }
    }
    if let Some(prim) = snap {
        chain.push(prim.clone());
    }
    chain.reverse();
    Trajectory::from_segments(chain)
}
