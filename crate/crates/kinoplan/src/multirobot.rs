//! Team planning: sequential prioritized planning and round-based
//! decentralized replanning, both reducing to single-robot searches with the
//! other robots encoded as moving polyhedral obstacles.

use crate::dynamics::{MotionPrimitive, State, SystemSpec, Trajectory};
use crate::env::{OccupancyGrid, PotentialField};
use crate::obstacles::{
    minkowski_inflate, stopping_cutoff, ConvexPolytope, DynamicObstacle, LinearObstacle,
    RobotObstacle,
};
use crate::search::{plan_astar, GoalRegion, PlanMode, PlanRequest, PlanStatus};
use crate::{parallel, Error, Result};
use std::sync::Arc;
use std::time::Duration;

/// One robot of the team.
#[derive(Debug, Clone)]
pub struct RobotConfig {
    pub id: usize,
    /// Collision geometry centered at the robot's reference point; must be
    /// centrally symmetric.
    pub geometry: ConvexPolytope,
    pub spec: SystemSpec,
    pub start: State,
    pub goal: GoalRegion,
    /// Decentralized replan period; falls back to the scenario default.
    pub replan_period: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TeamMode {
    Sequential,
    Decentralized,
}

/// A complete team planning problem.
#[derive(Debug, Clone)]
pub struct TeamScenario {
    pub robots: Vec<RobotConfig>,
    pub grid: Option<Arc<OccupancyGrid>>,
    pub potential: Option<Arc<PotentialField>>,
    pub static_obstacles: Vec<LinearObstacle>,
    pub mode: TeamMode,
    pub replan_period: f64,
    /// Maximum replanning rounds per robot in decentralized mode.
    pub rounds: usize,
    pub rho_t: f64,
    pub rho_c: f64,
    pub t_max: f64,
    pub bounded_workspace: bool,
    pub lattice_resolution: Option<f64>,
}

impl TeamScenario {
    pub fn validate(&self) -> Result<()> {
        if self.robots.is_empty() {
            return Err(Error::InvalidConfig("team has no robots".into()));
        }
        let mut ids: Vec<usize> = self.robots.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.robots.len() {
            return Err(Error::InvalidConfig("robot ids must be unique".into()));
        }
        if !(self.replan_period > 0.0) || !(self.t_max > 0.0) {
            return Err(Error::InvalidConfig(
                "replan period and t_max must be positive".into(),
            ));
        }
        for r in &self.robots {
            r.spec.validate()?;
            r.goal.validate()?;
            let period = r.replan_period.unwrap_or(self.replan_period);
            let ratio = period / r.spec.dt;
            if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 - 1e-9 {
                return Err(Error::InvalidConfig(format!(
                    "robot {}: replan period {period} must be a whole number of primitives",
                    r.id
                )));
            }
            // a robot executing one period must stay covered by the windows
            // other robots checked: the stopping cutoff has to reach past
            // the commitments' age, which is up to one period
            if self.mode == TeamMode::Decentralized
                && r.spec.order == 2
                && r.spec.v_max / r.spec.a_max < period - 1e-9
            {
                return Err(Error::InvalidConfig(format!(
                    "robot {}: stopping cutoff v_max/a_max = {} is shorter than the replan period {period}; commitments would go unchecked",
                    r.id,
                    r.spec.v_max / r.spec.a_max
                )));
            }
        }
        // starts must be pairwise clear under Minkowski inflation at t = 0
        for i in 0..self.robots.len() {
            for j in 0..self.robots.len() {
                if i == j {
                    continue;
                }
                let (a, b) = (&self.robots[i], &self.robots[j]);
                let inflated = minkowski_inflate(&b.geometry, &a.geometry)?;
                let delta: Vec<f64> = a
                    .start
                    .pos
                    .iter()
                    .zip(&b.start.pos)
                    .map(|(x, y)| x - y)
                    .collect();
                if inflated.contains(&delta, -1e-9) {
                    return Err(Error::InvalidConfig(format!(
                        "robots {} and {} start in contact",
                        a.id, b.id
                    )));
                }
            }
        }
        Ok(())
    }

    fn base_request(&self, robot: &RobotConfig, start: State) -> PlanRequest {
        let mut req = PlanRequest::new(robot.spec.clone(), start, robot.goal.clone());
        req.rho_t = self.rho_t;
        req.rho_c = self.rho_c;
        req.grid = self.grid.clone();
        req.potential = self.potential.clone();
        req.bounded_workspace = self.bounded_workspace;
        req.lattice_resolution = self.lattice_resolution;
        req
    }
}

/// Per-robot planning statistics.
#[derive(Debug, Clone, Default)]
pub struct RobotStats {
    pub expansions: usize,
    pub runtime: Duration,
    pub replans: usize,
    /// Cost of the robot's latest successful plan.
    pub last_cost: f64,
}

/// Signed clearance history of one robot pair.
#[derive(Debug, Clone)]
pub struct PairClearance {
    pub first: usize,
    pub second: usize,
    pub min_clearance: f64,
    pub at_time: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ClearanceReport {
    pub pairs: Vec<PairClearance>,
    pub all_pass: bool,
}

/// Team planning outcome: per-robot trajectories (committed for sequential,
/// executed for decentralized), statuses, statistics and the pairwise
/// verification report.
#[derive(Debug)]
pub struct TeamResult {
    pub trajectories: Vec<Option<Trajectory>>,
    pub statuses: Vec<PlanStatus>,
    pub stats: Vec<RobotStats>,
    pub clearance: ClearanceReport,
}

impl TeamResult {
    pub fn all_succeeded(&self) -> bool {
        self.statuses.iter().all(|s| *s == PlanStatus::Success)
    }
}

/// A position source for pairwise verification: a trajectory when one exists,
/// otherwise a fixed rest position.
#[derive(Debug, Clone)]
pub struct VerifyTrack {
    pub trajectory: Option<Trajectory>,
    pub rest_position: Vec<f64>,
    pub geometry: ConvexPolytope,
}

impl VerifyTrack {
    fn position_at(&self, t: f64) -> Vec<f64> {
        match &self.trajectory {
            Some(traj) if !traj.is_empty() => traj
                .position_clamped(t)
                .unwrap_or_else(|| self.rest_position.clone()),
            _ => self.rest_position.clone(),
        }
    }

    fn time_span(&self) -> (f64, f64) {
        match &self.trajectory {
            Some(traj) if !traj.is_empty() => (traj.start_time(), traj.end_time()),
            _ => (0.0, 0.0),
        }
    }
}

/// Dense-sampled verification of the pairwise Minkowski separation condition.
/// Robots hold their first/last pose outside their trajectory domain. The
/// clearance is the normalized worst face margin: negative iff the reference
/// point of one robot sits inside the other's inflated polytope.
pub fn verify_pairwise(tracks: &[VerifyTrack], step: f64, tol: f64) -> Result<ClearanceReport> {
    assert!(step > 0.0, "sampling step must be positive");
    let mut pairs = Vec::new();
    let mut all_pass = true;
    let span = tracks
        .iter()
        .map(VerifyTrack::time_span)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, (lo, hi)| {
            (acc.0.min(lo), acc.1.max(hi))
        });
    let (t0, t1) = if span.0.is_finite() { span } else { (0.0, 0.0) };
    let samples = ((t1 - t0) / step).ceil() as usize + 1;

    for i in 0..tracks.len() {
        for j in (i + 1)..tracks.len() {
            let inflated = minkowski_inflate(&tracks[j].geometry, &tracks[i].geometry)?;
            let faces = inflated.faces();
            let clearances = parallel::map_indices(samples, |k| {
                let t = t0 + step * k as f64;
                let pi = tracks[i].position_at(t);
                let pj = tracks[j].position_at(t);
                let delta: Vec<f64> = pi.iter().zip(&pj).map(|(a, b)| a - b).collect();
                faces
                    .iter()
                    .map(|f| {
                        let n: f64 = f.normal.iter().map(|x| x * x).sum::<f64>().sqrt();
                        (f.normal.iter().zip(&delta).map(|(a, d)| a * d).sum::<f64>() - f.offset)
                            / n.max(1e-12)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            });
            let (min_clearance, at) = clearances
                .iter()
                .enumerate()
                .map(|(k, c)| (*c, t0 + step * k as f64))
                .fold(
                    (f64::INFINITY, 0.0),
                    |acc, (c, t)| if c < acc.0 { (c, t) } else { acc },
                );
            let pass = min_clearance > -tol;
            all_pass &= pass;
            pairs.push(PairClearance {
                first: i,
                second: j,
                min_clearance,
                at_time: at,
                pass,
            });
        }
    }
    Ok(ClearanceReport { pairs, all_pass })
}

fn static_obstacle_at(geometry_inflated: ConvexPolytope, pose: &[f64]) -> DynamicObstacle {
    DynamicObstacle::Linear(LinearObstacle::new_static(
        geometry_inflated.translated(pose),
    ))
}

/// `result[i][j]`: robot j's geometry inflated by robot i's shape, the
/// polytope robot i's reference trajectory must avoid around j.
fn pairwise_inflations(scenario: &TeamScenario) -> Result<Vec<Vec<ConvexPolytope>>> {
    let n = scenario.robots.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            row.push(minkowski_inflate(
                &scenario.robots[j].geometry,
                &scenario.robots[i].geometry,
            )?);
        }
        out.push(row);
    }
    Ok(out)
}

fn result_tracks(scenario: &TeamScenario, trajectories: &[Option<Trajectory>]) -> Vec<VerifyTrack> {
    scenario
        .robots
        .iter()
        .zip(trajectories)
        .map(|(r, t)| VerifyTrack {
            trajectory: t.clone(),
            rest_position: r.start.pos.clone(),
            geometry: r.geometry.clone(),
        })
        .collect()
}

/// Sequential prioritized planning: robots plan in list order, each against
/// the committed trajectories of all higher-priority robots (full duration,
/// no cutoff; finished robots stay as static obstacles at their final state).
/// A failed robot keeps its start pose and blocks lower priorities there.
pub fn plan_sequential(scenario: &TeamScenario) -> Result<TeamResult> {
    scenario.validate()?;
    if scenario.mode != TeamMode::Sequential {
        return Err(Error::InvalidConfig(
            "scenario mode is not sequential".into(),
        ));
    }
    let n = scenario.robots.len();
    let mut committed: Vec<Option<Arc<Trajectory>>> = vec![None; n];
    let mut statuses = vec![PlanStatus::NoPath; n];
    let mut stats = vec![RobotStats::default(); n];
    let inflated_pairs = pairwise_inflations(scenario)?;

    for i in 0..n {
        let robot = &scenario.robots[i];
        let mut obstacles: Vec<DynamicObstacle> = scenario
            .static_obstacles
            .iter()
            .cloned()
            .map(DynamicObstacle::Linear)
            .collect();
        for j in 0..i {
            let other = &scenario.robots[j];
            let inflated = inflated_pairs[i][j].clone();
            match &committed[j] {
                Some(traj) if !traj.is_empty() => {
                    obstacles.push(DynamicObstacle::Robot(RobotObstacle::new(
                        inflated,
                        traj.clone(),
                        0.0,
                        traj.duration(),
                        false,
                    )?));
                }
                // failed or instantly-finished robots block at their pose
                Some(_) => obstacles.push(static_obstacle_at(inflated, &other.start.pos)),
                None => obstacles.push(static_obstacle_at(inflated, &other.start.pos)),
            }
        }
        let mut req = scenario.base_request(robot, robot.start.clone());
        if obstacles.is_empty() {
            req.mode = PlanMode::Static;
        } else {
            req.mode = PlanMode::Dynamic;
            req.t_max = Some(scenario.t_max);
            req.obstacles = Arc::new(obstacles);
        }
        let result = plan_astar(&req)?;
        statuses[i] = result.status;
        stats[i] = RobotStats {
            expansions: result.expansions,
            runtime: result.runtime,
            replans: 1,
            last_cost: result.total_cost,
        };
        if result.is_success() {
            committed[i] = Some(Arc::new(result.trajectory));
        }
    }

    let trajectories: Vec<Option<Trajectory>> = committed
        .iter()
        .map(|c| c.as_ref().map(|t| (**t).clone()))
        .collect();
    let clearance = verify_pairwise(&result_tracks(scenario, &trajectories), 1e-3, 1e-6)?;
    Ok(TeamResult {
        trajectories,
        statuses,
        stats,
        clearance,
    })
}

/// Decentralized planning: a discrete-event simulation on the shared clock.
/// At its own replan tick each robot snapshots the other robots' current
/// commitments, plans from its predicted state with their trajectories cut
/// off at the stopping horizon, and commits the result. Ties run in id order;
/// the whole simulation is deterministic.
pub fn plan_decentralized(scenario: &TeamScenario) -> Result<TeamResult> {
    scenario.validate()?;
    if scenario.mode != TeamMode::Decentralized {
        return Err(Error::InvalidConfig(
            "scenario mode is not decentralized".into(),
        ));
    }
    let n = scenario.robots.len();
    let mut commits: Vec<Option<Arc<Trajectory>>> = vec![None; n];
    let mut executed: Vec<Vec<MotionPrimitive>> = vec![Vec::new(); n];
    let mut executed_until = vec![0.0_f64; n];
    let mut finished = vec![false; n];
    let mut statuses = vec![PlanStatus::NoPath; n];
    let mut stats = vec![RobotStats::default(); n];
    let inflated_pairs = pairwise_inflations(scenario)?;

    // deterministic tick schedule: (time, id), simultaneous ticks by id
    let mut ticks: Vec<(f64, usize)> = Vec::new();
    for (i, r) in scenario.robots.iter().enumerate() {
        let period = r.replan_period.unwrap_or(scenario.replan_period);
        for k in 0..scenario.rounds {
            ticks.push((period * k as f64, i));
        }
    }
    ticks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    for (tau, i) in ticks {
        if finished[i] {
            continue;
        }
        let robot = &scenario.robots[i];
        // predicted state on the robot's own commitment at the tick time
        let mut start = match &commits[i] {
            Some(traj) if !traj.is_empty() => traj
                .sample_clamped(tau)
                .unwrap_or_else(|| robot.start.clone()),
            _ => robot.start.clone(),
        };
        start.t = tau;

        if robot.goal.contains(&start)
            && commits[i]
                .as_ref()
                .is_none_or(|t| t.is_empty() || tau >= t.end_time() - 1e-9)
        {
            // commitment exhausted inside the goal region: park
            finish_robot(i, tau, &mut executed, &mut executed_until, &commits);
            finished[i] = true;
            statuses[i] = PlanStatus::Success;
            continue;
        }

        let mut obstacles: Vec<DynamicObstacle> = scenario
            .static_obstacles
            .iter()
            .cloned()
            .map(DynamicObstacle::Linear)
            .collect();
        for j in 0..n {
            if j == i {
                continue;
            }
            let other = &scenario.robots[j];
            let inflated = inflated_pairs[i][j].clone();
            match &commits[j] {
                Some(traj) if !traj.is_empty() && tau < traj.end_time() - 1e-9 => {
                    let cutoff = stopping_cutoff(&other.spec, traj.duration());
                    obstacles.push(DynamicObstacle::Robot(RobotObstacle::new(
                        inflated,
                        traj.clone(),
                        tau,
                        cutoff,
                        true,
                    )?));
                }
                _ if finished[j] => {
                    // parked for good: a permanent polytope at its final pose
                    let pose = commits[j]
                        .as_ref()
                        .and_then(|t| t.end_state().map(|s| s.pos.clone()))
                        .unwrap_or_else(|| other.start.pos.clone());
                    obstacles.push(static_obstacle_at(inflated, &pose));
                }
                _ => {
                    // active robot without a live commitment: it hovers until
                    // its next replan, so model that hover as a short
                    // commitment under the usual cutoff rule rather than as a
                    // permanent wall (it is expected to move)
                    let pose = commits[j]
                        .as_ref()
                        .and_then(|t| t.end_state().map(|s| s.pos.clone()))
                        .unwrap_or_else(|| other.start.pos.clone());
                    let period = other.replan_period.unwrap_or(scenario.replan_period);
                    let mut rest = State::at_rest(&other.spec, pose, None);
                    rest.t = tau;
                    let hover = crate::dynamics::propagate(
                        &rest,
                        &crate::dynamics::ControlInput {
                            u: vec![0.0; other.spec.dim],
                            u_psi: None,
                        },
                        period,
                    );
                    let hover_traj = Arc::new(Trajectory::from_segments(vec![hover])?);
                    let cutoff = stopping_cutoff(&other.spec, period);
                    obstacles.push(DynamicObstacle::Robot(RobotObstacle::new(
                        inflated, hover_traj, tau, cutoff, true,
                    )?));
                }
            }
        }

        let mut req = scenario.base_request(robot, start);
        req.mode = PlanMode::Dynamic;
        req.t_max = Some(scenario.t_max);
        req.obstacles = Arc::new(obstacles);
        let result = plan_astar(&req)?;
        stats[i].expansions += result.expansions;
        stats[i].runtime += result.runtime;
        stats[i].replans += 1;
        statuses[i] = result.status;
        if result.is_success() {
            stats[i].last_cost = result.total_cost;
        }
        if result.is_success() {
            // log the piece of the old commitment that was actually flown
            if let Some(old) = &commits[i] {
                append_executed(&mut executed[i], old, executed_until[i], tau);
            }
            executed_until[i] = tau;
            commits[i] = Some(Arc::new(result.trajectory));
        }
        // on failure the previous commitment keeps executing; retry next tick
    }

    // flush the tails of the final commitments
    for i in 0..n {
        if !finished[i] {
            let tau = commits[i].as_ref().map(|t| t.end_time()).unwrap_or(0.0);
            finish_robot(i, tau, &mut executed, &mut executed_until, &commits);
            // a robot that never finished within the round budget keeps its
            // last planner status
            if statuses[i] == PlanStatus::Success {
                let at_goal = executed[i]
                    .last()
                    .map(|p| scenario.robots[i].goal.contains(&p.end))
                    .unwrap_or_else(|| scenario.robots[i].goal.contains(&scenario.robots[i].start));
                if !at_goal {
                    statuses[i] = PlanStatus::NoPath;
                }
            }
        }
    }

    let trajectories: Vec<Option<Trajectory>> = executed
        .into_iter()
        .map(|segs| {
            if segs.is_empty() {
                Some(Trajectory::empty())
            } else {
                Trajectory::from_segments(segs).ok()
            }
        })
        .collect();
    let clearance = verify_pairwise(&result_tracks(scenario, &trajectories), 1e-3, 1e-6)?;
    Ok(TeamResult {
        trajectories,
        statuses,
        stats,
        clearance,
    })
}

fn finish_robot(
    i: usize,
    tau: f64,
    executed: &mut [Vec<MotionPrimitive>],
    executed_until: &mut [f64],
    commits: &[Option<Arc<Trajectory>>],
) {
    if let Some(traj) = &commits[i] {
        append_executed(
            &mut executed[i],
            traj,
            executed_until[i],
            tau.max(traj.end_time()),
        );
        executed_until[i] = tau.max(traj.end_time());
    }
}

/// Append the segments of `traj` whose span lies in `[from, to)` to the
/// executed log. Replan ticks align with primitive knots, so whole segments
/// transfer.
fn append_executed(log: &mut Vec<MotionPrimitive>, traj: &Trajectory, from: f64, to: f64) {
    for seg in traj.segments() {
        if seg.start.t >= from - 1e-9 && seg.start.t < to - 1e-9 {
            log.push(seg.clone());
        }
    }
}
