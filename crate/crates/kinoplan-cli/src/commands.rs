//! The three runner commands: one-shot planning, incremental replanning
//! simulation, and multi-robot missions. Exit codes: 0 success, 1 usage or
//! parse error, 2 no path, 3 horizon exceeded.

use crate::csvio::{trajectory_to_csv, write_atomic};
use crate::scenario::{InitialMap, Loaded, ModeSpec};
use crate::svg::{Plot, PALETTE};
use kinoplan::dynamics::{angle_diff, MotionPrimitive, Trajectory};
use kinoplan::env::{
    build_potential, distance_transform, sample_count, Cell, OccupancyGrid, Tunnel,
};
use kinoplan::obstacles::DynamicObstacle;
use kinoplan::search::{
    plan_astar, plan_lpastar, prune_graph, update_edges, yaw_cost, MapDelta, PlanMode, PlanRequest,
    PlanResult, PlanStatus, SearchGraph,
};
use serde::Serialize;
use std::path::Path;
use std::sync::Arc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOPATH: i32 = 2;
pub const EXIT_HORIZON: i32 = 3;

fn log_enabled() -> bool {
    std::env::var("KINOPLAN_LOG").is_ok_and(|v| !v.is_empty() && v != "0")
}

macro_rules! logln {
    ($($arg:tt)*) => {
        if log_enabled() {
            eprintln!($($arg)*);
        }
    };
}

fn status_name(s: PlanStatus) -> &'static str {
    match s {
        PlanStatus::Success => "success",
        PlanStatus::NoPath => "no_path",
        PlanStatus::HorizonExceeded => "horizon_exceeded",
        PlanStatus::LimitReached => "limit_reached",
    }
}

fn status_exit(s: PlanStatus) -> i32 {
    match s {
        PlanStatus::Success => EXIT_OK,
        PlanStatus::NoPath | PlanStatus::LimitReached => EXIT_NOPATH,
        PlanStatus::HorizonExceeded => EXIT_HORIZON,
    }
}

/// Weighted cost decomposition recomputed from the trajectory itself; the
/// terms sum to the planner's total cost.
#[derive(Serialize)]
struct CostBreakdown {
    j_q: f64,
    time_cost: f64,
    collision_cost: f64,
    yaw_cost: f64,
    j_c: f64,
    j_psi: f64,
}

fn breakdown(traj: &Trajectory, req: &PlanRequest) -> CostBreakdown {
    let r_m = req.resolution().unwrap_or(0.5);
    let mut j_q = 0.0;
    let mut j_c = 0.0;
    let mut j_psi = 0.0;
    for seg in traj.segments() {
        j_q += seg.control.norm_sq() * seg.dt;
        if let Some(pf) = &req.potential {
            j_c += kinoplan::env::collision_cost(seg, pf, &req.spec);
        }
        if req.spec.yaw.is_some() {
            j_psi += yaw_cost(seg, sample_count(seg, &req.spec, r_m));
        }
    }
    CostBreakdown {
        j_q,
        time_cost: req.rho_t * traj.duration(),
        collision_cost: req.rho_c * j_c,
        yaw_cost: req.rho_psi * j_psi,
        j_c,
        j_psi,
    }
}

#[derive(Serialize)]
struct PlanStats {
    status: &'static str,
    total_cost: f64,
    duration: f64,
    expansions: usize,
    runtime_ms: f64,
    snapped: bool,
    #[serde(flatten)]
    cost: CostBreakdown,
}

fn write_plan_artifacts(
    out: &Path,
    result: &PlanResult,
    req: &PlanRequest,
    loaded: &Loaded,
    svg: bool,
) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    if result.is_success() {
        write_atomic(
            &out.join("trajectory.csv"),
            &trajectory_to_csv(&result.trajectory, &req.spec),
        )?;
    }
    let stats = PlanStats {
        status: status_name(result.status),
        total_cost: result.total_cost,
        duration: result.trajectory.duration(),
        expansions: result.expansions,
        runtime_ms: result.runtime.as_secs_f64() * 1e3,
        snapped: result.snapped,
        cost: breakdown(&result.trajectory, req),
    };
    write_atomic(
        &out.join("stats.json"),
        &serde_json::to_string_pretty(&stats).expect("stats serialization"),
    )?;
    if svg {
        let mut plot = Plot::new();
        if let Some(grid) = &loaded.grid {
            plot.add_grid(grid, loaded.potential.as_deref());
        }
        for obs in &loaded.obstacles {
            plot.add_polytope(&obs.shape, "#1565c0", 0.35);
        }
        plot.add_trajectory(&result.trajectory, PALETTE[0], req.spec.yaw.is_some());
        plot.add_marker(&req.start.pos, "#2e7d32");
        plot.add_marker(&req.goal.center, "#c62828");
        write_atomic(&out.join("plot.svg"), &plot.finish())?;
    }
    Ok(())
}

pub fn run_plan(loaded: &Loaded, out: &Path, svg: bool) -> Result<i32, String> {
    let mut req = loaded.base_request()?;
    req.obstacles = Arc::new(
        loaded
            .obstacles
            .iter()
            .cloned()
            .map(DynamicObstacle::Linear)
            .collect::<Vec<_>>(),
    );

    // baseline: the potential apron becomes hard occupancy and the field
    // itself stops contributing cost
    if loaded.file.treat_potential_as_obstacles {
        let grid = req.grid.clone().ok_or("baseline mode requires a grid")?;
        let pf = req
            .potential
            .clone()
            .ok_or("baseline mode requires a potential")?;
        let mut inflated = (*grid).clone();
        for flat in 0..grid.len() {
            if pf.value_flat(flat) > 0.0 {
                inflated.set_cell(&grid.unflatten(flat), kinoplan::env::Cell::Occupied);
            }
        }
        req.grid = Some(Arc::new(inflated));
        req.potential = None;
        req.rho_c = 0.0;
    }

    // tunnel scenarios plan a nominal trajectory first, then constrain the
    // final plan to a corridor around it
    if let Some(radius) = loaded.file.tunnel_radius {
        let mut nominal_req = req.clone();
        nominal_req.rho_c = 0.0;
        nominal_req.tunnel = None;
        let nominal = plan_astar(&nominal_req).map_err(|e| e.to_string())?;
        if !nominal.is_success() {
            logln!("nominal plan failed: {}", status_name(nominal.status));
            return Ok(status_exit(nominal.status));
        }
        let step = req.resolution().map_err(|e| e.to_string())? * 0.5;
        req.tunnel = Some(Arc::new(Tunnel::around(&nominal.trajectory, radius, step)));
    }

    let result = plan_astar(&req).map_err(|e| e.to_string())?;
    logln!(
        "plan: {} cost {} expansions {} in {:?}",
        status_name(result.status),
        result.total_cost,
        result.expansions,
        result.runtime
    );
    write_plan_artifacts(out, &result, &req, loaded, svg).map_err(|e| e.to_string())?;
    Ok(status_exit(result.status))
}

#[derive(Serialize)]
struct EpochRow {
    epoch: usize,
    time: f64,
    status: &'static str,
    cost: f64,
    expansions: usize,
    runtime_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    astar_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    astar_expansions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    astar_runtime_ms: Option<f64>,
}

#[derive(Serialize)]
struct ReplanStats {
    status: &'static str,
    epochs: usize,
    goal_reached: bool,
    executed_duration: f64,
    lpa_expansions_total: usize,
    astar_expansions_total: Option<usize>,
    median_replan_ms: f64,
}

/// Reveal ground-truth cells inside the sensor wedge around the current pose.
/// Returns the indices whose working-map value changed.
fn reveal(
    working: &mut OccupancyGrid,
    truth: &OccupancyGrid,
    pose: &[f64],
    yaw: Option<f64>,
    sensor: &crate::scenario::SensorSpec,
) -> Vec<Vec<usize>> {
    let dims = working.dims().to_vec();
    let mut changed = Vec::new();
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            let idx = [x, y];
            let c = working.cell_center(&idx);
            let dx = c[0] - pose[0];
            let dy = c[1] - pose[1];
            if (dx * dx + dy * dy).sqrt() > sensor.range {
                continue;
            }
            if let Some(yaw) = yaw {
                if angle_diff(dy.atan2(dx), yaw).abs() > 0.5 * sensor.fov {
                    continue;
                }
            }
            let truth_cell = truth.cell(&idx);
            if working.cell(&idx) != truth_cell {
                working.set_cell(&idx, truth_cell);
                changed.push(idx.to_vec());
            }
        }
    }
    changed
}

pub fn run_replan_sim(
    loaded: &Loaded,
    out: &Path,
    svg: bool,
    compare_astar: bool,
) -> Result<i32, String> {
    let replan = loaded
        .file
        .replan
        .clone()
        .ok_or("scenario has no replan section")?;
    let truth_grid = loaded
        .grid
        .clone()
        .ok_or("replan simulation requires a grid")?;
    let spec = loaded.file.system.clone();
    let dtr = (replan.period / spec.dt).round();
    if (replan.period / spec.dt - dtr).abs() > 1e-9 || dtr < 1.0 {
        return Err("replan period must be a whole number of primitive durations".into());
    }

    let mut working = match replan.initial_map {
        InitialMap::Known => (*truth_grid).clone(),
        InitialMap::Unknown => OccupancyGrid::new(
            truth_grid.origin().to_vec(),
            truth_grid.resolution(),
            truth_grid.dims().to_vec(),
            Cell::Unknown,
        )
        .map_err(|e| e.to_string())?,
    };

    let base = loaded.base_request()?;
    let goal = base.goal.clone();
    let mut graph = SearchGraph::new();
    let mut state = base.start.clone();
    let mut committed: Option<Trajectory> = None;
    let mut executed: Vec<MotionPrimitive> = Vec::new();
    let mut rows: Vec<EpochRow> = Vec::new();
    let mut goal_reached = false;
    let mut last_status = PlanStatus::NoPath;

    for epoch in 0..replan.max_epochs {
        let tau = epoch as f64 * replan.period;
        if goal.contains(&state) {
            goal_reached = true;
            break;
        }

        // sense, then re-price affected cached edges, then re-root
        let mut delta = MapDelta::default();
        if let Some(sensor) = &replan.sensor {
            delta.changed_cells = reveal(&mut working, &truth_grid, &state.pos, state.yaw, sensor);
        }
        delta.obstacles_changed = !replan.scripted_obstacles.is_empty();

        let grid_arc = Arc::new(working.clone());
        let mut req = base.clone();
        req.start = state.clone();
        req.grid = Some(grid_arc.clone());
        if let Some(p) = &loaded.file.potential {
            if !delta.changed_cells.is_empty() || epoch == 0 {
                req.potential = Some(Arc::new(build_potential(
                    &distance_transform(&working),
                    p.f_max,
                    p.d_thr,
                    p.k,
                )));
            }
        }
        req.obstacles = Arc::new(
            replan
                .scripted_obstacles
                .iter()
                .map(|o| DynamicObstacle::Linear(o.observe(tau)))
                .collect::<Vec<_>>(),
        );
        if !req.obstacles.is_empty() || loaded.file.mode == Some(ModeSpec::Dynamic) {
            req.mode = PlanMode::Dynamic;
            if req.t_max.is_none() {
                req.t_max = Some(replan.period * replan.max_epochs as f64 + 30.0);
            }
        }

        // nothing changed and the commitment still stands: its suffix is
        // optimal (suffix of an optimal plan on an unchanged map), so reuse
        // it instead of re-planning
        let reusable = delta.is_empty()
            && committed.as_ref().is_some_and(|plan| {
                !plan.is_empty() && tau < plan.end_time() + 1e-9
            });
        let result = if reusable {
            let plan = committed.as_ref().unwrap();
            let suffix: Vec<MotionPrimitive> = plan
                .segments()
                .iter()
                .filter(|s| s.start.t >= tau - 1e-9)
                .cloned()
                .collect();
            let suffix = Trajectory::from_segments(suffix).map_err(|e| e.to_string())?;
            let b = breakdown(&suffix, &req);
            PlanResult {
                total_cost: b.j_q + b.time_cost + b.collision_cost + b.yaw_cost,
                trajectory: suffix,
                expansions: 0,
                runtime: std::time::Duration::ZERO,
                status: PlanStatus::Success,
                snapped: false,
            }
        } else {
            update_edges(&mut graph, &delta, &req);
            prune_graph(&mut graph, &state);
            plan_lpastar(&mut graph, &req).map_err(|e| e.to_string())?
        };
        last_status = result.status;

        let astar = compare_astar
            .then(|| plan_astar(&req).map_err(|e| e.to_string()))
            .transpose()?;
        if let Some(fresh) = &astar {
            if result.is_success()
                && fresh.is_success()
                && (result.total_cost - fresh.total_cost).abs() > 1e-9
            {
                return Err(format!(
                    "epoch {epoch}: LPA* cost {} diverged from A* cost {}",
                    result.total_cost, fresh.total_cost
                ));
            }
        }
        rows.push(EpochRow {
            epoch,
            time: tau,
            status: status_name(result.status),
            cost: result.total_cost,
            expansions: result.expansions,
            runtime_ms: result.runtime.as_secs_f64() * 1e3,
            astar_cost: astar.as_ref().map(|a| a.total_cost),
            astar_expansions: astar.as_ref().map(|a| a.expansions),
            astar_runtime_ms: astar.as_ref().map(|a| a.runtime.as_secs_f64() * 1e3),
        });
        logln!(
            "epoch {epoch}: {} cost {} expansions {}",
            status_name(result.status),
            result.total_cost,
            result.expansions
        );

        // follow the newest plan (or the previous one after a failed epoch)
        if result.is_success() {
            committed = Some(result.trajectory.clone());
        }
        match &committed {
            Some(plan) if !plan.is_empty() => {
                let until = (tau + replan.period).min(plan.end_time());
                for seg in plan.segments() {
                    if seg.start.t >= tau - 1e-9 && seg.start.t < until - 1e-9 {
                        executed.push(seg.clone());
                    }
                }
                state = plan.sample_clamped(until).unwrap_or(state);
                state.t = tau + replan.period;
            }
            _ => {
                // nowhere to go yet: hold position
                let hover = kinoplan::dynamics::propagate(
                    &state,
                    &kinoplan::dynamics::ControlInput {
                        u: vec![0.0; spec.dim],
                        u_psi: spec.yaw.map(|_| 0.0),
                    },
                    replan.period,
                );
                state = hover.end.clone();
                executed.push(hover);
            }
        }
    }
    if goal.contains(&state) {
        goal_reached = true;
    }

    std::fs::create_dir_all(out).map_err(|e| e.to_string())?;
    let executed_traj = if executed.is_empty() {
        Trajectory::empty()
    } else {
        Trajectory::from_segments(executed).map_err(|e| e.to_string())?
    };
    write_atomic(
        &out.join("executed.csv"),
        &trajectory_to_csv(&executed_traj, &spec),
    )
    .map_err(|e| e.to_string())?;

    let mut csv = String::from(
        "epoch,time,status,cost,expansions,runtime_ms,astar_cost,astar_expansions,astar_runtime_ms\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.epoch,
            r.time,
            r.status,
            r.cost,
            r.expansions,
            r.runtime_ms,
            r.astar_cost.map_or(String::new(), |v| v.to_string()),
            r.astar_expansions.map_or(String::new(), |v| v.to_string()),
            r.astar_runtime_ms.map_or(String::new(), |v| v.to_string()),
        ));
    }
    write_atomic(&out.join("epochs.csv"), &csv).map_err(|e| e.to_string())?;

    let mut runtimes: Vec<f64> = rows.iter().map(|r| r.runtime_ms).collect();
    runtimes.sort_by(f64::total_cmp);
    let stats = ReplanStats {
        status: if goal_reached {
            "success"
        } else {
            status_name(last_status)
        },
        epochs: rows.len(),
        goal_reached,
        executed_duration: executed_traj.duration(),
        lpa_expansions_total: rows.iter().map(|r| r.expansions).sum(),
        astar_expansions_total: compare_astar
            .then(|| rows.iter().filter_map(|r| r.astar_expansions).sum()),
        median_replan_ms: runtimes.get(runtimes.len() / 2).copied().unwrap_or(0.0),
    };
    write_atomic(
        &out.join("stats.json"),
        &serde_json::to_string_pretty(&stats).expect("stats serialization"),
    )
    .map_err(|e| e.to_string())?;

    if svg {
        let mut plot = Plot::new();
        plot.add_grid(&working, None);
        for o in &replan.scripted_obstacles {
            for k in 0..=4 {
                let tau = executed_traj.duration() * k as f64 / 4.0;
                plot.add_polytope(&o.shape_at(tau), "#1565c0", 0.12 + 0.08 * k as f64);
            }
        }
        plot.add_trajectory(&executed_traj, PALETTE[0], spec.yaw.is_some());
        plot.add_marker(&base.start.pos, "#2e7d32");
        plot.add_marker(&goal.center, "#c62828");
        write_atomic(&out.join("plot.svg"), &plot.finish()).map_err(|e| e.to_string())?;
    }

    Ok(if goal_reached {
        EXIT_OK
    } else {
        status_exit(last_status)
    })
}

#[derive(Serialize)]
struct TeamStatsOut {
    statuses: Vec<String>,
    all_succeeded: bool,
    clearance_pass: bool,
    expansions: Vec<usize>,
    replans: Vec<usize>,
    runtime_ms: Vec<f64>,
}

#[derive(Serialize)]
struct ClearanceOut {
    pairs: Vec<PairOut>,
    all_pass: bool,
}

#[derive(Serialize)]
struct PairOut {
    first: usize,
    second: usize,
    min_clearance: f64,
    at_time: f64,
    pass: bool,
}

pub fn run_multirobot(loaded: &Loaded, out: &Path, svg: bool) -> Result<i32, String> {
    let scenario = loaded.team_scenario()?;
    let result = match scenario.mode {
        kinoplan::multirobot::TeamMode::Sequential => {
            kinoplan::multirobot::plan_sequential(&scenario)
        }
        kinoplan::multirobot::TeamMode::Decentralized => {
            kinoplan::multirobot::plan_decentralized(&scenario)
        }
    }
    .map_err(|e| e.to_string())?;

    std::fs::create_dir_all(out).map_err(|e| e.to_string())?;
    for (robot, traj) in scenario.robots.iter().zip(&result.trajectories) {
        if let Some(traj) = traj {
            write_atomic(
                &out.join(format!("robot_{}.csv", robot.id)),
                &trajectory_to_csv(traj, &robot.spec),
            )
            .map_err(|e| e.to_string())?;
        }
    }
    let clearance = ClearanceOut {
        pairs: result
            .clearance
            .pairs
            .iter()
            .map(|p| PairOut {
                first: scenario.robots[p.first].id,
                second: scenario.robots[p.second].id,
                min_clearance: p.min_clearance,
                at_time: p.at_time,
                pass: p.pass,
            })
            .collect(),
        all_pass: result.clearance.all_pass,
    };
    write_atomic(
        &out.join("clearance.json"),
        &serde_json::to_string_pretty(&clearance).expect("clearance serialization"),
    )
    .map_err(|e| e.to_string())?;
    let stats = TeamStatsOut {
        statuses: result
            .statuses
            .iter()
            .map(|s| status_name(*s).to_string())
            .collect(),
        all_succeeded: result.all_succeeded(),
        clearance_pass: result.clearance.all_pass,
        expansions: result.stats.iter().map(|s| s.expansions).collect(),
        replans: result.stats.iter().map(|s| s.replans).collect(),
        runtime_ms: result
            .stats
            .iter()
            .map(|s| s.runtime.as_secs_f64() * 1e3)
            .collect(),
    };
    write_atomic(
        &out.join("stats.json"),
        &serde_json::to_string_pretty(&stats).expect("stats serialization"),
    )
    .map_err(|e| e.to_string())?;

    if svg {
        let mut plot = Plot::new();
        if let Some(grid) = &loaded.grid {
            plot.add_grid(grid, None);
        }
        for obs in &scenario.static_obstacles {
            plot.add_polytope(&obs.shape, "#1565c0", 0.35);
        }
        for (i, (robot, traj)) in scenario.robots.iter().zip(&result.trajectories).enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            if let Some(traj) = traj {
                plot.add_trajectory(traj, color, false);
            }
            plot.add_polytope(&robot.geometry.translated(&robot.start.pos), color, 0.5);
            plot.add_marker(&robot.goal.center, color);
        }
        write_atomic(&out.join("plot.svg"), &plot.finish()).map_err(|e| e.to_string())?;
    }

    logln!(
        "multirobot: all_succeeded {} clearance_pass {}",
        result.all_succeeded(),
        result.clearance.all_pass
    );
    Ok(if result.all_succeeded() && result.clearance.all_pass {
        EXIT_OK
    } else if result.statuses.contains(&PlanStatus::HorizonExceeded) {
        EXIT_HORIZON
    } else {
        EXIT_NOPATH
    })
}
