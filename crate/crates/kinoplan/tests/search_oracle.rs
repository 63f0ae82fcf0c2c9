//! Planner-level oracles: exhaustive enumeration equality, cost-component
//! recomputation, heuristic admissibility, LPA*/A* equivalence across
//! replanning epochs, pruning correctness, and the scalarization /
//! field-of-view monotonicity claims.

mod common;

use kinoplan::dynamics::{State, SystemSpec, YawSpec};
use kinoplan::env::{
    build_potential, distance_transform, sample_count, Cell, Tunnel,
};
use kinoplan::obstacles::{ConvexPolytope, DynamicObstacle, LinearObstacle};
use kinoplan::search::{
    expand, fov_feasible, heuristic, plan_astar, plan_lpastar, prune_graph, update_edges, yaw_cost,
    GoalRegion, MapDelta, PlanMode, PlanRequest, PlanStatus, SearchGraph,
};
use rand::rngs::StdRng;
use rand::Rng;
use std::sync::Arc;

fn spec() -> SystemSpec {
    SystemSpec {
        dim: 2,
        order: 2,
        u_max: 1.0,
        u_levels: 3,
        dt: 1.0,
        v_max: 1.0,
        a_max: 1.0,
        j_max: None,
        yaw: None,
    }
}

/// Random 20x20 world with lattice-aligned quanta (position quantum
/// u dt^2/2 = 0.5 = cell size) so duplicate detection is exact and A* is
/// comparable against exhaustive enumeration bit-for-bit.
fn random_instance(rng: &mut StdRng) -> PlanRequest {
    let spec = spec();
    let start_cell = [rng.random_range(2..18usize), rng.random_range(2..18usize)];
    let goal_cell = loop {
        // rest-to-rest lattice displacements are whole meters (even cell
        // counts), so odd offsets would be unreachable within the tolerance
        let c = [
            (start_cell[0] as i64 + 2 * rng.random_range(-2..=2)).clamp(1, 18) as usize,
            (start_cell[1] as i64 + 2 * rng.random_range(-2..=2)).clamp(1, 18) as usize,
        ];
        if c != start_cell {
            break c;
        }
    };
    let grid = common::random_grid(rng, [20, 20], 0.5, 0.12, &[start_cell, goal_cell]);
    let start = State::at_rest(&spec, grid.cell_center(&start_cell), None);
    let goal = GoalRegion::new(grid.cell_center(&goal_cell), 0.3, 1e-6, &spec);
    let mut req = PlanRequest::new(spec, start, goal);
    req.rho_t = 20.0;
    req.grid = Some(Arc::new(grid));
    req
}

#[test]
fn astar_cost_equals_exhaustive_enumeration() {
    let mut rng = common::rng(0x5a_0001);
    let mut solved = 0;
    let mut attempts = 0;
    while solved < 50 && attempts < 200 {
        attempts += 1;
        let req = random_instance(&mut rng);
        let Some(oracle) = common::enumerate_optimal_cost(&req, 6) else {
            continue;
        };
        solved += 1;
        let res = plan_astar(&req).unwrap();
        assert_eq!(res.status, PlanStatus::Success);
        assert!(
            (res.total_cost - oracle).abs() < 1e-9,
            "A* {} vs enumeration {}",
            res.total_cost,
            oracle
        );
    }
    assert_eq!(solved, 50, "could not generate enough solvable instances");
}

#[test]
fn successor_costs_decompose_into_components() {
    let mut rng = common::rng(0x5a_0002);
    let mut checked = 0;
    for _ in 0..40 {
        let mut req = random_instance(&mut rng);
        let grid = req.grid.clone().unwrap();
        let pf = build_potential(&distance_transform(&grid), 5.0, 1.0, 1.0);
        req.potential = Some(Arc::new(pf));
        req.rho_c = 2.0;
        let controls = req.control_set();
        let succ = expand(&req.start, &req, &controls);
        for s in succ {
            checked += 1;
            let effort: f64 = s.primitive.control.norm_sq() * s.primitive.dt;
            let time_term = req.rho_t * s.primitive.dt;
            let r_m = grid.resolution();
            let samples = sample_count(&s.primitive, &req.spec, r_m);
            let jc = kinoplan::env::collision_cost(
                &s.primitive,
                req.potential.as_ref().unwrap(),
                &req.spec,
            );
            let jpsi = if req.spec.yaw.is_some() {
                yaw_cost(&s.primitive, samples)
            } else {
                0.0
            };
            let want = effort + time_term + req.rho_c * jc + req.rho_psi * jpsi;
            assert!(
                (s.cost - want).abs() < 1e-9,
                "cost {} vs components {}",
                s.cost,
                want
            );
            assert!((s.collision_term - jc).abs() < 1e-12);
        }
        if checked >= 200 {
            return;
        }
    }
    assert!(checked >= 200, "too few successors checked: {checked}");
}

#[test]
fn heuristic_is_admissible_on_solvable_instances() {
    let mut rng = common::rng(0x5a_0003);
    let mut solved = 0;
    while solved < 50 {
        let req = random_instance(&mut rng);
        let Some(oracle) = common::enumerate_optimal_cost(&req, 6) else {
            continue;
        };
        solved += 1;
        assert!(heuristic(&req.start, &req) <= oracle + 1e-9);
    }
}

#[test]
fn lpastar_equals_fresh_astar_across_epochs() {
    let mut rng = common::rng(0x5a_0004);
    let spec = spec();
    let start_cell = [2usize, 10];
    let goal_cell = [30usize, 10];
    let mut grid = common::random_grid(&mut rng, [33, 20], 0.5, 0.10, &[start_cell, goal_cell]);
    let start = State::at_rest(&spec, grid.cell_center(&start_cell), None);
    let goal = GoalRegion::new(grid.cell_center(&goal_cell), 0.3, 1e-6, &spec);
    let mut req = PlanRequest::new(spec, start, goal);
    req.rho_t = 20.0;
    req.grid = Some(Arc::new(grid.clone()));

    let mut graph = SearchGraph::new();
    let mut lpa_expansions = 0usize;
    let mut astar_expansions = 0usize;
    let mut success_epochs = 0;
    for epoch in 0..25 {
        if epoch > 0 {
            // flip a few random interior cells, sparing start and goal
            let mut delta = MapDelta::default();
            for _ in 0..3 {
                let c = [rng.random_range(3..30usize), rng.random_range(1..19usize)];
                if c == start_cell || c == goal_cell {
                    continue;
                }
                let flipped = match grid.cell(&c) {
                    Cell::Occupied => Cell::Free,
                    _ => Cell::Occupied,
                };
                grid.set_cell(&c, flipped);
                delta.changed_cells.push(c.to_vec());
            }
            req.grid = Some(Arc::new(grid.clone()));
            update_edges(&mut graph, &delta, &req);
        }
        let lpa = plan_lpastar(&mut graph, &req).unwrap();
        let fresh = plan_astar(&req).unwrap();
        assert_eq!(lpa.status, fresh.status, "epoch {epoch}");
        if lpa.status == PlanStatus::Success {
            success_epochs += 1;
            assert!(
                (lpa.total_cost - fresh.total_cost).abs() < 1e-9,
                "epoch {epoch}: LPA* {} vs A* {}",
                lpa.total_cost,
                fresh.total_cost
            );
        }
        lpa_expansions += lpa.expansions;
        astar_expansions += fresh.expansions;
    }
    assert!(
        success_epochs >= 20,
        "only {success_epochs} solvable epochs"
    );
    assert!(
        lpa_expansions < astar_expansions,
        "LPA* {lpa_expansions} should expand fewer than A* {astar_expansions}"
    );
}

#[test]
fn prune_then_repair_matches_fresh_astar_over_advances() {
    let mut rng = common::rng(0x5a_0005);
    let mut advances = 0;
    while advances < 30 {
        let req0 = random_instance(&mut rng);
        let mut graph = SearchGraph::new();
        let Ok(first) = plan_lpastar(&mut graph, &req0) else {
            continue;
        };
        if first.status != PlanStatus::Success || first.trajectory.is_empty() {
            continue;
        }
        let mut req = req0.clone();
        let mut current = first;
        // walk the plan, re-rooting at each knot
        while !current.trajectory.is_empty() && advances < 30 {
            let next_start = current.trajectory.segments()[0].end.clone();
            prune_graph(&mut graph, &next_start);
            req.start = next_start;
            let incremental = plan_lpastar(&mut graph, &req).unwrap();
            let fresh = plan_astar(&req).unwrap();
            assert_eq!(incremental.status, fresh.status);
            if incremental.status != PlanStatus::Success {
                break;
            }
            assert!(
                (incremental.total_cost - fresh.total_cost).abs() < 1e-9,
                "advance {advances}: {} vs {}",
                incremental.total_cost,
                fresh.total_cost
            );
            // prefix g-values along the replanned path match its edge costs
            let mut acc = 0.0;
            for seg in incremental.trajectory.segments() {
                let g = graph.g_of(&seg.end);
                if let Some(g) = g {
                    acc += seg.control.norm_sq() * seg.dt + req.rho_t * seg.dt;
                    assert!((g - acc).abs() < 1e-9, "prefix g mismatch: {g} vs {acc}");
                }
            }
            advances += 1;
            current = incremental;
        }
    }
}

#[test]
fn update_edges_empty_delta_reports_zero() {
    let mut rng = common::rng(0x5a_0006);
    let req = random_instance(&mut rng);
    let mut graph = SearchGraph::new();
    let _ = plan_lpastar(&mut graph, &req).unwrap();
    assert_eq!(update_edges(&mut graph, &MapDelta::default(), &req), 0);
}

#[test]
fn scalarization_monotonicity_with_tunnel() {
    let mut rng = common::rng(0x5a_0007);
    let mut done = 0;
    let mut clearance_improved = 0;
    while done < 10 {
        let mut req = random_instance(&mut rng);
        let grid = req.grid.clone().unwrap();
        let pf = Arc::new(build_potential(&distance_transform(&grid), 8.0, 1.0, 1.0));
        req.potential = Some(pf.clone());
        req.rho_c = 0.0;
        let nominal = plan_astar(&req).unwrap();
        if nominal.status != PlanStatus::Success || nominal.trajectory.is_empty() {
            continue;
        }
        let mut safe_req = req.clone();
        safe_req.rho_c = 5.0;
        safe_req.tunnel = Some(Arc::new(Tunnel::around(&nominal.trajectory, 1.5, 0.25)));
        let safe = plan_astar(&safe_req).unwrap();
        if safe.status != PlanStatus::Success {
            continue;
        }
        done += 1;
        let jc = |traj: &kinoplan::dynamics::Trajectory| -> f64 {
            traj.segments()
                .iter()
                .map(|s| kinoplan::env::collision_cost(s, &pf, &safe_req.spec))
                .sum()
        };
        let jc_nominal = jc(&nominal.trajectory);
        let jc_safe = jc(&safe.trajectory);
        assert!(
            jc_safe <= jc_nominal + 1e-9,
            "J_c rose under rho_c > 0: {jc_safe} vs {jc_nominal}"
        );
        // soft check material: minimum obstacle clearance should usually not
        // get worse
        let df = distance_transform(&grid);
        let min_clear = |traj: &kinoplan::dynamics::Trajectory| -> f64 {
            let mut m = f64::INFINITY;
            for i in 0..=200 {
                let t = traj.duration() * i as f64 / 200.0;
                let p = traj.sample(t).unwrap().pos;
                if let Some(idx) = grid.world_to_cell(&p) {
                    m = m.min(df.distance_at_cell(&idx));
                }
            }
            m
        };
        if min_clear(&safe.trajectory) >= min_clear(&nominal.trajectory) - 1e-9 {
            clearance_improved += 1;
        }
    }
    assert!(
        clearance_improved >= 7,
        "clearance improved only {clearance_improved}/10"
    );
}

#[test]
fn fov_constraint_lengthens_plans() {
    let spec = SystemSpec {
        v_max: 1.0,
        yaw: Some(YawSpec {
            rate_max: std::f64::consts::FRAC_PI_4,
            levels: 3,
        }),
        ..spec()
    };
    // start moving +x while the goal sits up-left: the constrained run must
    // rotate before moving off
    let mut start = State::at_rest(&spec, vec![3.25, 0.75], Some(0.0));
    start.derivs[0] = vec![1.0, 0.0];
    let goal = GoalRegion::new(vec![0.75, 3.75], 0.3, 1e-6, &spec);
    let mut req = PlanRequest::new(spec, start, goal);
    req.rho_t = 20.0;
    req.lattice_resolution = Some(0.5);

    let free = plan_astar(&req).unwrap();
    assert_eq!(free.status, PlanStatus::Success);

    let mut constrained_req = req.clone();
    constrained_req.rho_psi = 1.0;
    constrained_req.fov = std::f64::consts::FRAC_PI_2;
    let constrained = plan_astar(&constrained_req).unwrap();
    assert_eq!(constrained.status, PlanStatus::Success);

    assert!(
        constrained.trajectory.duration() >= free.trajectory.duration() - 1e-9,
        "constrained {} vs free {}",
        constrained.trajectory.duration(),
        free.trajectory.duration()
    );
    // hard bound holds on every sampled point of the returned trajectory
    for seg in constrained.trajectory.segments() {
        let n = kinoplan::search::fov_sample_count(seg, &constrained_req.spec, 0.5);
        assert!(fov_feasible(seg, constrained_req.fov, n));
    }
}

#[test]
fn dynamic_obstacle_forces_wait_and_time_augmentation() {
    let spec = spec();
    // a slab descends across the straight-line path exactly during transit
    let slab = LinearObstacle {
        shape: ConvexPolytope::axis_box(&[2.75, 3.25], &[0.8, 1.0]),
        velocity: vec![0.0, -1.0],
        inflation_rate: 0.0,
        active_from: 0.0,
        active_until: f64::INFINITY,
    };
    let start = State::at_rest(&spec, vec![0.25, 0.25], None);
    let goal = GoalRegion::new(vec![5.25, 0.25], 0.3, 1e-6, &spec);
    let mut req = PlanRequest::new(spec, start, goal);
    req.rho_t = 20.0;
    req.lattice_resolution = Some(0.5);
    req.mode = PlanMode::Dynamic;
    req.t_max = Some(30.0);
    req.obstacles = Arc::new(vec![DynamicObstacle::Linear(slab)]);

    let res = plan_astar(&req).unwrap();
    assert_eq!(res.status, PlanStatus::Success);
    // unobstructed optimum: accelerate/cruise/brake over 5 m at v_max 1 = 6 s
    let unobstructed = {
        let mut open = req.clone();
        open.obstacles = Arc::new(Vec::new());
        open.mode = PlanMode::Static;
        open.t_max = None;
        plan_astar(&open).unwrap()
    };
    // avoidance costs extra effort or extra time, never comes free
    assert!(res.total_cost > unobstructed.total_cost + 1e-6);
    // and the returned plan really is clear of the slab
    let slab = match req.obstacles.first().unwrap() {
        DynamicObstacle::Linear(o) => o.clone(),
        _ => unreachable!(),
    };
    for seg in res.trajectory.segments() {
        let margin = common::dense_lvp_margin(seg, &slab, seg.start.t, 1e-3);
        assert!(
            margin.is_none_or(|m| m > -1e-9),
            "plan clips the slab: {margin:?}"
        );
    }
}

#[test]
fn permanently_blocked_goal_exceeds_horizon() {
    let spec = spec();
    let parked = LinearObstacle::new_static(ConvexPolytope::axis_box(&[4.25, 0.25], &[1.0, 1.0]));
    let start = State::at_rest(&spec, vec![0.25, 0.25], None);
    let goal = GoalRegion::new(vec![4.25, 0.25], 0.3, 1e-6, &spec);
    let mut req = PlanRequest::new(spec, start, goal);
    req.rho_t = 20.0;
    req.lattice_resolution = Some(0.5);
    req.mode = PlanMode::Dynamic;
    req.t_max = Some(8.0);
    req.obstacles = Arc::new(vec![DynamicObstacle::Linear(parked)]);
    let res = plan_astar(&req).unwrap();
    assert_eq!(res.status, PlanStatus::HorizonExceeded);
}

#[test]
fn plans_are_deterministic() {
    let mut rng = common::rng(0x5a_0008);
    for _ in 0..5 {
        let req = random_instance(&mut rng);
        let a = plan_astar(&req).unwrap();
        let b = plan_astar(&req).unwrap();
        assert_eq!(a.status, b.status);
        if a.status == PlanStatus::Success {
            assert_eq!(a.total_cost, b.total_cost);
            assert_eq!(a.trajectory.segments().len(), b.trajectory.segments().len());
            for (x, y) in a.trajectory.segments().iter().zip(b.trajectory.segments()) {
                assert_eq!(x.control.u, y.control.u);
            }
        }
    }
}

#[test]
fn returned_dynamic_plans_survive_dense_revalidation() {
    // independent re-validation of whole returned trajectories with dense
    // oracles rather than the planner's own sampled checks
    let mut rng = common::rng(0x5a_0009);
    let spec = spec();
    let mut validated = 0;
    while validated < 15 {
        let grid = common::random_grid(&mut rng, [16, 16], 0.5, 0.08, &[[1, 8], [14, 8]]);
        let slab = LinearObstacle {
            shape: ConvexPolytope::axis_box(
                &[rng.random_range(2.0..6.0), rng.random_range(1.0..7.0)],
                &[rng.random_range(0.3..0.8), rng.random_range(0.3..0.8)],
            ),
            velocity: vec![rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)],
            inflation_rate: 0.0,
            active_from: 0.0,
            active_until: f64::INFINITY,
        };
        let start = State::at_rest(&spec, grid.cell_center(&[1, 8]), None);
        let goal = GoalRegion::new(grid.cell_center(&[13, 8]), 0.3, 1e-6, &spec);
        let mut req = PlanRequest::new(spec.clone(), start, goal.clone());
        req.rho_t = 20.0;
        req.grid = Some(Arc::new(grid.clone()));
        req.mode = PlanMode::Dynamic;
        req.t_max = Some(25.0);
        req.obstacles = Arc::new(vec![DynamicObstacle::Linear(slab.clone())]);
        let Ok(res) = plan_astar(&req) else { continue };
        if res.status != PlanStatus::Success || res.trajectory.is_empty() {
            continue;
        }
        validated += 1;

        // dense dynamic-obstacle check
        for seg in res.trajectory.segments() {
            if let Some(m) = common::dense_lvp_margin(seg, &slab, seg.start.t, 1e-3) {
                assert!(m > -1e-9, "dynamic clearance violated: {m}");
            }
        }
        // dense static check with the documented corner-clipping margin:
        // strictly-interior violations (beyond half a cell from any sampled
        // point) would be a planner bug
        let mut t = 0.0;
        let mut interior_violations = 0;
        while t <= res.trajectory.duration() {
            let p = res.trajectory.sample(t).unwrap().pos;
            if let Some(idx) = grid.world_to_cell(&p) {
                if grid.cell(&idx) == Cell::Occupied {
                    let c = grid.cell_center(&idx);
                    let depth = p
                        .iter()
                        .zip(&c)
                        .map(|(a, b)| 0.25 - (a - b).abs())
                        .fold(f64::INFINITY, f64::min);
                    if depth > 0.07 {
                        interior_violations += 1;
                    }
                }
            } else {
                panic!("plan left the bounded workspace");
            }
            t += 1e-3;
        }
        assert_eq!(interior_violations, 0);
        // dense dynamic-bound check
        let mut t = 0.0;
        while t <= res.trajectory.duration() {
            let s = res.trajectory.sample(t).unwrap();
            assert!(s.derivs[0].iter().all(|v| v.abs() <= spec.v_max + 1e-6));
            t += 1e-3;
        }
        // the end state really is in the goal region
        assert!(goal.contains(res.trajectory.end_state().unwrap()));
    }
}
