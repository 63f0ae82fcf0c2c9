//! Coverage for the non-default dimensions: 3D workspaces and the
//! jerk-controlled (third-order) tier.

mod common;

use kinoplan::dynamics::{propagate, ControlInput, State, SystemSpec};
use kinoplan::env::{distance_transform, Cell, OccupancyGrid};
use kinoplan::obstacles::{minkowski_inflate, ConvexPolytope, DynamicObstacle, LinearObstacle};
use kinoplan::search::{plan_astar, GoalRegion, PlanMode, PlanRequest, PlanStatus};
use rand::Rng;
use std::sync::Arc;

fn spec_3d() -> SystemSpec {
    SystemSpec {
        dim: 3,
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

#[test]
fn distance_transform_3d_matches_brute_force() {
    let mut rng = common::rng(0x3d_0001);
    let mut grid =
        OccupancyGrid::new(vec![0.0, 0.0, 0.0], 0.5, vec![12, 10, 8], Cell::Free).unwrap();
    for _ in 0..40 {
        let idx = [
            rng.random_range(0..12usize),
            rng.random_range(0..10usize),
            rng.random_range(0..8usize),
        ];
        grid.set_cell(&idx, Cell::Occupied);
    }
    let df = distance_transform(&grid);
    let oracle = common::brute_force_distance(&grid);
    for (i, want) in oracle.iter().enumerate() {
        assert_eq!(df.distance_flat(i), *want, "cell {i}");
    }
}

#[test]
fn minkowski_3d_boxes() {
    let obstacle = ConvexPolytope::axis_box(&[1.0, 2.0, 3.0], &[0.5, 1.0, 0.25]);
    let robot = ConvexPolytope::axis_box(&[0.0, 0.0, 0.0], &[0.25, 0.25, 0.5]);
    let inflated = minkowski_inflate(&obstacle, &robot).unwrap();
    // support grows each face by the robot's half-extent along its normal
    for (f_in, f_obs) in inflated.faces().iter().zip(obstacle.faces()) {
        let grow = f_in.offset - f_obs.offset;
        let along = f_obs
            .normal
            .iter()
            .zip([0.25, 0.25, 0.5])
            .map(|(a, h)| a.abs() * h)
            .sum::<f64>();
        assert!((grow - along).abs() < 1e-9);
    }
    // vertex enumeration recovered all eight corners
    assert_eq!(inflated.vertices().len(), 8);
    assert!(inflated.contains(&[1.7, 3.2, 3.7], 1e-9));
    assert!(!inflated.contains(&[1.8, 2.0, 3.0], 1e-9));
}

#[test]
fn plan_through_a_3d_window() {
    let spec = spec_3d();
    let mut grid =
        OccupancyGrid::new(vec![0.0, 0.0, 0.0], 0.5, vec![16, 8, 8], Cell::Free).unwrap();
    // a wall at x cells 7..8 with a window at (y, z) cells (3..5, 3..5)
    for x in 7..9 {
        for y in 0..8 {
            for z in 0..8 {
                if !(3..5).contains(&y) || !(3..5).contains(&z) {
                    grid.set_cell(&[x, y, z], Cell::Occupied);
                }
            }
        }
    }
    let start = State::at_rest(&spec, grid.cell_center(&[1, 1, 1]), None);
    let goal = GoalRegion::new(grid.cell_center(&[13, 1, 1]), 0.3, 1e-6, &spec);
    let mut req = PlanRequest::new(spec, start, goal);
    req.rho_t = 20.0;
    req.grid = Some(Arc::new(grid.clone()));
    let res = plan_astar(&req).unwrap();
    assert_eq!(res.status, PlanStatus::Success);
    // the plan threads the window: when crossing the wall band it stays
    // inside the opening up to the sampled checker's documented
    // corner-clipping margin (closest approach under r_M / I between samples)
    let margin = 0.0625; // r_M / (2 I_n) with I_n = 4 samples per primitive
    let mut crossed = false;
    for i in 0..=600 {
        let t = res.trajectory.duration() * i as f64 / 600.0;
        let p = res.trajectory.sample(t).unwrap().pos;
        if (3.5..4.5).contains(&p[0]) {
            crossed = true;
            assert!(
                (1.5 - margin..2.5 + margin).contains(&p[1]),
                "outside window in y: {p:?}"
            );
            assert!(
                (1.5 - margin..2.5 + margin).contains(&p[2]),
                "outside window in z: {p:?}"
            );
        }
    }
    assert!(crossed);
}

#[test]
fn moving_obstacle_avoidance_in_3d() {
    let spec = spec_3d();
    let slab = LinearObstacle {
        shape: ConvexPolytope::axis_box(&[3.25, 0.25, 2.25], &[0.6, 2.0, 0.6]),
        velocity: vec![0.0, 0.0, -1.0],
        inflation_rate: 0.1,
        active_from: 0.0,
        active_until: f64::INFINITY,
    };
    let start = State::at_rest(&spec, vec![0.25, 0.25, 0.25], None);
    let goal = GoalRegion::new(vec![6.25, 0.25, 0.25], 0.3, 1e-6, &spec);
    let mut req = PlanRequest::new(spec, start, goal);
    req.rho_t = 20.0;
    req.lattice_resolution = Some(0.5);
    req.mode = PlanMode::Dynamic;
    req.t_max = Some(20.0);
    req.obstacles = Arc::new(vec![DynamicObstacle::Linear(slab.clone())]);
    let res = plan_astar(&req).unwrap();
    assert_eq!(res.status, PlanStatus::Success);
    for seg in res.trajectory.segments() {
        if let Some(m) = common::dense_lvp_margin(seg, &slab, seg.start.t, 1e-3) {
            assert!(m > -1e-9, "3D plan clips the slab: {m}");
        }
    }
}

#[test]
fn jerk_controlled_plan_reaches_rest() {
    let spec = SystemSpec {
        dim: 2,
        order: 3,
        u_max: 1.0,
        u_levels: 3,
        dt: 1.0,
        v_max: 1.0,
        a_max: 1.0,
        j_max: Some(1.0),
        yaw: None,
    };
    let grid = OccupancyGrid::new(vec![0.0, 0.0], 0.5, vec![20, 8], Cell::Free).unwrap();
    let start = State::at_rest(&spec, vec![0.75, 1.75], None);
    let goal = GoalRegion::new(vec![6.75, 1.75], 0.35, 1e-6, &spec);
    let mut req = PlanRequest::new(spec.clone(), start, goal.clone());
    req.rho_t = 20.0;
    req.grid = Some(Arc::new(grid));
    let res = plan_astar(&req).unwrap();
    assert_eq!(res.status, PlanStatus::Success);
    let end = res.trajectory.end_state().unwrap();
    assert!(goal.contains(end));
    // velocity AND acceleration are at rest within tolerance
    assert!(end.derivs[0].iter().all(|v| v.abs() < 1e-6));
    assert!(end.derivs[1].iter().all(|a| a.abs() < 1e-6));
    // every segment respects both derivative bounds densely
    for seg in res.trajectory.segments() {
        for i in 0..=100 {
            let s = seg.dt * i as f64 / 100.0;
            let state = seg.state_at(s);
            assert!(state.derivs[0].iter().all(|v| v.abs() <= spec.v_max + 1e-6));
            assert!(state.derivs[1].iter().all(|a| a.abs() <= spec.a_max + 1e-6));
        }
    }
}

#[test]
fn jerk_controlled_markov_composition() {
    let spec = SystemSpec {
        dim: 3,
        order: 3,
        u_max: 2.0,
        u_levels: 3,
        dt: 1.0,
        v_max: 3.0,
        a_max: 2.0,
        j_max: Some(2.0),
        yaw: None,
    };
    let mut rng = common::rng(0x3d_0002);
    for _ in 0..50 {
        let s = State {
            pos: (0..3).map(|_| rng.random_range(-2.0..2.0)).collect(),
            derivs: vec![
                (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
                (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
            ],
            yaw: None,
            t: 0.0,
        };
        let u = ControlInput {
            u: (0..3).map(|_| rng.random_range(-2.0..2.0)).collect(),
            u_psi: None,
        };
        let (a, b) = (rng.random_range(0.2..1.0), rng.random_range(0.2..1.0));
        let split = propagate(&propagate(&s, &u, a).end, &u, b);
        let joint = propagate(&s, &u, a + b);
        for k in 0..3 {
            assert!((split.end.pos[k] - joint.end.pos[k]).abs() < 1e-9);
            assert!((split.end.derivs[0][k] - joint.end.derivs[0][k]).abs() < 1e-9);
            assert!((split.end.derivs[1][k] - joint.end.derivs[1][k]).abs() < 1e-9);
        }
        let _ = spec;
    }
}
