//! Independent oracles shared by the integration suites: dense scans,
//! numerical integration, brute-force geometry and exhaustive enumeration.
//! These deliberately avoid the library's search machinery; where they reuse
//! kernel predicates (collision sampling rules), those predicates are the
//! defined semantics and are themselves oracle-tested.

#![allow(dead_code)]

use kinoplan::dynamics::{
    check_dynamic_feasibility, primitive_cost, propagate, ControlInput, MotionPrimitive, State,
};
use kinoplan::env::{collision_cost, primitive_collides_static, Cell, OccupancyGrid};
use kinoplan::obstacles::LinearObstacle;
use kinoplan::poly::Polynomial;
use kinoplan::search::PlanRequest;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Dense sign-scan root finder: scan at `step`, bisect each bracket to 1e-12.
/// Misses even-multiplicity roots, so callers feed it generic polynomials.
pub fn scan_roots(p: &Polynomial, lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut roots = Vec::new();
    let n = ((hi - lo) / step).ceil() as usize;
    let mut prev_t = lo;
    let mut prev_v = p.evaluate(lo);
    if prev_v == 0.0 {
        roots.push(lo);
    }
    for i in 1..=n {
        let t = (lo + step * i as f64).min(hi);
        let v = p.evaluate(t);
        if v == 0.0 {
            roots.push(t);
        } else if prev_v != 0.0 && (prev_v < 0.0) != (v < 0.0) {
            let (mut a, mut b) = (prev_t, t);
            let mut fa = prev_v;
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let fm = p.evaluate(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if (fa < 0.0) != (fm < 0.0) {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_t = t;
        prev_v = v;
    }
    roots.dedup_by(|b, a| (*b - *a).abs() < 1e-9);
    roots
}

/// RK4 integration of the chain-of-integrators system under constant control.
pub fn rk4_end_state(start: &State, u: &[f64], dt: f64, h: f64) -> State {
    let dim = start.pos.len();
    let order = start.derivs.len() + 1;
    // stacked state: [pos, d1, ..., d_{order-1}]
    let mut x: Vec<f64> = start.pos.clone();
    for d in &start.derivs {
        x.extend_from_slice(d);
    }
    let deriv = |x: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim * order];
        for blk in 0..order - 1 {
            for k in 0..dim {
                out[blk * dim + k] = x[(blk + 1) * dim + k];
            }
        }
        for k in 0..dim {
            out[(order - 1) * dim + k] = u[k];
        }
        out
    };
    let steps = (dt / h).round() as usize;
    let hh = dt / steps as f64;
    for _ in 0..steps {
        let k1 = deriv(&x);
        let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, b)| a + 0.5 * hh * b).collect();
        let k2 = deriv(&x2);
        let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, b)| a + 0.5 * hh * b).collect();
        let k3 = deriv(&x3);
        let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, b)| a + hh * b).collect();
        let k4 = deriv(&x4);
        for i in 0..x.len() {
            x[i] += hh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let pos = x[..dim].to_vec();
    let derivs = (1..order)
        .map(|b| x[b * dim..(b + 1) * dim].to_vec())
        .collect();
    State {
        pos,
        derivs,
        yaw: start.yaw,
        t: start.t + dt,
    }
}

/// O(N^2) exact Euclidean distance: nearest occupied cell center, computed in
/// integer cell units before the final sqrt so it is bit-comparable with the
/// transform under test.
pub fn brute_force_distance(grid: &OccupancyGrid) -> Vec<f64> {
    let dims = grid.dims().to_vec();
    let n: usize = dims.iter().product();
    let occupied: Vec<Vec<usize>> = (0..n)
        .filter(|&i| grid.cell_flat(i) == Cell::Occupied)
        .map(|i| grid.unflatten(i))
        .collect();
    (0..n)
        .map(|i| {
            let idx = grid.unflatten(i);
            let mut best = f64::INFINITY;
            for o in &occupied {
                let d2: f64 = idx
                    .iter()
                    .zip(o)
                    .map(|(a, b)| {
                        let d = *a as f64 - *b as f64;
                        d * d
                    })
                    .sum();
                best = best.min(d2);
            }
            best.sqrt() * grid.resolution()
        })
        .collect()
}

/// Membership margin of the primitive against a linear obstacle over a dense
/// time grid: the minimum over sampled times of the worst face value.
/// Negative means inside; `None` when the activity window is never met.
pub fn dense_lvp_margin(
    p: &MotionPrimitive,
    obs: &LinearObstacle,
    t_start: f64,
    step: f64,
) -> Option<f64> {
    let w0 = t_start.max(obs.active_from);
    let w1 = (t_start + p.dt).min(obs.active_until);
    if w0 > w1 {
        return None;
    }
    let steps = ((w1 - w0) / step).ceil() as usize;
    let mut min_margin = f64::INFINITY;
    for i in 0..=steps {
        let t = (w0 + step * i as f64).min(w1);
        let s = t - t_start;
        let pos = p.position_at(s);
        let mut worst = f64::NEG_INFINITY;
        for (j, f) in obs.shape.faces().iter().enumerate() {
            let b = obs.face_offset_at(j, t - obs.active_from);
            let val: f64 = f.normal.iter().zip(&pos).map(|(a, x)| a * x).sum::<f64>() - b;
            worst = worst.max(val);
        }
        min_margin = min_margin.min(worst);
    }
    Some(min_margin)
}

/// A random occupancy grid with the given obstacle density; start and goal
/// cells are kept free.
pub fn random_grid(
    rng: &mut StdRng,
    dims: [usize; 2],
    resolution: f64,
    density: f64,
    keep_free: &[[usize; 2]],
) -> OccupancyGrid {
    let mut grid =
        OccupancyGrid::new(vec![0.0, 0.0], resolution, dims.to_vec(), Cell::Free).unwrap();
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            if rng.random::<f64>() < density {
                grid.set_cell(&[x, y], Cell::Occupied);
            }
        }
    }
    for idx in keep_free {
        grid.set_cell(idx, Cell::Free);
        // also clear the 4-neighborhood so starts are not boxed in
        let [x, y] = *idx;
        for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let nx = x as i64 + dx;
            let ny = y as i64 + dy;
            if nx >= 0 && ny >= 0 && (nx as usize) < dims[0] && (ny as usize) < dims[1] {
                grid.set_cell(&[nx as usize, ny as usize], Cell::Free);
            }
        }
    }
    grid
}

/// Exhaustive depth-bounded enumeration of feasible primitive sequences with
/// admissible branch-and-bound pruning; returns the optimal cost. Uses the
/// library's per-primitive predicates (they define feasibility semantics) but
/// none of its search machinery.
pub fn enumerate_optimal_cost(req: &PlanRequest, max_depth: usize) -> Option<f64> {
    let controls: Vec<ControlInput> = {
        // independent control-set construction
        let spec = &req.spec;
        let step = 2.0 * spec.u_max / (spec.u_levels - 1) as f64;
        let values: Vec<f64> = (0..spec.u_levels)
            .map(|i| -spec.u_max + step * i as f64)
            .collect();
        let mut out = Vec::new();
        for &ux in &values {
            for &uy in &values {
                out.push(ControlInput {
                    u: vec![ux, uy],
                    u_psi: None,
                });
            }
        }
        out
    };
    let mut best = f64::INFINITY;
    fn lower_bound(state: &State, req: &PlanRequest) -> f64 {
        let mut t_lb: f64 = 0.0;
        for ((p, c), tol) in state
            .pos
            .iter()
            .zip(&req.goal.center)
            .zip(&req.goal.pos_tol)
        {
            t_lb = t_lb.max(((p - c).abs() - tol).max(0.0) / req.spec.v_max);
        }
        req.rho_t * t_lb
    }
    fn dfs(
        state: &State,
        depth: usize,
        cost: f64,
        best: &mut f64,
        controls: &[ControlInput],
        req: &PlanRequest,
        max_depth: usize,
    ) {
        if req.goal.contains(state) {
            if cost < *best {
                *best = cost;
            }
            return;
        }
        if depth == max_depth || cost + lower_bound(state, req) >= *best {
            return;
        }
        for control in controls {
            let prim = propagate(state, control, req.spec.dt);
            if !check_dynamic_feasibility(&prim, &req.spec) {
                continue;
            }
            if let Some(grid) = &req.grid {
                if primitive_collides_static(&prim, grid, &req.spec, req.bounded_workspace) {
                    continue;
                }
            }
            let mut edge = primitive_cost(&prim, req.rho_t);
            if let Some(pf) = &req.potential {
                edge += req.rho_c * collision_cost(&prim, pf, &req.spec);
            }
            dfs(
                &prim.end,
                depth + 1,
                cost + edge,
                best,
                controls,
                req,
                max_depth,
            );
        }
    }
    dfs(&req.start, 0, 0.0, &mut best, &controls, req, max_depth);
    best.is_finite().then_some(best)
}
