//! Distance transform against brute force, collision cost against refined
//! sampling, static collision against dense scans, and tunnel membership
//! against a dense reference-polyline distance.

mod common;

use kinoplan::dynamics::{propagate, ControlInput, State, SystemSpec, Trajectory};
use kinoplan::env::{
    build_potential, collision_cost, distance_transform, primitive_collides_static, sample_count, OccupancyGrid, PotentialField, Tunnel,
};
use rand::Rng;

fn spec() -> SystemSpec {
    SystemSpec {
        dim: 2,
        order: 2,
        u_max: 1.0,
        u_levels: 3,
        dt: 1.0,
        v_max: 2.0,
        a_max: 1.0,
        j_max: None,
        yaw: None,
    }
}

#[test]
fn distance_transform_matches_brute_force_exactly() {
    let mut rng = common::rng(0xe0_0001);
    for case in 0..12 {
        let density = 0.02 + 0.05 * case as f64;
        let grid = common::random_grid(&mut rng, [50, 50], 0.25, density, &[]);
        let df = distance_transform(&grid);
        let oracle = common::brute_force_distance(&grid);
        for (i, want) in oracle.iter().enumerate() {
            let got = df.distance_flat(i);
            if want.is_infinite() {
                assert!(got.is_infinite());
            } else {
                assert_eq!(got, *want, "cell {i} case {case}");
            }
        }
    }
}

#[test]
fn lipschitz_across_neighbors() {
    let mut rng = common::rng(0xe0_0002);
    let grid = common::random_grid(&mut rng, [40, 40], 0.5, 0.1, &[]);
    let df = distance_transform(&grid);
    let dims = grid.dims().to_vec();
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            let d = df.distance_at_cell(&[x, y]);
            if x + 1 < dims[0] {
                let n = df.distance_at_cell(&[x + 1, y]);
                if d.is_finite() && n.is_finite() {
                    assert!((d - n).abs() <= grid.resolution() + 1e-12);
                }
            }
            if y + 1 < dims[1] {
                let n = df.distance_at_cell(&[x, y + 1]);
                if d.is_finite() && n.is_finite() {
                    assert!((d - n).abs() <= grid.resolution() + 1e-12);
                }
            }
        }
    }
}

fn potential_fixture(rng: &mut rand::rngs::StdRng) -> (OccupancyGrid, PotentialField) {
    let grid = common::random_grid(rng, [30, 30], 0.25, 0.08, &[]);
    let df = distance_transform(&grid);
    let pf = build_potential(&df, 10.0, 1.0, 1.0);
    (grid, pf)
}

#[test]
fn collision_cost_close_to_refined_sampling() {
    // The defining Riemann rule weights all I samples by T/(I-1), a known
    // I/(I-1) overcount shared by any refinement of the same rule; compare
    // the rule-normalized integrals so the test measures resolution error.
    let mut rng = common::rng(0xe0_0003);
    let spec = spec();
    let mut checked = 0;
    let mut errors: Vec<f64> = Vec::new();
    for _ in 0..400 {
        // wide smooth aprons (d_thr = 8 cells) keep the integrand resolved
        let grid = common::random_grid(&mut rng, [30, 30], 0.25, 0.15, &[]);
        let pf = build_potential(&distance_transform(&grid), 10.0, 2.0, 1.0);
        let mut start = State::at_rest(
            &spec,
            vec![rng.random_range(1.5..6.0), rng.random_range(1.5..6.0)],
            None,
        );
        start.derivs[0] = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let u = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let p = propagate(&start, &ControlInput { u, u_psi: None }, 1.0);
        let i_n = sample_count(&p, &spec, pf.resolution());
        let coarse = collision_cost(&p, &pf, &spec) * (i_n - 1) as f64 / i_n as f64;
        // 10x denser Riemann sum over the same integrand, same normalization
        let count = 10 * i_n;
        let dt_s = p.dt / (count - 1) as f64;
        let mut fine = 0.0;
        for i in 0..count {
            let s = dt_s * i as f64;
            let u_val = pf.value_at_point(&p.position_at(s));
            let v: f64 = p.velocity_at(s).iter().map(|x| x * x).sum::<f64>().sqrt();
            fine += u_val * v * dt_s;
        }
        fine *= (count - 1) as f64 / count as f64;
        if fine < 1.0 {
            continue; // relative comparison needs a well-supported integrand
        }
        checked += 1;
        let rel = (coarse - fine).abs() / fine;
        errors.push(rel);
        assert!(
            rel < 0.15,
            "relative error {rel} (coarse {coarse}, fine {fine})"
        );
    }
    assert!(checked > 50, "too few informative cases: {checked}");
    errors.sort_by(f64::total_cmp);
    let median = errors[errors.len() / 2];
    assert!(median < 0.10, "median relative error {median}");
}

#[test]
fn static_collision_matches_dense_scan() {
    let mut rng = common::rng(0xe0_0004);
    let spec = spec();
    let mut mismatches = 0;
    let mut boundary = 0;
    for _ in 0..500 {
        let grid = common::random_grid(&mut rng, [30, 30], 0.25, 0.1, &[]);
        let mut start = State::at_rest(
            &spec,
            vec![rng.random_range(0.5..7.0), rng.random_range(0.5..7.0)],
            None,
        );
        start.derivs[0] = vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
        let u = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let p = propagate(&start, &ControlInput { u, u_psi: None }, 1.0);
        let verdict = primitive_collides_static(&p, &grid, &spec, true);
        // dense 1e-3-step scan
        let steps = (p.dt / 1e-3).ceil() as usize;
        let dense = (0..=steps)
            .any(|i| grid.occupied_at_point(&p.position_at(p.dt * i as f64 / steps as f64), true));
        if verdict != dense {
            // sampled checking may clip corners the dense scan sees; count and
            // verify the documented direction: the sampler may only miss, not
            // invent collisions against the dense verdict
            mismatches += 1;
            assert!(dense && !verdict, "sampler invented a collision");
        }
        if dense {
            boundary += 1;
        }
    }
    assert!(
        boundary > 100,
        "scenario too easy: {boundary} colliding cases"
    );
    let rate = mismatches as f64 / 500.0;
    assert!(rate < 0.05, "soundness gap too wide: {mismatches}/500");
}

#[test]
fn tunnel_membership_matches_dense_polyline_distance() {
    let mut rng = common::rng(0xe0_0005);
    let spec = spec();
    // reference: two-segment trajectory
    let s0 = State::at_rest(&spec, vec![0.0, 0.0], None);
    let p1 = propagate(
        &s0,
        &ControlInput {
            u: vec![1.0, 0.5],
            u_psi: None,
        },
        1.0,
    );
    let p2 = propagate(
        &p1.end,
        &ControlInput {
            u: vec![-1.0, 0.0],
            u_psi: None,
        },
        1.0,
    );
    let reference = Trajectory::from_segments(vec![p1, p2]).unwrap();
    let radius = 0.6;
    let tunnel = Tunnel::around(&reference, radius, 0.05);

    for _ in 0..300 {
        let mut start = State::at_rest(
            &spec,
            vec![rng.random_range(-0.5..2.5), rng.random_range(-0.5..2.0)],
            None,
        );
        start.derivs[0] = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let u = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let p = propagate(&start, &ControlInput { u, u_psi: None }, 1.0);
        let verdict = tunnel.contains_primitive(&p, 16);

        // dense oracle: every densely sampled point within radius of a densely
        // sampled reference point (tolerance = polyline sampling slack)
        let ref_pts: Vec<Vec<f64>> = (0..=400)
            .map(|i| {
                reference
                    .sample(reference.duration() * i as f64 / 400.0)
                    .unwrap()
                    .pos
            })
            .collect();
        let worst = (0..=200)
            .map(|i| {
                let pos = p.position_at(p.dt * i as f64 / 200.0);
                ref_pts
                    .iter()
                    .map(|r| {
                        pos.iter()
                            .zip(r)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let oracle = worst <= radius;
        if verdict != oracle {
            // disagreement allowed only within the sampling tolerance band
            assert!(
                (worst - radius).abs() < 0.13,
                "tunnel verdict {verdict} vs oracle {oracle}, worst distance {worst}"
            );
        }
    }
}

#[test]
fn unbounded_tunnel_accepts_everything() {
    let spec = spec();
    let far = State::at_rest(&spec, vec![100.0, -50.0], None);
    let p = propagate(
        &far,
        &ControlInput {
            u: vec![1.0, 1.0],
            u_psi: None,
        },
        1.0,
    );
    assert!(Tunnel::unbounded().contains_primitive(&p, 8));
}

#[test]
fn potential_zero_beyond_cutoff_everywhere() {
    let mut rng = common::rng(0xe0_0006);
    let (grid, pf) = potential_fixture(&mut rng);
    let df = distance_transform(&grid);
    for i in 0..grid.len() {
        let u = pf.value_flat(i);
        assert!((0.0..=10.0).contains(&u));
        if df.distance_flat(i) >= 1.0 {
            assert_eq!(u, 0.0);
        }
    }
}
