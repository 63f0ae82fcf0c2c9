//! Chain-of-integrators flat-output model: states, constant-control motion
//! primitives, feasibility checks and per-primitive cost terms.
//!
//! The control input is the `order`-th derivative of position (`order` = 2:
//! acceleration-controlled, 3: jerk-controlled). Yaw, when enabled, is a
//! decoupled first-order axis driven by an angular-velocity control.

use crate::poly::Polynomial;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Normalize an angle to `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * std::f64::consts::PI);
    if x > std::f64::consts::PI {
        x -= 2.0 * std::f64::consts::PI;
    }
    x
}

/// Shortest signed angular difference `a - b`, wrapped to `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

/// Yaw axis configuration: angular-velocity control bound and the number of
/// discrete yaw-rate values (odd, so hold-heading is available).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YawSpec {
    pub rate_max: f64,
    pub levels: usize,
}

/// System description shared by every primitive of a planning problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    /// Spatial dimension (2 or 3).
    pub dim: usize,
    /// System order: 2 = acceleration-controlled, 3 = jerk-controlled.
    pub order: usize,
    /// Control bound per axis (m/s^order).
    pub u_max: f64,
    /// Discrete control values per axis; odd so zero is included.
    pub u_levels: usize,
    /// Primitive duration (s).
    pub dt: f64,
    /// Velocity bound per axis (m/s).
    pub v_max: f64,
    /// Acceleration bound per axis (m/s^2).
    pub a_max: f64,
    /// Jerk bound per axis (m/s^3), meaningful for order >= 3.
    #[serde(default)]
    pub j_max: Option<f64>,
    /// Yaw axis, absent when the scenario ignores heading.
    #[serde(default)]
    pub yaw: Option<YawSpec>,
}

impl SystemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 || self.dim > 3 {
            return Err(Error::InvalidConfig(format!(
                "dim {} not in 1..=3",
                self.dim
            )));
        }
        if self.order < 2 || self.order > 3 {
            return Err(Error::InvalidConfig(format!(
                "order {} outside the tested tier {{2, 3}}",
                self.order
            )));
        }
        if !(self.u_max > 0.0) || !(self.dt > 0.0) {
            return Err(Error::InvalidConfig("u_max and dt must be positive".into()));
        }
        if self.u_levels < 3 || self.u_levels.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "u_levels {} must be odd and >= 3",
                self.u_levels
            )));
        }
        if !(self.v_max > 0.0) || !(self.a_max > 0.0) {
            return Err(Error::InvalidConfig(
                "derivative bounds must be positive".into(),
            ));
        }
        if self.order >= 3 && self.j_max.is_some_and(|j| !(j > 0.0)) {
            return Err(Error::InvalidConfig(
                "j_max must be positive when given".into(),
            ));
        }
        if let Some(yaw) = &self.yaw {
            if !(yaw.rate_max > 0.0) || yaw.levels < 3 || yaw.levels % 2 == 0 {
                return Err(Error::InvalidConfig(
                    "yaw rate bound must be positive and levels odd >= 3".into(),
                ));
            }
        }
        Ok(())
    }

    /// Bound for derivative order 1..order-1 (1 = velocity, 2 = acceleration, ...).
    pub fn deriv_bound(&self, order: usize) -> f64 {
        match order {
            1 => self.v_max,
            2 => self.a_max,
            3 => self.j_max.unwrap_or(self.u_max),
            _ => f64::INFINITY,
        }
    }

    /// Spacing between adjacent discrete control values.
    pub fn control_step(&self) -> f64 {
        2.0 * self.u_max / (self.u_levels - 1) as f64
    }

    /// Lattice spacing induced on derivative order `d` by one primitive:
    /// `control_step * dt^(order-d) / (order-d)!`.
    pub fn deriv_quantum(&self, d: usize) -> f64 {
        let k = self.order - d;
        let mut fact = 1.0;
        for i in 2..=k {
            fact *= i as f64;
        }
        self.control_step() * self.dt.powi(k as i32) / fact
    }
}

/// Flat-output state: position, its derivatives up to order-1, optional yaw,
/// and the time stamp used by time-augmented search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub pos: Vec<f64>,
    /// Derivatives order 1..order-1: `derivs[0]` velocity, `derivs[1]` acceleration.
    pub derivs: Vec<Vec<f64>>,
    pub yaw: Option<f64>,
    pub t: f64,
}

impl State {
    /// A state at rest: all derivatives zero.
    pub fn at_rest(spec: &SystemSpec, pos: Vec<f64>, yaw: Option<f64>) -> State {
        State {
            derivs: vec![vec![0.0; pos.len()]; spec.order - 1],
            pos,
            yaw: yaw.map(normalize_angle),
            t: 0.0,
        }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.derivs[0]
    }

    pub fn speed(&self) -> f64 {
        self.derivs[0].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Max-norm distance between the full derivative stacks of two states.
    pub fn deriv_distance(&self, other: &State) -> f64 {
        let mut d: f64 = 0.0;
        for (a, b) in self.derivs.iter().zip(&other.derivs) {
            for (x, y) in a.iter().zip(b) {
                d = d.max((x - y).abs());
            }
        }
        d
    }
}

/// Constant control applied over one primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub u: Vec<f64>,
    pub u_psi: Option<f64>,
}

impl ControlInput {
    pub fn norm_sq(&self) -> f64 {
        self.u.iter().map(|x| x * x).sum()
    }
}

/// One constant-control polynomial segment; the edge of the search lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPrimitive {
    pub start: State,
    pub control: ControlInput,
    pub dt: f64,
    /// Position polynomial per axis over local time `[0, dt]`.
    pub axis_polys: Vec<Polynomial>,
    pub end: State,
}

impl MotionPrimitive {
    pub fn position_at(&self, s: f64) -> Vec<f64> {
        self.axis_polys.iter().map(|p| p.evaluate(s)).collect()
    }

    pub fn velocity_at(&self, s: f64) -> Vec<f64> {
        self.axis_polys
            .iter()
            .map(|p| p.derivative().evaluate(s))
            .collect()
    }

    pub fn yaw_at(&self, s: f64) -> Option<f64> {
        let yaw0 = self.start.yaw?;
        let rate = self.control.u_psi.unwrap_or(0.0);
        Some(normalize_angle(yaw0 + rate * s))
    }

    /// Full state at local time `s` in `[0, dt]`.
    pub fn state_at(&self, s: f64) -> State {
        let order = self.start.derivs.len() + 1;
        let pos = self.position_at(s);
        let mut derivs = Vec::with_capacity(order - 1);
        let mut polys: Vec<Polynomial> = self.axis_polys.clone();
        for _ in 1..order {
            polys = polys.iter().map(Polynomial::derivative).collect();
            derivs.push(polys.iter().map(|p| p.evaluate(s)).collect());
        }
        State {
            pos,
            derivs,
            yaw: self.yaw_at(s),
            t: self.start.t + s,
        }
    }

    /// Axis-aligned bounds of the positions swept over `[0, dt]`, padded by
    /// `pad`. Extrema are located from velocity roots, so the box is tight up
    /// to the padding.
    pub fn position_aabb(&self, pad: f64) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.axis_polys.len()];
        let mut hi = vec![f64::NEG_INFINITY; self.axis_polys.len()];
        for (k, p) in self.axis_polys.iter().enumerate() {
            let mut consider = |s: f64| {
                let v = p.evaluate(s);
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            };
            consider(0.0);
            consider(self.dt);
            if let Ok(roots) = p.derivative().real_roots_in_interval(0.0, self.dt, 1e-9) {
                for r in roots {
                    consider(r);
                }
            }
            lo[k] -= pad;
            hi[k] += pad;
        }
        (lo, hi)
    }
}

/// The discrete control set: the Cartesian product of `u_levels` evenly spaced
/// values in `[-u_max, u_max]` per axis, crossed with the yaw-rate levels when
/// yaw is enabled. Ordering is deterministic (axis-major, yaw innermost).
pub fn generate_control_set(spec: &SystemSpec) -> Vec<ControlInput> {
    let axis_values: Vec<f64> = (0..spec.u_levels)
        .map(|i| -spec.u_max + spec.control_step() * i as f64)
        .collect();
    let yaw_values: Vec<Option<f64>> = match &spec.yaw {
        Some(yaw) => {
            let step = 2.0 * yaw.rate_max / (yaw.levels - 1) as f64;
            (0..yaw.levels)
                .map(|i| Some(-yaw.rate_max + step * i as f64))
                .collect()
        }
        None => vec![None],
    };
    let mut out = Vec::with_capacity(axis_values.len().pow(spec.dim as u32) * yaw_values.len());
    let mut idx = vec![0usize; spec.dim];
    loop {
        let u: Vec<f64> = idx.iter().map(|&i| axis_values[i]).collect();
        for ypsi in &yaw_values {
            out.push(ControlInput {
                u: u.clone(),
                u_psi: *ypsi,
            });
        }
        // odometer increment, axis 0 slowest
        let mut k = spec.dim;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axis_values.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Closed-form propagation of a constant control for `dt` seconds.
///
/// Axis `k` position polynomial: `sum_i derivs_i[k] t^i / i! + u[k] t^order / order!`;
/// yaw integrates linearly and is re-normalized at the end state.
pub fn propagate(s: &State, control: &ControlInput, dt: f64) -> MotionPrimitive {
    assert!(dt > 0.0, "primitive duration must be positive");
    let dim = s.pos.len();
    let order = s.derivs.len() + 1;
    let mut axis_polys = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut coeffs = Vec::with_capacity(order + 1);
        let mut fact = 1.0;
        coeffs.push(s.pos[k]);
        for i in 1..order {
            fact *= i as f64;
            coeffs.push(s.derivs[i - 1][k] / fact);
        }
        fact *= order as f64;
        coeffs.push(control.u[k] / fact);
        axis_polys.push(Polynomial::new(coeffs));
    }
    let end_pos: Vec<f64> = axis_polys.iter().map(|p| p.evaluate(dt)).collect();
    let mut end_derivs = Vec::with_capacity(order - 1);
    let mut polys = axis_polys.clone();
    for _ in 1..order {
        polys = polys.iter().map(Polynomial::derivative).collect();
        end_derivs.push(polys.iter().map(|p| p.evaluate(dt)).collect::<Vec<f64>>());
    }
    let end_yaw = s
        .yaw
        .map(|y| normalize_angle(y + control.u_psi.unwrap_or(0.0) * dt));
    MotionPrimitive {
        end: State {
            pos: end_pos,
            derivs: end_derivs,
            yaw: end_yaw,
            t: s.t + dt,
        },
        start: s.clone(),
        control: control.clone(),
        dt,
        axis_polys,
    }
}

/// Control effort plus time cost: `|u|^2 dt + rho_t dt` (closed form of the
/// squared L2 norm of a constant control input).
pub fn primitive_cost(p: &MotionPrimitive, rho_t: f64) -> f64 {
    p.control.norm_sq() * p.dt + rho_t * p.dt
}

/// True iff every derivative of order 1..order-1 of every axis stays within
/// its bound over `[0, dt]`. Extrema are located via roots of the next-higher
/// derivative plus endpoint checks.
pub fn check_dynamic_feasibility(p: &MotionPrimitive, spec: &SystemSpec) -> bool {
    const TOL: f64 = 1e-9;
    for poly in &p.axis_polys {
        let mut d = poly.clone();
        for order in 1..spec.order {
            d = d.derivative();
            let bound = spec.deriv_bound(order) + TOL;
            if d.evaluate(0.0).abs() > bound || d.evaluate(p.dt).abs() > bound {
                return false;
            }
            if let Ok(roots) = d.derivative().real_roots_in_interval(0.0, p.dt, 1e-9) {
                if roots.iter().any(|&r| d.evaluate(r).abs() > bound) {
                    return false;
                }
            }
        }
    }
    if let (Some(yaw), Some(rate)) = (&spec.yaw, p.control.u_psi) {
        if rate.abs() > yaw.rate_max + TOL {
            return false;
        }
    }
    true
}

/// An ordered chain of motion primitives with contiguous states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    segments: Vec<MotionPrimitive>,
    total_duration: f64,
}

impl Trajectory {
    /// Continuity tolerance between consecutive segments.
    pub const KNOT_TOL: f64 = 1e-9;

    /// Build from segments, validating that each segment starts where the
    /// previous one ends (position, derivatives, yaw and time stamp).
    pub fn from_segments(segments: Vec<MotionPrimitive>) -> Result<Trajectory> {
        for w in segments.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let pos_gap = a
                .end
                .pos
                .iter()
                .zip(&b.start.pos)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            let deriv_gap = a.end.deriv_distance(&b.start);
            let t_gap = (a.end.t - b.start.t).abs();
            let yaw_gap = match (a.end.yaw, b.start.yaw) {
                (Some(x), Some(y)) => angle_diff(x, y).abs(),
                (None, None) => 0.0,
                _ => f64::INFINITY,
            };
            if pos_gap > Self::KNOT_TOL
                || deriv_gap > Self::KNOT_TOL
                || t_gap > Self::KNOT_TOL
                || yaw_gap > 1e-6
            {
                return Err(Error::InvalidConfig(format!(
                    "discontinuous segments: pos gap {pos_gap:.2e}, deriv gap {deriv_gap:.2e}, t gap {t_gap:.2e}"
                )));
            }
        }
        let total_duration = segments.iter().map(|s| s.dt).sum();
        Ok(Trajectory {
            segments,
            total_duration,
        })
    }

    /// A zero-duration trajectory (start already inside the goal region).
    pub fn empty() -> Trajectory {
        Trajectory {
            segments: Vec::new(),
            total_duration: 0.0,
        }
    }

    pub fn segments(&self) -> &[MotionPrimitive] {
        &self.segments
    }

    pub fn duration(&self) -> f64 {
        self.total_duration
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Time stamp of the first knot (plan start).
    pub fn start_time(&self) -> f64 {
        self.segments.first().map_or(0.0, |s| s.start.t)
    }

    pub fn end_time(&self) -> f64 {
        self.start_time() + self.total_duration
    }

    pub fn end_state(&self) -> Option<&State> {
        self.segments.last().map(|s| &s.end)
    }

    /// State at absolute time `t` in `[start_time, end_time]`. At interior
    /// knots the later segment is used; the continuity invariant makes both
    /// agree.
    pub fn sample(&self, t: f64) -> Result<State> {
        let lo = self.start_time();
        let hi = self.end_time();
        if self.segments.is_empty() || t < lo - Self::KNOT_TOL || t > hi + Self::KNOT_TOL {
            return Err(Error::OutOfDomain { t, lo, hi });
        }
        let t = t.clamp(lo, hi);
        // later segment wins at knots
        let idx = self
            .segments
            .partition_point(|s| s.start.t + s.dt <= t)
            .min(self.segments.len() - 1);
        let seg = &self.segments[idx];
        Ok(seg.state_at((t - seg.start.t).clamp(0.0, seg.dt)))
    }

    /// State at time `t`, holding the first/last state outside the domain.
    pub fn sample_clamped(&self, t: f64) -> Option<State> {
        if self.segments.is_empty() {
            return None;
        }
        let t = t.clamp(self.start_time(), self.end_time());
        self.sample(t).ok()
    }

    /// Position only, clamped to the domain. Cheaper than a full state sample
    /// on hot paths (obstacle pose lookups, dense verification).
    pub fn position_clamped(&self, t: f64) -> Option<Vec<f64>> {
        if self.segments.is_empty() {
            return None;
        }
        let t = t.clamp(self.start_time(), self.end_time());
        let idx = self
            .segments
            .partition_point(|s| s.start.t + s.dt <= t)
            .min(self.segments.len() - 1);
        let seg = &self.segments[idx];
        Some(seg.position_at((t - seg.start.t).clamp(0.0, seg.dt)))
    }
}
