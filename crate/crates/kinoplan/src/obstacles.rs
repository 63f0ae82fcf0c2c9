//! Dynamic workspace: convex polyhedra moving at constant velocity with
//! optional inflation (LVP), robot polyhedra following piecewise-polynomial
//! trajectories (NMP), Minkowski geometry, and exact root-based
//! primitive-vs-polyhedron intersection tests.
//!
//! A primitive intersects a moving polyhedron iff some time in its duration
//! satisfies every face inequality. The membership region over time is closed
//! and its boundary times are roots of per-face polynomials, so checking the
//! window endpoints plus all face-polynomial roots is sound and complete.

use crate::dynamics::{MotionPrimitive, SystemSpec, Trajectory};
use crate::poly::{Polynomial, RootError};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Face inequality tolerance: grazing contact counts as collision.
pub const FACE_TOL: f64 = 1e-9;

/// One half-space `normal . p <= offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// A bounded convex polytope as an intersection of half-spaces, with a
/// consistent vertex list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolytope {
    faces: Vec<Face>,
    vertices: Vec<Vec<f64>>,
}

impl ConvexPolytope {
    /// Validates that every vertex satisfies every face (within tolerance)
    /// and that every face is tight against some vertex.
    pub fn new(faces: Vec<Face>, vertices: Vec<Vec<f64>>) -> Result<Self> {
        if faces.is_empty() || vertices.is_empty() {
            return Err(Error::InvalidPolytope(
                "faces and vertices must be non-empty".into(),
            ));
        }
        let dim = faces[0].normal.len();
        if faces.iter().any(|f| f.normal.len() != dim) || vertices.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidPolytope("mixed dimensions".into()));
        }
        if vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPolytope("unbounded vertex hull".into()));
        }
        for (j, f) in faces.iter().enumerate() {
            let mut tight = false;
            for v in &vertices {
                let val = dot(&f.normal, v);
                if val > f.offset + FACE_TOL {
                    return Err(Error::InvalidPolytope(format!(
                        "vertex {v:?} violates face {j} by {:.2e}",
                        val - f.offset
                    )));
                }
                if val >= f.offset - FACE_TOL {
                    tight = true;
                }
            }
            if !tight {
                return Err(Error::InvalidPolytope(format!("face {j} is not tight")));
            }
        }
        Ok(ConvexPolytope { faces, vertices })
    }

    /// Axis-aligned box centered at `center` with the given half-extents.
    pub fn axis_box(center: &[f64], half_extents: &[f64]) -> ConvexPolytope {
        let dim = center.len();
        let mut faces = Vec::with_capacity(2 * dim);
        for a in 0..dim {
            for sign in [1.0, -1.0] {
                let mut n = vec![0.0; dim];
                n[a] = sign;
                faces.push(Face {
                    normal: n,
                    offset: sign * center[a] + half_extents[a],
                });
            }
        }
        let mut vertices = Vec::with_capacity(1 << dim);
        for mask in 0..(1u32 << dim) {
            let v: Vec<f64> = (0..dim)
                .map(|a| {
                    center[a]
                        + if mask & (1 << a) != 0 {
                            half_extents[a]
                        } else {
                            -half_extents[a]
                        }
                })
                .collect();
            vertices.push(v);
        }
        ConvexPolytope { faces, vertices }
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.faces[0].normal.len()
    }

    /// Support function: max of `dir . v` over the vertices.
    pub fn support(&self, dir: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|v| dot(dir, v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        self.faces
            .iter()
            .all(|f| dot(&f.normal, p) <= f.offset + tol)
    }

    /// True iff the vertex set is symmetric about the given reference point.
    pub fn is_symmetric_about(&self, center: &[f64], tol: f64) -> bool {
        self.vertices.iter().all(|v| {
            let mirrored: Vec<f64> = v.iter().zip(center).map(|(x, c)| 2.0 * c - x).collect();
            self.vertices
                .iter()
                .any(|w| w.iter().zip(&mirrored).all(|(a, b)| (a - b).abs() <= tol))
        })
    }

    /// Polytope translated by `offset`.
    pub fn translated(&self, offset: &[f64]) -> ConvexPolytope {
        ConvexPolytope {
            faces: self
                .faces
                .iter()
                .map(|f| Face {
                    normal: f.normal.clone(),
                    offset: f.offset + dot(&f.normal, offset),
                })
                .collect(),
            vertices: self
                .vertices
                .iter()
                .map(|v| v.iter().zip(offset).map(|(x, o)| x + o).collect())
                .collect(),
        }
    }

    pub fn aabb(&self) -> (Vec<f64>, Vec<f64>) {
        let dim = self.dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for v in &self.vertices {
            for a in 0..dim {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Inflate `obstacle` by a centrally symmetric `robot` shape: each face offset
/// grows by the robot's support in the face normal direction, after which
/// checking the robot's reference point against the inflated polytope is
/// equivalent to checking the full shapes.
pub fn minkowski_inflate(
    obstacle: &ConvexPolytope,
    robot: &ConvexPolytope,
) -> Result<ConvexPolytope> {
    let dim = obstacle.dim();
    if robot.dim() != dim {
        return Err(Error::InvalidPolytope("dimension mismatch".into()));
    }
    if !robot.is_symmetric_about(&vec![0.0; dim], 1e-9) {
        return Err(Error::InvalidPolytope(
            "robot shape must be symmetric about its reference point".into(),
        ));
    }
    let faces: Vec<Face> = obstacle
        .faces
        .iter()
        .map(|f| Face {
            normal: f.normal.clone(),
            offset: f.offset + robot.support(&f.normal),
        })
        .collect();
    let vertices = vertices_from_faces(&faces)?;
    ConvexPolytope::new(faces, vertices)
}

/// Enumerate vertices of a bounded H-polytope by intersecting all
/// dimension-sized face combinations and keeping feasible points.
pub fn vertices_from_faces(faces: &[Face]) -> Result<Vec<Vec<f64>>> {
    let dim = faces[0].normal.len();
    let m = faces.len();
    if m < dim + 1 {
        return Err(Error::InvalidPolytope(
            "too few faces for a bounded polytope".into(),
        ));
    }
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut combo = vec![0usize; dim];
    enumerate_combinations(m, dim, &mut combo, 0, 0, &mut |sel| {
        if let Some(p) = solve_faces(faces, sel) {
            let feasible = faces
                .iter()
                .all(|f| dot(&f.normal, &p) <= f.offset + 1e-7 * (1.0 + f.offset.abs()));
            if feasible
                && !vertices
                    .iter()
                    .any(|v| v.iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-7))
            {
                vertices.push(p);
            }
        }
    });
    if vertices.is_empty() {
        return Err(Error::InvalidPolytope("face set has no vertices".into()));
    }
    Ok(vertices)
}

fn enumerate_combinations(
    m: usize,
    k: usize,
    combo: &mut Vec<usize>,
    depth: usize,
    start: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if depth == k {
        f(combo);
        return;
    }
    for i in start..m {
        combo[depth] = i;
        enumerate_combinations(m, k, combo, depth + 1, i + 1, f);
    }
}

/// Solve the square system formed by the selected faces' boundary planes.
fn solve_faces(faces: &[Face], sel: &[usize]) -> Option<Vec<f64>> {
    let dim = sel.len();
    let mut a = vec![vec![0.0; dim + 1]; dim];
    for (r, &fi) in sel.iter().enumerate() {
        for c in 0..dim {
            a[r][c] = faces[fi].normal[c];
        }
        a[r][dim] = faces[fi].offset;
    }
    // Gaussian elimination with partial pivoting
    for col in 0..dim {
        let (pivot, max) = (col..dim)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if max < 1e-9 {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..dim {
            if r != col {
                let factor = a[r][col] / a[col][col];
                for c in col..=dim {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    Some((0..dim).map(|r| a[r][dim] / a[r][r]).collect())
}

/// A convex polyhedron translating at constant velocity, optionally inflating
/// its half-spaces outward at `inflation_rate` to absorb prediction error.
///
/// `shape` is the geometry at local time zero, which coincides with
/// `active_from` in the planning time frame; the obstacle is only checked
/// while the query time lies in `[active_from, active_until]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearObstacle {
    pub shape: ConvexPolytope,
    pub velocity: Vec<f64>,
    pub inflation_rate: f64,
    pub active_from: f64,
    pub active_until: f64,
}

impl LinearObstacle {
    pub fn new_static(shape: ConvexPolytope) -> LinearObstacle {
        let dim = shape.dim();
        LinearObstacle {
            shape,
            velocity: vec![0.0; dim],
            inflation_rate: 0.0,
            active_from: 0.0,
            active_until: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inflation_rate < 0.0 {
            return Err(Error::InvalidConfig("inflation rate must be >= 0".into()));
        }
        if self.active_from > self.active_until {
            return Err(Error::InvalidConfig("empty activity window".into()));
        }
        Ok(())
    }

    /// Face offset at obstacle-local time `t`:
    /// `b_j(t) = b_j0 + (a_j . v_c + |a_j| v_e) t`.
    pub fn face_offset_at(&self, face: usize, t: f64) -> f64 {
        let f = &self.shape.faces()[face];
        f.offset + self.face_offset_rate(face) * t
    }

    fn face_offset_rate(&self, face: usize) -> f64 {
        let f = &self.shape.faces()[face];
        dot(&f.normal, &self.velocity) + norm(&f.normal) * self.inflation_rate
    }

    /// True iff the primitive, starting at absolute time `t_start`, touches
    /// the obstacle inside its activity window.
    pub fn intersects_primitive(&self, p: &MotionPrimitive, t_start: f64) -> bool {
        let w0 = t_start.max(self.active_from);
        let w1 = (t_start + p.dt).min(self.active_until);
        if w0 > w1 {
            return false;
        }
        let lo = w0 - t_start;
        let hi = w1 - t_start;
        // face polynomial in primitive-local time s:
        //   a_j . phi(s) - b_j0 - rate_j (s + t_start - active_from)
        let face_polys: Vec<Polynomial> = (0..self.shape.faces().len())
            .map(|j| {
                let f = &self.shape.faces()[j];
                let rate = self.face_offset_rate(j);
                let mut g = Polynomial::zero();
                for (k, axis) in p.axis_polys.iter().enumerate() {
                    g = g.add(&axis.scaled(f.normal[k]));
                }
                g.sub(&Polynomial::new(vec![
                    f.offset + rate * (t_start - self.active_from),
                    rate,
                ]))
            })
            .collect();
        check_membership_candidates(&face_polys, lo, hi)
    }

    /// Conservative bounds of the space swept over the absolute time window
    /// `[t0, t1]`, clipped to the activity window.
    pub fn swept_aabb(&self, t0: f64, t1: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let w0 = t0.max(self.active_from);
        let w1 = t1.min(self.active_until);
        if w0 > w1 {
            return None;
        }
        let (mut lo, mut hi) = self.shape.aabb();
        let dim = lo.len();
        for a in 0..dim {
            let l0 = w0 - self.active_from;
            let l1 = (w1 - self.active_from).min(l0 + 1e6); // cap open-ended windows
            let d0 = self.velocity[a] * l0;
            let d1 = self.velocity[a] * l1;
            lo[a] += d0.min(d1) - self.inflation_rate * l1;
            hi[a] += d0.max(d1) + self.inflation_rate * l1;
        }
        Some((lo, hi))
    }
}

/// Candidate-time membership test shared by the moving-obstacle checks: a
/// membership interval, if any, is bounded by a window endpoint or a face
/// root, so testing those candidates decides intersection exactly.
fn check_membership_candidates(face_polys: &[Polynomial], lo: f64, hi: f64) -> bool {
    let inside = |s: f64| face_polys.iter().all(|g| g.evaluate(s) <= FACE_TOL);
    if inside(lo) || inside(hi) {
        return true;
    }
    for g in face_polys {
        match g.real_roots_in_interval(lo, hi, 1e-9) {
            Ok(roots) => {
                if roots.into_iter().any(inside) {
                    return true;
                }
            }
            // identically-zero face: always tight, contributes no candidate
            // times of its own but never rules the obstacle out
            Err(RootError::IdenticallyZero) => continue,
        }
    }
    false
}

/// Another robot as a moving obstacle: an (already inflated) polytope carried
/// along a committed piecewise-polynomial trajectory.
///
/// All time stamps live in the planning frame of the robot being planned;
/// `start_offset` records how far this trajectory's clock is ahead
/// (`tau_i^s - tau_j^s`, non-negative by construction).
#[derive(Debug, Clone)]
pub struct RobotObstacle {
    pub geometry: ConvexPolytope,
    pub traj: Arc<Trajectory>,
    pub start_offset: f64,
    /// Obstacle-local time beyond which the committed trajectory is stale.
    pub cutoff: f64,
    /// True: ignore the robot entirely beyond the cutoff (decentralized
    /// completeness rule). False: hold it static at its cutoff pose.
    pub ignore_beyond_cutoff: bool,
}

impl RobotObstacle {
    pub fn new(
        geometry: ConvexPolytope,
        traj: Arc<Trajectory>,
        plan_start_time: f64,
        cutoff: f64,
        ignore_beyond_cutoff: bool,
    ) -> Result<RobotObstacle> {
        let start_offset = plan_start_time - traj.start_time();
        if start_offset < -1e-9 {
            return Err(Error::InvalidConfig(format!(
                "negative start offset {start_offset}: obstacle trajectory starts in the future"
            )));
        }
        if cutoff > traj.duration() + 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "cutoff {cutoff} exceeds trajectory duration {}",
                traj.duration()
            )));
        }
        Ok(RobotObstacle {
            geometry,
            traj,
            start_offset: start_offset.max(0.0),
            cutoff,
            ignore_beyond_cutoff,
        })
    }

    /// Pose of the obstacle's reference point at absolute time `t`, clamped
    /// to the trajectory domain.
    fn reference_at(&self, t: f64) -> Vec<f64> {
        self.traj
            .position_clamped(t)
            .unwrap_or_else(|| vec![0.0; self.geometry.dim()])
    }

    /// True iff the primitive, starting at absolute time `t_start`, enters the
    /// polytope carried along the obstacle trajectory.
    pub fn intersects_primitive(&self, p: &MotionPrimitive, t_start: f64) -> bool {
        if self.traj.is_empty() {
            // zero-length commitment: a static polytope at the reference pose
            return self.intersects_static(p, 0.0, p.dt, &self.reference_at(0.0));
        }
        let cutoff_abs = self.traj.start_time() + self.cutoff;
        let t_end = t_start + p.dt;

        // moving part: intersect the primitive window with each trajectory
        // segment before the cutoff
        for seg in self.traj.segments() {
            let w0 = t_start.max(seg.start.t);
            let w1 = t_end.min(seg.start.t + seg.dt).min(cutoff_abs);
            if w0 > w1 {
                continue;
            }
            let lo = w0 - t_start;
            let hi = w1 - t_start;
            let shift = t_start - seg.start.t;
            let face_polys: Vec<Polynomial> = self
                .geometry
                .faces()
                .iter()
                .map(|f| {
                    let mut g = Polynomial::zero();
                    for (k, axis) in p.axis_polys.iter().enumerate() {
                        g = g.add(&axis.scaled(f.normal[k]));
                        g = g.sub(&seg.axis_polys[k].shift(shift).scaled(f.normal[k]));
                    }
                    g.sub(&Polynomial::constant(f.offset))
                })
                .collect();
            if check_membership_candidates(&face_polys, lo, hi) {
                return true;
            }
        }

        // before the trajectory starts: static at the start pose
        if t_start < self.traj.start_time() {
            let hi = (self.traj.start_time().min(t_end) - t_start).max(0.0);
            let pose = self.reference_at(self.traj.start_time());
            if self.intersects_static(p, 0.0, hi, &pose) {
                return true;
            }
        }

        // beyond the cutoff: either ignored or held static at the cutoff pose
        if !self.ignore_beyond_cutoff && t_end > cutoff_abs {
            let lo = (cutoff_abs.max(t_start) - t_start).clamp(0.0, p.dt);
            let pose = self.reference_at(cutoff_abs);
            if self.intersects_static(p, lo, p.dt, &pose) {
                return true;
            }
        }
        false
    }

    fn intersects_static(&self, p: &MotionPrimitive, lo: f64, hi: f64, pose: &[f64]) -> bool {
        if lo > hi {
            return false;
        }
        let face_polys: Vec<Polynomial> = self
            .geometry
            .faces()
            .iter()
            .map(|f| {
                let mut g = Polynomial::zero();
                for (k, axis) in p.axis_polys.iter().enumerate() {
                    g = g.add(&axis.scaled(f.normal[k]));
                }
                g.sub(&Polynomial::constant(f.offset + dot(&f.normal, pose)))
            })
            .collect();
        check_membership_candidates(&face_polys, lo, hi)
    }

    /// Conservative swept bounds over the absolute window `[t0, t1]`: the
    /// geometry box grown by the reference-path extent, taken from segment
    /// polynomial extrema so the box never under-covers.
    pub fn swept_aabb(&self, t0: f64, t1: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let (mut lo, mut hi) = self.geometry.aabb();
        let dim = lo.len();
        let mut plo = vec![f64::INFINITY; dim];
        let mut phi = vec![f64::NEG_INFINITY; dim];
        let mut cover = |pose: &[f64]| {
            for a in 0..dim {
                plo[a] = plo[a].min(pose[a]);
                phi[a] = phi[a].max(pose[a]);
            }
        };
        cover(&self.reference_at(t0));
        cover(&self.reference_at(t1));
        for seg in self.traj.segments() {
            if seg.start.t + seg.dt < t0 || seg.start.t > t1 {
                continue;
            }
            let (slo, shi) = seg.position_aabb(0.0);
            cover(&slo);
            cover(&shi);
        }
        for a in 0..dim {
            lo[a] += plo[a];
            hi[a] += phi[a];
        }
        Some((lo, hi))
    }
}

/// Any moving obstacle the planner can face.
#[derive(Debug, Clone)]
pub enum DynamicObstacle {
    Linear(LinearObstacle),
    Robot(RobotObstacle),
}

impl DynamicObstacle {
    pub fn intersects_primitive(&self, p: &MotionPrimitive, t_start: f64) -> bool {
        match self {
            DynamicObstacle::Linear(o) => o.intersects_primitive(p, t_start),
            DynamicObstacle::Robot(o) => o.intersects_primitive(p, t_start),
        }
    }

    pub fn swept_aabb(&self, t0: f64, t1: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            DynamicObstacle::Linear(o) => o.swept_aabb(t0, t1),
            DynamicObstacle::Robot(o) => o.swept_aabb(t0, t1),
        }
    }
}

pub(crate) fn aabbs_overlap(alo: &[f64], ahi: &[f64], blo: &[f64], bhi: &[f64]) -> bool {
    alo.iter()
        .zip(ahi)
        .zip(blo.iter().zip(bhi))
        .all(|((al, ah), (bl, bh))| al <= bh && bl <= ah)
}

/// Horizon beyond which another robot's committed trajectory is ignored:
/// the stopping time from full speed, `min(v_max / a_max, T)`, valid for the
/// acceleration-controlled tier. Higher orders fall back to the full duration.
pub fn stopping_cutoff(spec: &SystemSpec, total_duration: f64) -> f64 {
    if spec.order != 2 {
        return total_duration;
    }
    (spec.v_max / spec.a_max).min(total_duration)
}

/// One obstacle of the on-disk schedule: each face row is the normal
/// components followed by the offset, `[a_0, ..., a_{m-1}, b0]`.
#[derive(Serialize, Deserialize)]
struct ObstacleFileEntry {
    faces: Vec<Vec<f64>>,
    vertices: Vec<Vec<f64>>,
    v_c: Vec<f64>,
    #[serde(default)]
    v_e: f64,
    #[serde(default)]
    active_from: f64,
    #[serde(default)]
    active_until: Option<f64>,
}

/// Obstacle schedule file: a JSON list of moving polyhedra.
pub fn obstacles_from_json(text: &str) -> Result<Vec<LinearObstacle>> {
    let list: Vec<ObstacleFileEntry> =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("obstacles: {e}")))?;
    list.into_iter()
        .enumerate()
        .map(|(i, entry)| {
            let faces = entry
                .faces
                .iter()
                .map(|row| {
                    if row.len() < 2 {
                        return Err(Error::Parse(format!("obstacle {i}: short face row")));
                    }
                    Ok(Face {
                        normal: row[..row.len() - 1].to_vec(),
                        offset: row[row.len() - 1],
                    })
                })
                .collect::<Result<Vec<Face>>>()?;
            let shape = ConvexPolytope::new(faces, entry.vertices)
                .map_err(|e| Error::Parse(format!("obstacle {i}: {e}")))?;
            let obstacle = LinearObstacle {
                shape,
                velocity: entry.v_c,
                inflation_rate: entry.v_e,
                active_from: entry.active_from,
                active_until: entry.active_until.unwrap_or(f64::INFINITY),
            };
            obstacle
                .validate()
                .map_err(|e| Error::Parse(format!("obstacle {i}: {e}")))?;
            Ok(obstacle)
        })
        .collect()
}

/// Serialize obstacles back into the schedule schema.
pub fn obstacles_to_json(obstacles: &[LinearObstacle]) -> String {
    let entries: Vec<ObstacleFileEntry> = obstacles
        .iter()
        .map(|o| ObstacleFileEntry {
            faces: o
                .shape
                .faces()
                .iter()
                .map(|f| {
                    let mut row = f.normal.clone();
                    row.push(f.offset);
                    row
                })
                .collect(),
            vertices: o.shape.vertices().to_vec(),
            v_c: o.velocity.clone(),
            v_e: o.inflation_rate,
            active_from: o.active_from,
            active_until: o.active_until.is_finite().then_some(o.active_until),
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("obstacle serialization")
}
