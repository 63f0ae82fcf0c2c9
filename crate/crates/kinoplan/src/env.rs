//! Static workspace: occupancy grid, exact Euclidean distance field, truncated
//! artificial potential field, per-primitive collision and collision-cost
//! evaluation, and the tunnel constraint around a nominal trajectory.

use crate::dynamics::{MotionPrimitive, SystemSpec, Trajectory};
use crate::parallel;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Occupancy of one grid cell. Unknown cells are treated as free space for
/// both collision checking and the distance field (greedy exploration
/// assumption; the potential field must not repel from unexplored space).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Occupied,
    Unknown,
}

/// Axis-aligned occupancy grid over cell centers. Cells are stored row-major
/// with the first axis slowest and the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    origin: Vec<f64>,
    resolution: f64,
    dims: Vec<usize>,
    cells: Vec<Cell>,
}

/// On-disk grid schema: cells encoded 0 = free, 1 = occupied, 2 = unknown.
#[derive(Serialize, Deserialize)]
struct GridFile {
    origin: Vec<f64>,
    resolution: f64,
    dims: Vec<usize>,
    cells: Vec<u8>,
}

impl OccupancyGrid {
    pub fn new(origin: Vec<f64>, resolution: f64, dims: Vec<usize>, fill: Cell) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(Error::InvalidConfig(
                "grid resolution must be positive".into(),
            ));
        }
        if dims.is_empty() || dims.contains(&0) || dims.len() != origin.len() {
            return Err(Error::InvalidConfig(
                "grid dims must be >= 1 per axis".into(),
            ));
        }
        let n = dims.iter().product();
        Ok(OccupancyGrid {
            origin,
            resolution,
            dims,
            cells: vec![fill; n],
        })
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (i, &d) in idx.iter().zip(&self.dims) {
            debug_assert!(*i < d);
            flat = flat * d + i;
        }
        flat
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for a in (0..self.dims.len()).rev() {
            idx[a] = flat % self.dims[a];
            flat /= self.dims[a];
        }
        idx
    }

    /// Cell index containing a world point, or None when out of bounds.
    pub fn world_to_cell(&self, p: &[f64]) -> Option<Vec<usize>> {
        let mut idx = Vec::with_capacity(self.dims.len());
        for a in 0..self.dims.len() {
            let c = ((p[a] - self.origin[a]) / self.resolution).floor();
            if c < 0.0 || c >= self.dims[a] as f64 {
                return None;
            }
            idx.push(c as usize);
        }
        Some(idx)
    }

    /// World coordinates of a cell center.
    pub fn cell_center(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .zip(&self.origin)
            .map(|(&i, &o)| o + (i as f64 + 0.5) * self.resolution)
            .collect()
    }

    pub fn cell(&self, idx: &[usize]) -> Cell {
        self.cells[self.flat_index(idx)]
    }

    pub fn cell_flat(&self, flat: usize) -> Cell {
        self.cells[flat]
    }

    pub fn set_cell(&mut self, idx: &[usize], value: Cell) {
        let flat = self.flat_index(idx);
        self.cells[flat] = value;
    }

    /// Occupancy at a world point; out-of-bounds reads report `occupied` when
    /// `bounded` is set (the scenario declares a bounded workspace) and free
    /// otherwise.
    pub fn occupied_at_point(&self, p: &[f64], bounded: bool) -> bool {
        match self.world_to_cell(p) {
            Some(idx) => self.cell(&idx) == Cell::Occupied,
            None => bounded,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GridFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("grid: {e}")))?;
        let expect: usize = file.dims.iter().product();
        if file.cells.len() != expect {
            return Err(Error::Parse(format!(
                "grid: dims product {} != cell array length {}",
                expect,
                file.cells.len()
            )));
        }
        let cells = file
            .cells
            .iter()
            .map(|&b| match b {
                0 => Ok(Cell::Free),
                1 => Ok(Cell::Occupied),
                2 => Ok(Cell::Unknown),
                other => Err(Error::Parse(format!("grid: invalid cell code {other}"))),
            })
            .collect::<Result<Vec<Cell>>>()?;
        let grid = OccupancyGrid::new(file.origin, file.resolution, file.dims, Cell::Free)?;
        Ok(OccupancyGrid { cells, ..grid })
    }

    pub fn to_json(&self) -> String {
        let file = GridFile {
            origin: self.origin.clone(),
            resolution: self.resolution,
            dims: self.dims.clone(),
            cells: self
                .cells
                .iter()
                .map(|c| match c {
                    Cell::Free => 0,
                    Cell::Occupied => 1,
                    Cell::Unknown => 2,
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("grid serialization")
    }
}

/// Euclidean distance (meters) from each cell center to the nearest occupied
/// cell center; infinite when the grid holds no obstacles.
#[derive(Debug, Clone)]
pub struct DistanceField {
    origin: Vec<f64>,
    resolution: f64,
    dims: Vec<usize>,
    dist: Vec<f64>,
}

impl DistanceField {
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn distance_flat(&self, flat: usize) -> f64 {
        self.dist[flat]
    }

    pub fn distance_at_cell(&self, idx: &[usize]) -> f64 {
        let mut flat = 0;
        for (i, d) in idx.iter().zip(&self.dims) {
            flat = flat * d + i;
        }
        self.dist[flat]
    }
}

/// Exact Euclidean distance transform (cell-center metric) via per-axis lower
/// envelopes of parabolas. Unknown cells count as free.
pub fn distance_transform(grid: &OccupancyGrid) -> DistanceField {
    let n = grid.len();
    // squared distance in cell units; exact in f64 for any practical grid
    let mut sq: Vec<f64> = (0..n)
        .map(|i| {
            if grid.cell_flat(i) == Cell::Occupied {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();

    let dims = grid.dims().to_vec();
    let ndim = dims.len();
    for axis in 0..ndim {
        let len = dims[axis];
        if len == 1 {
            continue;
        }
        let stride: usize = dims[axis + 1..].iter().product();
        let lines = n / len;
        let transformed = parallel::map_indices(lines, |line| {
            // line -> base flat index with idx[axis] = 0
            let block = line / stride;
            let rem = line % stride;
            let base = block * stride * len + rem;
            let mut f = Vec::with_capacity(len);
            for j in 0..len {
                f.push(sq[base + j * stride]);
            }
            envelope_1d(&f)
        });
        for (line, out) in transformed.iter().enumerate() {
            let block = line / stride;
            let rem = line % stride;
            let base = block * stride * len + rem;
            for (j, &v) in out.iter().enumerate() {
                sq[base + j * stride] = v;
            }
        }
    }

    let res = grid.resolution();
    let dist = sq.iter().map(|&d2| d2.sqrt() * res).collect();
    DistanceField {
        origin: grid.origin().to_vec(),
        resolution: res,
        dims,
        dist,
    }
}

/// 1-D squared-distance transform: lower envelope of parabolas rooted at the
/// finite entries of `f`.
fn envelope_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![f64::INFINITY; n];
    let mut v: Vec<usize> = Vec::with_capacity(n); // parabola roots
    let mut z: Vec<f64> = Vec::with_capacity(n + 1); // envelope breakpoints
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        let fq = f[q];
        let qf = q as f64;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    z.push(f64::INFINITY);
                    break;
                }
                Some(&p) => {
                    let pf = p as f64;
                    let s = ((fq + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
                    if s <= *z.get(v.len() - 1).unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        *z.last_mut().unwrap() = s;
                        z.push(f64::INFINITY);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        return out;
    }
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *slot = d * d + f[v[k]];
    }
    out
}

/// Truncated artificial potential field derived from the distance field:
/// `U = f_max (1 - d/d_thr)^k` for `d < d_thr`, zero beyond the cutoff.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub f_max: f64,
    pub d_thr: f64,
    pub k: f64,
    origin: Vec<f64>,
    resolution: f64,
    dims: Vec<usize>,
    values: Vec<f64>,
}

/// Build the potential field from a distance field.
pub fn build_potential(df: &DistanceField, f_max: f64, d_thr: f64, k: f64) -> PotentialField {
    assert!(
        f_max > 0.0 && d_thr > 0.0 && k > 0.0,
        "potential parameters must be positive"
    );
    let values = df
        .dist
        .iter()
        .map(|&d| {
            if d >= d_thr {
                0.0
            } else {
                f_max * (1.0 - d / d_thr).powf(k)
            }
        })
        .collect();
    PotentialField {
        f_max,
        d_thr,
        k,
        origin: df.origin.clone(),
        resolution: df.resolution,
        dims: df.dims.clone(),
        values,
    }
}

impl PotentialField {
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn value_flat(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    /// Nearest-cell potential lookup; out-of-bounds positions read zero.
    pub fn value_at_point(&self, p: &[f64]) -> f64 {
        let mut flat = 0;
        for a in 0..self.dims.len() {
            let c = ((p[a] - self.origin[a]) / self.resolution).floor();
            if c < 0.0 || c >= self.dims[a] as f64 {
                return 0.0;
            }
            flat = flat * self.dims[a] + c as usize;
        }
        self.values[flat]
    }
}

/// Number of samples for per-primitive integrals: `ceil(v_max dt / r_m)`,
/// floored at 2 so both endpoints are always sampled.
pub fn sample_count_for(dt: f64, v_max: f64, r_m: f64) -> usize {
    assert!(r_m > 0.0, "grid resolution must be positive");
    ((v_max * dt / r_m).ceil() as usize).max(2)
}

/// Sampling density for `p` under the spec's velocity bound.
pub fn sample_count(p: &MotionPrimitive, spec: &SystemSpec, r_m: f64) -> usize {
    sample_count_for(p.dt, spec.v_max, r_m)
}

/// Line-integral collision cost of a primitive through the potential field,
/// approximated by a uniform-time Riemann sum over the standard sample count.
pub fn collision_cost(p: &MotionPrimitive, pf: &PotentialField, spec: &SystemSpec) -> f64 {
    let count = sample_count(p, spec, pf.resolution());
    let dt_s = p.dt / (count - 1) as f64;
    let mut total = 0.0;
    for i in 0..count {
        let s = dt_s * i as f64;
        let u = pf.value_at_point(&p.position_at(s));
        if u > 0.0 {
            let v: f64 = p.velocity_at(s).iter().map(|x| x * x).sum::<f64>().sqrt();
            total += u * v * dt_s;
        }
    }
    total
}

/// Sampled static collision check. The sample count is doubled relative to
/// the cost rule because missing a cell here loses soundness, not accuracy.
pub fn primitive_collides_static(
    p: &MotionPrimitive,
    grid: &OccupancyGrid,
    spec: &SystemSpec,
    bounded: bool,
) -> bool {
    let count = 2 * sample_count(p, spec, grid.resolution());
    let dt_s = p.dt / (count - 1) as f64;
    (0..count).any(|i| grid.occupied_at_point(&p.position_at(dt_s * i as f64), bounded))
}

/// Search corridor around a nominal trajectory: the set of positions within
/// `radius` of the reference path (its Minkowski sum with a disk).
#[derive(Debug, Clone)]
pub struct Tunnel {
    radius: f64,
    polyline: Vec<Vec<f64>>,
}

impl Tunnel {
    /// Sample the reference trajectory into a polyline with spatial step at
    /// most `max_step` between consecutive samples.
    pub fn around(reference: &Trajectory, radius: f64, max_step: f64) -> Tunnel {
        assert!(radius > 0.0, "tunnel radius must be positive");
        let mut polyline = Vec::new();
        for seg in reference.segments() {
            let v_peak = (0..=8)
                .map(|i| {
                    let s = seg.dt * i as f64 / 8.0;
                    seg.velocity_at(s).iter().map(|x| x * x).sum::<f64>().sqrt()
                })
                .fold(0.0, f64::max)
                .max(1e-6);
            let steps = ((v_peak * seg.dt / max_step).ceil() as usize).max(1);
            for i in 0..steps {
                polyline.push(seg.position_at(seg.dt * i as f64 / steps as f64));
            }
        }
        if let Some(end) = reference.end_state() {
            polyline.push(end.pos.clone());
        }
        Tunnel { radius, polyline }
    }

    /// A tunnel that accepts everything (radius sentinel = infinity).
    pub fn unbounded() -> Tunnel {
        Tunnel {
            radius: f64::INFINITY,
            polyline: Vec::new(),
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn polyline(&self) -> &[Vec<f64>] {
        &self.polyline
    }

    /// Euclidean distance from a point to the reference polyline.
    pub fn distance_to_reference(&self, p: &[f64]) -> f64 {
        if self.polyline.is_empty() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for w in self.polyline.windows(2) {
            best = best.min(point_segment_distance(p, &w[0], &w[1]));
        }
        if self.polyline.len() == 1 {
            best = dist(p, &self.polyline[0]);
        }
        best
    }

    /// True iff every position sample of the primitive stays inside the tunnel.
    pub fn contains_primitive(&self, p: &MotionPrimitive, samples: usize) -> bool {
        if self.radius.is_infinite() {
            return true;
        }
        let count = samples.max(2);
        let dt_s = p.dt / (count - 1) as f64;
        (0..count)
            .all(|i| self.distance_to_reference(&p.position_at(dt_s * i as f64)) <= self.radius)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut ab2 = 0.0;
    let mut ap_ab = 0.0;
    for k in 0..p.len() {
        let d = b[k] - a[k];
        ab2 += d * d;
        ap_ab += (p[k] - a[k]) * d;
    }
    if ab2 <= 1e-300 {
        return dist(p, a);
    }
    let t = (ap_ab / ab2).clamp(0.0, 1.0);
    let proj: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
    dist(p, &proj)
}
