//! Minimal self-contained SVG writer for scenario plots: occupancy cells,
//! potential-field heat, trajectories, yaw triangles and obstacle outlines.
//! Elements are collected in world coordinates and projected once the final
//! bounds are known.

use kinoplan::dynamics::Trajectory;
use kinoplan::env::{Cell, OccupancyGrid, PotentialField};
use kinoplan::obstacles::ConvexPolytope;
use std::fmt::Write as _;

const SCALE: f64 = 60.0; // pixels per meter
const MARGIN: f64 = 0.5; // meters of padding around the content

enum Element {
    /// Axis-aligned rectangle: low corner, size, fill.
    Rect([f64; 2], [f64; 2], String),
    /// Closed polygon with stroke color and fill opacity.
    Polygon(Vec<[f64; 2]>, String, f64),
    /// Open polyline.
    Polyline(Vec<[f64; 2]>, String),
    Circle([f64; 2], String),
}

pub struct Plot {
    min: [f64; 2],
    max: [f64; 2],
    elements: Vec<Element>,
}

impl Plot {
    pub fn new() -> Plot {
        Plot {
            min: [f64::INFINITY; 2],
            max: [f64::NEG_INFINITY; 2],
            elements: Vec::new(),
        }
    }

    fn cover(&mut self, p: &[f64]) {
        for a in 0..2 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }

    pub fn add_grid(&mut self, grid: &OccupancyGrid, potential: Option<&PotentialField>) {
        let dims = grid.dims();
        let res = grid.resolution();
        let o = grid.origin().to_vec();
        self.cover(&o);
        self.cover(&[o[0] + dims[0] as f64 * res, o[1] + dims[1] as f64 * res]);
        for x in 0..dims[0] {
            for y in 0..dims[1] {
                let idx = [x, y];
                let fill = match grid.cell(&idx) {
                    Cell::Occupied => Some("#303030".to_string()),
                    Cell::Unknown => Some("#d8d8d8".to_string()),
                    Cell::Free => potential.and_then(|pf| {
                        let u = pf.value_flat(grid.flat_index(&idx));
                        (u > 0.0).then(|| {
                            let frac = (u / pf.f_max).clamp(0.0, 1.0);
                            format!("rgba(220,60,40,{:.3})", 0.15 + 0.55 * frac)
                        })
                    }),
                };
                if let Some(fill) = fill {
                    let c = grid.cell_center(&idx);
                    self.elements.push(Element::Rect(
                        [c[0] - 0.5 * res, c[1] - 0.5 * res],
                        [res, res],
                        fill,
                    ));
                }
            }
        }
    }

    pub fn add_polytope(&mut self, shape: &ConvexPolytope, color: &str, opacity: f64) {
        // order vertices by angle around the centroid for a simple polygon
        let n = shape.vertices().len() as f64;
        let cx = shape.vertices().iter().map(|v| v[0]).sum::<f64>() / n;
        let cy = shape.vertices().iter().map(|v| v[1]).sum::<f64>() / n;
        let mut verts: Vec<[f64; 2]> = shape.vertices().iter().map(|v| [v[0], v[1]]).collect();
        verts.sort_by(|a, b| {
            (a[1] - cy)
                .atan2(a[0] - cx)
                .total_cmp(&(b[1] - cy).atan2(b[0] - cx))
        });
        for v in &verts {
            self.cover(v);
        }
        self.elements
            .push(Element::Polygon(verts, color.to_string(), opacity));
    }

    pub fn add_trajectory(&mut self, traj: &Trajectory, color: &str, yaw_triangles: bool) {
        if traj.is_empty() {
            return;
        }
        let samples = 24 * traj.segments().len();
        let pts: Vec<[f64; 2]> = (0..=samples)
            .filter_map(|i| {
                let t = traj.start_time() + traj.duration() * i as f64 / samples as f64;
                traj.position_clamped(t).map(|p| [p[0], p[1]])
            })
            .collect();
        for p in &pts {
            self.cover(p);
        }
        self.elements
            .push(Element::Polyline(pts, color.to_string()));
        if yaw_triangles {
            for seg in traj.segments() {
                if let Some(yaw) = seg.yaw_at(0.0) {
                    let p = &seg.start.pos;
                    let (s, c) = yaw.sin_cos();
                    let tri = vec![
                        [p[0] + 0.22 * c, p[1] + 0.22 * s],
                        [p[0] - 0.08 * s, p[1] + 0.08 * c],
                        [p[0] + 0.08 * s, p[1] - 0.08 * c],
                    ];
                    self.elements
                        .push(Element::Polygon(tri, color.to_string(), 0.8));
                }
            }
        }
    }

    pub fn add_marker(&mut self, p: &[f64], color: &str) {
        self.cover(p);
        self.elements
            .push(Element::Circle([p[0], p[1]], color.to_string()));
    }

    pub fn finish(mut self) -> String {
        if !self.min[0].is_finite() {
            self.min = [0.0, 0.0];
            self.max = [1.0, 1.0];
        }
        for a in 0..2 {
            self.min[a] -= MARGIN;
            self.max[a] += MARGIN;
        }
        let to_x = |wx: f64| (wx - self.min[0]) * SCALE;
        let to_y = |wy: f64| (self.max[1] - wy) * SCALE;
        let mut body = String::new();
        for e in &self.elements {
            match e {
                Element::Rect(lo, size, fill) => {
                    let _ = write!(
                        body,
                        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                        to_x(lo[0]),
                        to_y(lo[1] + size[1]),
                        size[0] * SCALE,
                        size[1] * SCALE,
                        fill
                    );
                }
                Element::Polygon(pts, color, opacity) => {
                    let s: Vec<String> = pts
                        .iter()
                        .map(|p| format!("{:.2},{:.2}", to_x(p[0]), to_y(p[1])))
                        .collect();
                    let _ = write!(
                        body,
                        r#"<polygon points="{}" fill="{}" fill-opacity="{:.2}" stroke="{}"/>"#,
                        s.join(" "),
                        color,
                        opacity,
                        color
                    );
                }
                Element::Polyline(pts, color) => {
                    let s: Vec<String> = pts
                        .iter()
                        .map(|p| format!("{:.2},{:.2}", to_x(p[0]), to_y(p[1])))
                        .collect();
                    let _ = write!(
                        body,
                        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
                        s.join(" "),
                        color
                    );
                }
                Element::Circle(p, color) => {
                    let _ = write!(
                        body,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{}"/>"#,
                        to_x(p[0]),
                        to_y(p[1]),
                        color
                    );
                }
            }
            body.push('\n');
        }
        let w = (self.max[0] - self.min[0]) * SCALE;
        let h = (self.max[1] - self.min[1]) * SCALE;
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
        )
    }
}

/// Trajectory colors cycled across robots.
pub const PALETTE: [&str; 6] = [
    "#c2185b", "#1565c0", "#2e7d32", "#ef6c00", "#6a1b9a", "#00838f",
];
