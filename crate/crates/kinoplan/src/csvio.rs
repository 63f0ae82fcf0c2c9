//! Trajectory CSV codec: one row per primitive knot carrying the full start
//! state and the control applied from it, plus a final row for the end state.
//! The rows determine the trajectory exactly, so reloading reconstructs it
//! via closed-form propagation and re-validates continuity. This is the wire
//! format planners emit and robot-obstacle schedules reference.

use crate::dynamics::{propagate, ControlInput, State, SystemSpec, Trajectory};
use std::fmt::Write as _;

pub fn header(spec: &SystemSpec) -> String {
    let axes = ["x", "y", "z"];
    let mut cols = vec!["t".to_string()];
    for a in 0..spec.dim {
        cols.push(format!("p{}", axes[a]));
    }
    let deriv_names = ["v", "a"];
    for d in 0..spec.order - 1 {
        for a in 0..spec.dim {
            cols.push(format!("{}{}", deriv_names[d], axes[a]));
        }
    }
    if spec.yaw.is_some() {
        cols.push("yaw".into());
    }
    cols.push("segment_index".into());
    for a in 0..spec.dim {
        cols.push(format!("u{}", axes[a]));
    }
    if spec.yaw.is_some() {
        cols.push("u_psi".into());
    }
    cols.join(",")
}

fn push_state(line: &mut String, s: &State) {
    let _ = write!(line, "{}", s.t);
    for p in &s.pos {
        let _ = write!(line, ",{p}");
    }
    for d in &s.derivs {
        for v in d {
            let _ = write!(line, ",{v}");
        }
    }
    if let Some(y) = s.yaw {
        let _ = write!(line, ",{y}");
    }
}

pub fn trajectory_to_csv(traj: &Trajectory, spec: &SystemSpec) -> String {
    let mut out = header(spec);
    out.push('\n');
    for (i, seg) in traj.segments().iter().enumerate() {
        let mut line = String::new();
        push_state(&mut line, &seg.start);
        let _ = write!(line, ",{i}");
        for u in &seg.control.u {
            let _ = write!(line, ",{u}");
        }
        if spec.yaw.is_some() {
            let _ = write!(line, ",{}", seg.control.u_psi.unwrap_or(0.0));
        }
        out.push_str(&line);
        out.push('\n');
    }
    if let Some(end) = traj.end_state() {
        let mut line = String::new();
        push_state(&mut line, end);
        let _ = write!(line, ",{}", traj.segments().len());
        for _ in 0..spec.dim {
            line.push_str(",0");
        }
        if spec.yaw.is_some() {
            line.push_str(",0");
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn trajectory_from_csv(text: &str, spec: &SystemSpec) -> crate::Result<Trajectory> {
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| crate::Error::Parse(format!("line {}: {e}", ln + 1)))
            })
            .collect::<Result<_, _>>()?;
        rows.push(vals);
    }
    if rows.len() < 2 {
        return Ok(Trajectory::empty());
    }
    let dim = spec.dim;
    let state_cols = 1 + dim * spec.order + usize::from(spec.yaw.is_some());
    let parse_state = |row: &[f64]| -> State {
        let mut derivs = Vec::new();
        for d in 0..spec.order - 1 {
            let base = 1 + dim + d * dim;
            derivs.push(row[base..base + dim].to_vec());
        }
        State {
            pos: row[1..1 + dim].to_vec(),
            derivs,
            yaw: spec.yaw.map(|_| row[state_cols - 1]),
            t: row[0],
        }
    };
    let mut segments = Vec::new();
    for w in rows.windows(2) {
        let (row, next) = (&w[0], &w[1]);
        let state = parse_state(row);
        let u = row[state_cols + 1..state_cols + 1 + dim].to_vec();
        let u_psi = spec.yaw.map(|_| row[state_cols + 1 + dim]);
        let dt = next[0] - row[0];
        if !(dt > 0.0) {
            return Err(crate::Error::Parse("non-increasing time stamps".into()));
        }
        let prim = propagate(&state, &ControlInput { u, u_psi }, dt);
        // the reconstructed end must match the next row's state
        let next_state = parse_state(next);
        let gap = prim
            .end
            .pos
            .iter()
            .zip(&next_state.pos)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if gap > 1e-6 {
            return Err(crate::Error::Parse(format!(
                "row mismatch after propagation: gap {gap}"
            )));
        }
        segments.push(prim);
    }
    Trajectory::from_segments(segments)
}
