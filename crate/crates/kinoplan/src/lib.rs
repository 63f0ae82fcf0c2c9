//! Kinodynamic trajectory planning over motion-primitive lattices.
//!
//! The planner searches a state lattice induced by applying a finite set of
//! constant control inputs to a chain-of-integrators model for a fixed
//! duration per segment. On top of the basic shortest-trajectory search it
//! supports:
//!
//! - collision costs from a truncated artificial potential field, with an
//!   optional tunnel constraint around a nominal trajectory,
//! - yaw planning under a sensor field-of-view constraint,
//! - moving convex polyhedral obstacles with exact root-based collision
//!   checks and time-augmented search under a planning horizon,
//! - incremental replanning (LPA* with graph pruning), and
//! - sequential and decentralized multi-robot planning.
//!
//! The building blocks live in one module per concern: [`poly`] (polynomial
//! kernel), [`dynamics`] (system model and primitives), [`mod@env`] (occupancy
//! grid, distance/potential fields, tunnel), [`obstacles`] (moving polyhedra),
//! [`search`] (A*/LPA* planners) and [`multirobot`] (team planning).
//!
//! With the default `parallel` feature, successor expansion, distance
//! transforms and pairwise trajectory verification use rayon; disabling the
//! feature yields an equivalent sequential build.

// validation guards use `!(x > 0.0)` on purpose: the negation also rejects
// NaN, which `x <= 0.0` lets through
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// small fixed-dimension kernels index by axis throughout
#![allow(clippy::needless_range_loop)]

pub mod csvio;
pub mod dynamics;
pub mod env;
pub mod multirobot;
pub mod obstacles;
pub mod poly;
pub mod search;

mod parallel;

use thiserror::Error;

/// Errors surfaced by planner construction and queries.
#[derive(Debug, Error)]
pub enum Error {
    /// A system description or plan request violates a documented invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// A polytope description is inconsistent (face/vertex mismatch, open hull,
    /// or a non-symmetric robot shape where symmetry is required).
    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),
    /// Query time outside a trajectory's domain.
    #[error("time {t} outside trajectory domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    /// Malformed scenario or map file.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
