//! Thin switch between rayon and sequential iteration.
//!
//! Call sites map a pure function over an index range or slice and collect in
//! order, so the parallel and sequential paths produce identical results.
//! Batches below the thresholds run sequentially even in the parallel build:
//! dispatch overhead dominates small control sets and short scan lines.

/// Minimum slice length before fanning out (successor expansion batches).
const MIN_PAR_ITEMS: usize = 64;
/// Minimum index-range length before fanning out (scan lines, sample grids).
const MIN_PAR_INDICES: usize = 1024;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub(crate) fn map_indices<R: Send>(n: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    if n < MIN_PAR_INDICES {
        (0..n).map(f).collect()
    } else {
        (0..n).into_par_iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indices<R>(n: usize, f: impl Fn(usize) -> R) -> Vec<R> {
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub(crate) fn map_slice<T: Sync, R: Send>(
    items: &[T],
    f: impl Fn(&T) -> R + Sync + Send,
) -> Vec<R> {
    if items.len() < MIN_PAR_ITEMS {
        items.iter().map(f).collect()
    } else {
        items.par_iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_slice<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}
