//! Index-parallel loops with a sequential fallback.
//!
//! Each closure receives the index it is working on and derives its random
//! stream from that index, so both paths produce identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a block distributes its per-index updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses the ambient rayon pool; without the `parallel` feature this runs
    /// sequentially.
    Parallel,
}

#[cfg(feature = "parallel")]
const MIN_ROWS_PER_TASK: usize = 16;

/// Calls `f(row, z_row, x_row)` for every row of two row-major matrices.
pub(crate) fn for_each_row<F>(exec: Execution, width: usize, z: &mut [bool], x: &mut [f64], f: F)
where
    F: Fn(usize, &mut [bool], &mut [f64]) + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => z
            .par_chunks_mut(width)
            .zip(x.par_chunks_mut(width))
            .enumerate()
            .with_min_len(MIN_ROWS_PER_TASK)
            .for_each(|(j, (zr, xr))| f(j, zr, xr)),
        _ => z
            .chunks_mut(width)
            .zip(x.chunks_mut(width))
            .enumerate()
            .for_each(|(j, (zr, xr))| f(j, zr, xr)),
    }
}

/// Calls `f(j, &mut a[j], &mut b[j])` for every index.
pub(crate) fn for_each_pair<A, B, F>(exec: Execution, a: &mut [A], b: &mut [B], f: F)
where
    A: Send,
    B: Send,
    F: Fn(usize, &mut A, &mut B) + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => a
            .par_iter_mut()
            .zip(b.par_iter_mut())
            .enumerate()
            .with_min_len(MIN_ROWS_PER_TASK)
            .for_each(|(j, (x, y))| f(j, x, y)),
        _ => a
            .iter_mut()
            .zip(b.iter_mut())
            .enumerate()
            .for_each(|(j, (x, y))| f(j, x, y)),
    }
}

/// `(0..n).map(f).collect()`, in index order.
pub(crate) fn map_indices<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}
