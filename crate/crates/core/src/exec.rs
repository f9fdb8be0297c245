//! Data-parallel loops over particles and grid nodes.
//!
//! With the `parallel` feature these run on the current rayon pool, otherwise
//! they are plain sequential loops. Each closure call writes only its own
//! output slot, so results are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Calls `f(j, column_j)` for every column of a column-major buffer with `d` rows.
pub fn for_each_column<F>(data: &mut [f64], d: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_exact_mut(d).enumerate().for_each(|(j, c)| f(j, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_exact_mut(d).enumerate().for_each(|(j, c)| f(j, c));
}

/// Like [`for_each_column`] over two buffers of the same shape.
pub fn for_each_column_pair<F>(a: &mut [f64], b: &mut [f64], d: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync + Send,
{
    assert_eq!(a.len(), b.len());
    #[cfg(feature = "parallel")]
    a.par_chunks_exact_mut(d)
        .zip(b.par_chunks_exact_mut(d))
        .enumerate()
        .for_each(|(j, (x, y))| f(j, x, y));
    #[cfg(not(feature = "parallel"))]
    a.chunks_exact_mut(d)
        .zip(b.chunks_exact_mut(d))
        .enumerate()
        .for_each(|(j, (x, y))| f(j, x, y));
}

/// Collects `f(i)` for `i in 0..n`, in index order.
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..n).map(f).collect();
}

/// Whether loops in this build run on a thread pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
