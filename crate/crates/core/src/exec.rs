//! Data-parallel loops with a sequential fallback.
//!
//! With the `parallel` feature (default) the loops below run on the rayon
//! global pool; without it they run on the calling thread. Output order is
//! the index order in both cases, and work items derive any randomness from
//! their index, never from execution order, so both builds produce identical
//! results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n`, collecting results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_indices`]. The error with the lowest index wins,
/// so failures are reported deterministically regardless of scheduling.
#[cfg(feature = "parallel")]
pub fn try_map_indices<U, E, F>(n: usize, f: F) -> Result<Vec<U>, E>
where
    U: Send,
    E: Send,
    F: Fn(usize) -> Result<U, E> + Sync + Send,
{
    map_indices(n, f).into_iter().collect()
}

/// Fallible variant of [`map_indices`].
#[cfg(not(feature = "parallel"))]
pub fn try_map_indices<U, E, F>(n: usize, f: F) -> Result<Vec<U>, E>
where
    F: Fn(usize) -> Result<U, E>,
{
    (0..n).map(f).collect()
}

/// Runs `f` on a pool with `threads` workers and returns its result. Used by
/// the benchmark suite to compare thread counts; callers normally rely on the
/// global pool instead.
#[cfg(feature = "parallel")]
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool construction")
        .install(f)
}

/// Sequential build: `f` runs on the calling thread.
#[cfg(not(feature = "parallel"))]
pub fn with_threads<T>(_threads: usize, f: impl FnOnce() -> T) -> T {
    f()
}

/// Caps the global worker pool. Returns false if the pool was already
/// initialized or the build is sequential.
#[cfg(feature = "parallel")]
pub fn configure_threads(threads: usize) -> bool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .is_ok()
}

/// Sequential build: nothing to configure.
#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_threads: usize) -> bool {
    false
}
