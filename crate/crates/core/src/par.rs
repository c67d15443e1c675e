//! Data-parallel helpers.
//!
//! Every helper returns its results in index order, so reductions performed
//! by callers are identical whether the work ran on the rayon pool or on the
//! calling thread. Without the `parallel` feature all helpers are plain
//! sequential loops. [`force_sequential`] switches the calling thread to the
//! sequential path at runtime, which the benches use to compare both.

use std::cell::Cell;

thread_local! {
    static SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with every helper in this module forced onto the calling thread.
pub fn force_sequential<R>(f: impl FnOnce() -> R) -> R {
    let previous = SEQUENTIAL.with(|s| s.replace(true));
    let out = f();
    SEQUENTIAL.with(|s| s.set(previous));
    out
}

#[cfg(feature = "parallel")]
fn parallel_enabled() -> bool {
    !SEQUENTIAL.with(|s| s.get())
}

/// Whether helpers will currently dispatch to the rayon pool.
pub fn is_parallel() -> bool {
    #[cfg(feature = "parallel")]
    {
        parallel_enabled()
    }
    #[cfg(not(feature = "parallel"))]
    {
        false
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn map_slice<A, T, F>(items: &[A], f: F) -> Vec<T>
where
    A: Sync,
    T: Send,
    F: Fn(&A) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Number of indices in `0..n` satisfying `pred`.
pub fn count_indices<F>(n: usize, pred: F) -> usize
where
    F: Fn(usize) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().filter(|&i| pred(i)).count();
    }
    (0..n).filter(|&i| pred(i)).count()
}

/// Fallible `map_indices`; the first error in index order is returned.
pub fn try_map_indices<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indices(n, f).into_iter().collect()
}
