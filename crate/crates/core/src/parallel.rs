//! Data-parallel sweep execution.
//!
//! Sweep points are independent; results are collected by index so the
//! output order never depends on scheduling. The `parallel` feature (on by
//! default) backs this with a bounded rayon pool; without it, or with
//! `jobs = 1`, the sequential path runs instead and produces identical
//! results.

/// Applies `f` to every item, preserving input order in the output.
/// `jobs = None` uses the available parallelism.
#[cfg(feature = "parallel")]
pub fn run_indexed<T, R, F>(jobs: Option<usize>, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    use rayon::prelude::*;

    let threads = jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if threads <= 1 || items.len() <= 1 {
        return run_indexed_seq(items, f);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
    match pool {
        Ok(pool) => pool.install(|| {
            items.par_iter().enumerate().map(|(i, item)| f(i, item)).collect()
        }),
        Err(_) => run_indexed_seq(items, f),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn run_indexed<T, R, F>(_jobs: Option<usize>, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    run_indexed_seq(items, f)
}

/// Sequential reference path; the benchmark suite compares against it.
pub fn run_indexed_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(usize, &T) -> R,
{
    items.iter().enumerate().map(|(i, item)| f(i, item)).collect()
}
