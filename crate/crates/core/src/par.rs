//! Trial fan-out used by the randomized law checkers.
//!
//! With the `parallel` feature (default) trials run on the rayon pool; without
//! it the same closures run sequentially. Results are always merged by trial
//! index, so the two modes produce identical reports.

/// Maps `f` over `0..trials` and collects the results in trial order.
#[cfg(feature = "parallel")]
pub fn map_trials<T, F>(trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..trials).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..trials` and collects the results in trial order.
#[cfg(not(feature = "parallel"))]
pub fn map_trials<T, F>(trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..trials).map(f).collect()
}

/// Returns the lowest-index `Some` produced by `f` over `0..trials`, or `None`.
#[cfg(feature = "parallel")]
pub fn find_first_violation<T, F>(trials: u64, f: F) -> Option<T>
where
    T: Send,
    F: Fn(u64) -> Option<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..trials).into_par_iter().find_map_first(f)
}

/// Returns the lowest-index `Some` produced by `f` over `0..trials`, or `None`.
#[cfg(not(feature = "parallel"))]
pub fn find_first_violation<T, F>(trials: u64, f: F) -> Option<T>
where
    T: Send,
    F: Fn(u64) -> Option<T> + Sync + Send,
{
    (0..trials).find_map(f)
}
