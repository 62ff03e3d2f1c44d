//! Ordered parallel map over independent samples.

use rayon::prelude::*;

use crate::error::{DbarError, Result};

/// Applies `f` to every item on a pool of `workers` threads and returns the
/// results in input order. `workers == 1` runs inline on the caller's thread.
pub fn parallel_map<I, O, F>(items: &[I], workers: usize, f: F) -> Result<Vec<O>>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    if workers == 0 {
        return Err(DbarError::InvalidArgument("worker count must be at least 1".into()));
    }
    if workers == 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| DbarError::InvalidArgument(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}
