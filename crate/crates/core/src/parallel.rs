//! Data-parallel mapping with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] runs on the
//! rayon global pool; without it every mode runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work actually fans out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..len).map(f).collect()`, preserving order.
pub fn map_indexed<T, F>(len: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Sum of `f(i)` over `0..len`. Partial sums are combined in index order
/// within fixed-size chunks so both modes give the same result bit for bit.
pub fn sum_indexed<F>(len: usize, exec: Execution, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    const CHUNK: usize = 1024;
    let chunks = len.div_ceil(CHUNK);
    map_indexed(chunks, exec, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(len);
        (lo..hi).map(&f).sum::<f64>()
    })
    .into_iter()
    .sum()
}

/// Like [`sum_indexed`] for two accumulators at once.
pub fn sum2_indexed<F>(len: usize, exec: Execution, f: F) -> (f64, f64)
where
    F: Fn(usize) -> (f64, f64) + Sync + Send,
{
    const CHUNK: usize = 1024;
    let chunks = len.div_ceil(CHUNK);
    map_indexed(chunks, exec, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(len);
        (lo..hi).map(&f).fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1))
    })
    .into_iter()
    .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1))
}
