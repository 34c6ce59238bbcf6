//! Data-parallel helpers with a sequential fallback.
//!
//! All reductions split work into fixed-size chunks and combine the chunk
//! partials in index order, so results are bit-identical whatever the worker
//! count (including the sequential build without the `parallel` feature).

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows per reduction chunk. Fixed so that floating-point summation order never
/// depends on the number of threads.
pub const CHUNK_ROWS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parallelism {
    workers: usize,
}

impl Default for Parallelism {
    fn default() -> Self {
        Self::SEQUENTIAL
    }
}

impl Parallelism {
    pub const SEQUENTIAL: Parallelism = Parallelism { workers: 1 };

    pub fn new(workers: usize) -> Self {
        Self {
            workers: workers.max(1),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && self.workers > 1
    }

    /// Run `f` inside a thread pool sized to the worker count. Sequential
    /// settings run `f` on the calling thread.
    pub fn install<R, F>(self, f: F) -> R
    where
        R: Send,
        F: FnOnce() -> R + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            match rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build()
            {
                Ok(pool) => return pool.install(f),
                Err(err) => log::warn!("thread pool unavailable ({err}); running sequentially"),
            }
        }
        f()
    }
}

pub fn map<T, U, F>(par: Parallelism, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = par;
    items.iter().map(f).collect()
}

pub fn map_range<U, F>(par: Parallelism, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = par;
    (0..n).map(f).collect()
}

/// Sum `dim`-vectors produced per row range. `f` accumulates the rows of its
/// range into the provided zeroed buffer.
pub fn sum_chunked<F>(par: Parallelism, rows: usize, dim: usize, f: F) -> Vec<f64>
where
    F: Fn(Range<usize>, &mut [f64]) + Sync + Send,
{
    let chunks = rows.div_ceil(CHUNK_ROWS);
    let partials = map_range(par, chunks, |c| {
        let start = c * CHUNK_ROWS;
        let end = (start + CHUNK_ROWS).min(rows);
        let mut buf = vec![0.0; dim];
        f(start..end, &mut buf);
        buf
    });
    let mut total = vec![0.0; dim];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}

/// Scalar version of [`sum_chunked`].
pub fn sum_chunked_scalar<F>(par: Parallelism, rows: usize, f: F) -> f64
where
    F: Fn(Range<usize>) -> f64 + Sync + Send,
{
    let chunks = rows.div_ceil(CHUNK_ROWS);
    map_range(par, chunks, |c| {
        let start = c * CHUNK_ROWS;
        f(start..(start + CHUNK_ROWS).min(rows))
    })
    .into_iter()
    .fold(0.0, |acc, x| acc + x)
}
