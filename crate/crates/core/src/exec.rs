//! Data-parallel execution with a sequential fallback.
//!
//! Every parallel loop in the crate goes through [`Parallelism::map`], which
//! always returns results in index order. Reductions over those results are
//! then performed sequentially, so outputs do not depend on the number of
//! worker threads. Without the `parallel` feature both variants run
//! sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many elements a chunked loop is not worth splitting.
pub const MIN_BATCH_ELEMENTS: usize = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    #[default]
    Parallel,
    Sequential,
}

impl Parallelism {
    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Parallelism::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Runs `f(chunk_index, chunk)` over consecutive `chunk`-sized pieces of `data`.
    /// Pieces are handed to workers in batches of at least [`MIN_BATCH_ELEMENTS`].
    pub fn for_each_chunk<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        if chunk == 0 {
            return;
        }
        #[cfg(feature = "parallel")]
        if self == Parallelism::Parallel {
            data.par_chunks_mut(chunk)
                .with_min_len(MIN_BATCH_ELEMENTS.div_ceil(chunk))
                .enumerate()
                .for_each(|(k, c)| f(k, c));
            return;
        }
        data.chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k, c));
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}
