//! Order-preserving map over independent work items.
//!
//! With the `parallel` feature the work is spread over the rayon pool;
//! otherwise, or with [`Exec::Sequential`], it runs on the calling thread.
//! Results always come back in input order so downstream reductions are
//! bit-identical between the two modes.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Exec {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
        }
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
        }
    }
}

/// Sizes the global worker pool. Has no effect without the `parallel`
/// feature. Fails if the pool was already initialized.
pub fn configure_threads(jobs: usize) -> Result<()> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| crate::error::Error::ResourceLimit(format!("thread pool: {e}")))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        Ok(())
    }
}
