//! Data-parallel helpers.
//!
//! Every parallel loop in the crate goes through [`map_collect`] so that the
//! sequential and the rayon-backed paths share one call site. With the
//! `parallel` feature disabled, [`Parallelism::Parallel`] silently runs
//! sequentially.

/// How a data-parallel stage should be executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    /// Use a pool with the given number of threads, `0` meaning the rayon
    /// default (one per core).
    Parallel(usize),
    #[default]
    Auto,
}

impl Parallelism {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Parallelism::Sequential)
    }
}

/// Maps `f` over `items`, preserving input order in the output.
pub fn map_collect<T, R, F>(mode: Parallelism, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match mode {
            Parallelism::Sequential => {}
            Parallelism::Auto | Parallelism::Parallel(0) => {
                return items.par_iter().map(&f).collect();
            }
            Parallelism::Parallel(n) => {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build();
                if let Ok(pool) = pool {
                    return pool.install(|| items.par_iter().map(&f).collect());
                }
            }
        }
    }
    let _ = mode;
    items.iter().map(f).collect()
}
