//! Data-parallel helpers with a sequential fallback.
//!
//! Without the `parallel` feature every mode runs sequentially. Results are
//! always returned in input order, so both modes give identical output.

use serde::{Deserialize, Serialize};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "LIPSET_THREADS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Sequential` when `LIPSET_THREADS=1`, otherwise `Parallel`.
    pub fn from_env() -> Self {
        match threads_from_env() {
            Some(1) => Execution::Sequential,
            _ => Execution::Parallel,
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Minimum of `f(i)` over `0..n` (`+inf` when empty).
    pub fn min_range<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).reduce(|| f64::INFINITY, f64::min);
        }
        (0..n).map(f).fold(f64::INFINITY, f64::min)
    }

    /// First index (lowest) for which `f` returns `Some`.
    pub fn find_first<R, F>(self, n: usize, f: F) -> Option<R>
    where
        R: Send,
        F: Fn(usize) -> Option<R> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().filter_map(f).find_first(|_| true);
        }
        (0..n).find_map(f)
    }
}

/// Parsed `LIPSET_THREADS`, ignoring unset, empty, zero or malformed values.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)
}

/// Sizes the global worker pool from `LIPSET_THREADS`. Returns the cap that
/// was applied, if any. Safe to call more than once.
pub fn init_thread_pool() -> Option<usize> {
    let n = threads_from_env()?;
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Some(n)
}
