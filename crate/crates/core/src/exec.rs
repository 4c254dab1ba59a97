//! Sequential or data-parallel execution of independent work items.
//!
//! With the `parallel` feature (on by default) [`Exec::Parallel`] runs on a
//! rayon pool. Without it every executor runs sequentially. Results are
//! always returned in input order, and each item is computed by the same
//! code either way, so outputs do not depend on the executor.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Sequential,
    /// Worker pool with the given number of threads (`None`: rayon default).
    Parallel { jobs: Option<usize> },
}

impl Exec {
    /// `jobs <= 1` is sequential.
    pub fn with_jobs(jobs: usize) -> Self {
        if jobs <= 1 {
            Exec::Sequential
        } else {
            Exec::Parallel { jobs: Some(jobs) }
        }
    }

    pub fn parallel() -> Self {
        Exec::Parallel { jobs: None }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && matches!(self, Exec::Parallel { .. })
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.map_indexed(items, |_, t| f(t))
    }

    pub fn map_indexed<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel { jobs } => par::map_indexed(*jobs, items, f),
            _ => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        }
    }
}

#[cfg(feature = "parallel")]
mod par {
    use rayon::prelude::*;

    pub(super) fn map_indexed<T, R, F>(jobs: Option<usize>, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        let run = || items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
        match jobs {
            None => run(),
            Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(run),
                Err(_) => run(),
            },
        }
    }
}
