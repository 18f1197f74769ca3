//! Execution policy for embarrassingly parallel batches.
//!
//! With the `parallel` feature (on by default) batches run on a rayon pool of
//! the requested size. Without it every policy runs sequentially. Results are
//! always returned in task-index order.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    #[default]
    Sequential,
    Parallel {
        workers: usize,
    },
}

impl Exec {
    pub fn with_workers(workers: usize) -> Self {
        if workers <= 1 {
            Exec::Sequential
        } else {
            Exec::Parallel { workers }
        }
    }

    /// Evaluate `task(0..n)` and collect the results in index order.
    pub fn map<T, F>(self, n: u64, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(task).collect(),
            Exec::Parallel { workers } => parallel_map(workers, n, task),
        }
    }

    /// Like [`Exec::map`], stopping at the first error in index order.
    pub fn try_map<T, F>(self, n: u64, task: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        self.map(n, task).into_iter().collect()
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(workers: usize, n: u64, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&task).collect()),
        Err(_) => (0..n).map(task).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(_workers: usize, n: u64, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n).map(task).collect()
}

pub fn check_workers(workers: usize) -> Result<Exec> {
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    Ok(Exec::with_workers(workers))
}
