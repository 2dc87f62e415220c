//! Execution policy: rayon data parallelism or a plain sequential loop.

/// How data-parallel loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel { threads: usize },
}

impl Default for Exec {
    fn default() -> Self {
        Exec::from_threads(default_threads())
    }
}

/// `CENSUS_THREADS` if set, otherwise the available parallelism.
pub fn default_threads() -> usize {
    std::env::var("CENSUS_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&t: &usize| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

impl Exec {
    pub fn from_threads(threads: usize) -> Self {
        if threads <= 1 {
            Exec::Sequential
        } else {
            Exec::Parallel { threads }
        }
    }

    pub fn threads(&self) -> usize {
        match self {
            Exec::Sequential => 1,
            Exec::Parallel { threads } => *threads,
        }
    }

    /// Maps `f` over `0..len`, returning results in index order.
    pub fn map_indexed<R, F>(&self, len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..len).map(f).collect(),
            Exec::Parallel { threads } => parallel_map(*threads, len, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<R, F>(threads: usize, len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| (0..len).into_par_iter().map(&f).collect()),
        Err(_) => (0..len).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<R, F>(_threads: usize, len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..len).map(f).collect()
}
