//! Execution backends for embarrassingly parallel work.
//!
//! Every helper returns results in index order, so callers that reduce the
//! returned vector front to back get bit-identical output from either backend.
//! With the `parallel` feature disabled, [`Backend::Parallel`] quietly runs
//! sequentially.

/// How to run independent work items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Sequential,
    Parallel,
}

impl Default for Backend {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Backend::Parallel
        } else {
            Backend::Sequential
        }
    }
}

impl Backend {
    /// Whether work actually fans out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Backend::Parallel
    }
}

/// Evaluate `f(0..n)`, returning results in index order.
pub fn map_range<T, F>(backend: Backend, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if backend.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = backend;
    (0..n).map(f).collect()
}

/// Evaluate `f` on every item of a slice, returning results in slice order.
pub fn map_slice<I, T, F>(backend: Backend, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_range(backend, items.len(), |i| f(&items[i]))
}

/// Split `0..n` into consecutive chunks of `chunk` indices (the last may be
/// shorter) and evaluate `f` on each chunk range. Chunk boundaries depend only
/// on `n` and `chunk`, never on the thread count.
pub fn map_chunks<T, F>(backend: Backend, n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let count = n.div_ceil(chunk);
    map_range(backend, count, |c| f(c * chunk..((c + 1) * chunk).min(n)))
}
