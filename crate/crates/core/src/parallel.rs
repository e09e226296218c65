//! Order-preserving map over independent work items, such as the
//! utterances of a corpus. Results come back in input order whatever the
//! worker count.

/// Maps `f` over `items` one by one on the calling thread.
pub fn map_sequential<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Maps `f` over `items` on a dedicated pool of `workers` threads. Nested
/// data-parallel work inside `f` runs on the same pool.
#[cfg(feature = "parallel")]
pub fn map_parallel<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => map_sequential(items, f),
    }
}

/// Parallel when the `parallel` feature is on, sequential otherwise.
pub fn map_ordered<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        map_parallel(items, workers, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        map_sequential(items, f)
    }
}
