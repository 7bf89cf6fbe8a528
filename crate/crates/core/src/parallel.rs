//! Worker pools. Results never depend on the worker count: callers split
//! work into fixed-size chunks addressed by index and reduce in index order.

/// Runs `f` on a dedicated pool of `workers` threads (0 means rayon's default).
pub fn with_workers<R, F>(workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        // thread spawn failure: fall back to the global pool
        Err(_) => f(),
    }
}
