//! Shared rayon pool for fold- and grid-level parallelism, sized by the
//! `RALLYCAST_THREADS` environment variable when set.

use std::sync::OnceLock;

pub const THREADS_ENV: &str = "RALLYCAST_THREADS";

/// The process-wide worker pool. The thread count comes from
/// `RALLYCAST_THREADS` when it parses as a positive integer and defaults
/// to the number of cores otherwise.
pub fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = configured_threads() {
            builder = builder.num_threads(n);
        }
        builder.build().expect("failed to build worker pool")
    })
}

/// Reads `RALLYCAST_THREADS`, returning `None` when unset or unusable.
pub fn configured_threads() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|raw| raw.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
}
