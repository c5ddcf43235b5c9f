use std::sync::Arc;

use gasket_core::ensemble::PathRunner;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Distributes paths over a rayon pool. Results keep index order, so the
/// output never depends on the number of workers.
#[derive(Clone)]
pub struct RayonRunner {
    pool: Arc<ThreadPool>,
}

impl RayonRunner {
    /// `None` uses one worker per available core.
    pub fn new(workers: Option<usize>) -> Self {
        let mut b = ThreadPoolBuilder::new();
        if let Some(w) = workers {
            b = b.num_threads(w.max(1));
        }
        RayonRunner { pool: Arc::new(b.build().expect("thread pool")) }
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl PathRunner for RayonRunner {
    fn map<T, F>(&self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| (0..count).into_par_iter().map(f).collect())
    }
}
