//! Execution strategy for independent per-path computations.
//!
//! Every path is a pure function of its index, so a runner only decides
//! where the work happens. Results always come back in index order, which
//! keeps every downstream reduction independent of the worker count.

use alloc::vec::Vec;

pub trait PathRunner {
    /// Evaluates `f(0), …, f(count − 1)` and returns the results in order.
    fn map<T, F>(&self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// Runs every path on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct SequentialRunner;

impl PathRunner for SequentialRunner {
    fn map<T, F>(&self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}
