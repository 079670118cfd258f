//! Execution hooks injected by the caller: a per-cell map executor and a
//! wall clock. The core crate ships sequential / no-op implementations.

use alloc::vec::Vec;

/// Maps `f` over `0..n`. Implementations may run items concurrently but must
/// return results in index order, so downstream reductions are deterministic.
pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// Monotonic seconds since an arbitrary origin.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// Always reads zero; timing fields then report 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}
