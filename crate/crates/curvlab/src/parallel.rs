//! Thin shim over rayon so batch loops can fall back to sequential iteration.
//!
//! With the `parallel` feature (default) the indexed map runs on the rayon
//! pool unless `threads == Some(1)`; without the feature it always runs
//! sequentially. Both paths produce identical output vectors, so results do
//! not depend on the execution mode.

/// Execution mode for batch loops.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExecMode {
    /// `Some(1)` forces the sequential path; anything else uses the
    /// configured rayon pool when the `parallel` feature is on.
    pub threads: Option<usize>,
}

impl ExecMode {
    pub fn sequential() -> Self {
        ExecMode { threads: Some(1) }
    }

    pub fn parallel() -> Self {
        ExecMode { threads: None }
    }

    #[cfg(feature = "parallel")]
    fn use_rayon(&self) -> bool {
        self.threads != Some(1)
    }
}

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn indexed_map<T: Send>(mode: ExecMode, n: usize, f: impl Fn(usize) -> T + Send + Sync) -> Vec<T> {
    use rayon::prelude::*;
    if mode.use_rayon() {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn indexed_map<T: Send>(_mode: ExecMode, n: usize, f: impl Fn(usize) -> T + Send + Sync) -> Vec<T> {
    (0..n).map(f).collect()
}
