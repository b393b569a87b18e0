//! Order-preserving map over index ranges, parallel when the
//! `parallel` feature is enabled. Callers reduce the collected vector
//! sequentially so floating-point sums do not depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Whether work is actually distributed across threads in this build.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
