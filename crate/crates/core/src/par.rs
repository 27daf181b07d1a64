//! Data-parallel map used by the heavy loops (grid points, templates,
//! value pairs, sample sizes).
//!
//! With the `parallel` feature the work is spread over the rayon pool;
//! without it, or after [`force_sequential`], items are processed in order
//! on the calling thread. Results always come back in input order, so both
//! paths produce bit-identical output as long as reductions happen on the
//! collected vector.

use std::sync::atomic::{AtomicBool, Ordering};

static SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Route every subsequent [`map`] through the sequential path.
pub fn force_sequential(on: bool) {
    SEQUENTIAL.store(on, Ordering::Relaxed);
}

/// Whether [`map`] currently uses the thread pool.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !SEQUENTIAL.load(Ordering::Relaxed)
}

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if items.len() > 1 && is_parallel() {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Fallible map; the first error in input order wins.
pub fn try_map<T, R, F>(items: &[T], f: F) -> crate::Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> crate::Result<R> + Sync + Send,
{
    map(items, f).into_iter().collect()
}
