//! Thin facade over the data-parallel inner loops.
//!
//! With the `parallel` feature (the default) the indexed maps run on rayon;
//! without it they run sequentially. Callers hand out work keyed by index
//! only, so results are assembled in index order and are bit-identical
//! across thread counts and between the two execution modes. The `_serial`
//! variants are always available so benchmarks can compare both paths in a
//! single build.

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    map_indexed_serial(n, f)
}

/// Sequential reference implementation of [`map_indexed`].
pub fn map_indexed_serial<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    (0..n).map(f).collect()
}

/// Cap the global worker pool at `n` threads. No-op without the `parallel`
/// feature, or if a pool was already installed.
pub fn configure_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_serial_agree() {
        let f = |i: usize| (i as f64).sqrt() * 3.0;
        assert_eq!(map_indexed(100, f), map_indexed_serial(100, f));
    }

    #[test]
    fn preserves_index_order() {
        let out = map_indexed(1000, |i| i);
        assert!(out.iter().enumerate().all(|(i, &v)| i == v));
    }
}
