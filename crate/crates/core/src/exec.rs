//! Data-parallel execution of independent grid cells.
//!
//! Grid cells, per-candidate estimation, and sweep points are independent
//! given sub-seeded oracles, so they can run on any number of threads.
//! Results are collected in index order, which together with per-cell
//! random streams makes output bit-identical regardless of scheduling.

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential variant of [`map_indexed`], kept available in parallel builds
/// so benchmarks can compare the two paths directly.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: FnMut(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Consumes a vector of independent jobs and maps `f` over them, in parallel
/// when the `parallel` feature is on. Output order matches input order.
pub fn map_items<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_in_order() {
        let a = map_indexed(64, |i| i * i);
        let b = map_indexed_seq(64, |i| i * i);
        assert_eq!(a, b);
    }
}
