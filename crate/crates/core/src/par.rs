//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the `par_*` functions run on the rayon pool;
//! without it they are plain loops. Every closure passed here is pure, so the
//! output is identical either way.

/// Below this many units of work the parallel path is not worth the overhead.
pub const MIN_PARALLEL_WORK: usize = 4096;

pub fn seq_map<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    seq_map(n, f)
}

/// Maps over `0..n`, going parallel only when `n * cost_per_item` is large.
pub fn map_auto<T, F>(n: usize, cost_per_item: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if n > 1 && n.saturating_mul(cost_per_item) >= MIN_PARALLEL_WORK {
        par_map(n, f)
    } else {
        seq_map(n, f)
    }
}

#[cfg(feature = "parallel")]
pub fn par_for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

#[cfg(not(feature = "parallel"))]
pub fn par_for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        assert_eq!(seq_map(10_000, f), par_map(10_000, f));
        assert_eq!(seq_map(3, f), map_auto(3, 1, f));
    }
}
