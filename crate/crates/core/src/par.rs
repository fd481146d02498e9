//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Parallelism::Parallel`] fans work out over the
//! rayon pool; without it every call runs sequentially on the caller's thread.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    Parallel,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Parallel
        } else {
            Parallelism::Sequential
        }
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, U, F>(items: &[T], par: Parallelism, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match par {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<U, F>(n: usize, par: Parallelism, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match par {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// XOR-reduces `f(i)` over `0..n`.
pub fn xor_reduce<F>(n: usize, par: Parallelism, f: F) -> u128
where
    F: Fn(usize) -> u128 + Sync + Send,
{
    match par {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => (0..n).into_par_iter().map(f).reduce(|| 0, |a, b| a ^ b),
        _ => (0..n).map(f).fold(0, |a, b| a ^ b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map(&items, Parallelism::Sequential, |x| x * 3);
        let par = map(&items, Parallelism::Parallel, |x| x * 3);
        assert_eq!(seq, par);
        let f = |i: usize| (i as u128).wrapping_mul(0x9e3779b97f4a7c15);
        assert_eq!(xor_reduce(777, Parallelism::Sequential, f), xor_reduce(777, Parallelism::Parallel, f));
        assert_eq!(map_range(5, Parallelism::Parallel, |i| i + 1), vec![1, 2, 3, 4, 5]);
    }
}
