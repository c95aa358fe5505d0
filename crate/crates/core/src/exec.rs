//! Sequential / parallel dispatch for per-record work.
//!
//! Without the `parallel` feature, [`Execution::Parallel`] runs sequentially.
//! Every helper here preserves input order, so callers see the same output in
//! either mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Order-preserving map.
pub fn map<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Fold every item into an accumulator and merge the partial accumulators.
///
/// `merge` must be associative and commutative for the result to be
/// independent of how rayon splits the input.
pub fn fold_merge<'a, T, A, I, F, M>(exec: Execution, items: &'a [T], init: I, fold: F, merge: M) -> A
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, &'a T) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().fold(&init, &fold).reduce(&init, &merge);
    }
    let _ = (exec, &merge);
    items.iter().fold(init(), fold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_in_both_modes() {
        let xs: Vec<u32> = (0..10_000).collect();
        let seq = map(Execution::Sequential, &xs, |x| x * 3);
        let par = map(Execution::Parallel, &xs, |x| x * 3);
        assert_eq!(seq, par);
        assert_eq!(seq[9_999], 29_997);
    }

    #[test]
    fn fold_merge_matches_sequential_sum() {
        let xs: Vec<u64> = (1..=5_000).collect();
        let seq = fold_merge(Execution::Sequential, &xs, || 0u64, |a, x| a + x, |a, b| a + b);
        let par = fold_merge(Execution::Parallel, &xs, || 0u64, |a, x| a + x, |a, b| a + b);
        assert_eq!(seq, 12_502_500);
        assert_eq!(seq, par);
    }
}
