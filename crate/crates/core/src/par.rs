//! Batch evaluation of independent queries and checks. Uses rayon when the
//! `parallel` feature is on; the sequential path is always available for
//! comparison and for timing runs.

use crate::engine::{solve, Outcome, Semantics, SolveOptions};
use crate::program::{FlatProgram, Query};

/// Applies `f` to every item, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_parallel(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(items, f)
    }
}

pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_parallel<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

pub fn solve_batch(queries: &[Query], p: &FlatProgram, sem: &Semantics, opts: &SolveOptions) -> Vec<Outcome> {
    map(queries, |q| solve(q, p, sem.clone(), opts.clone()))
}

pub fn solve_batch_sequential(queries: &[Query], p: &FlatProgram, sem: &Semantics, opts: &SolveOptions) -> Vec<Outcome> {
    map_sequential(queries, |q| solve(q, p, sem.clone(), opts.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved() {
        let xs: Vec<u64> = (0..1000).collect();
        let sq = |x: &u64| x * x;
        assert_eq!(map(&xs, sq), map_sequential(&xs, sq));
    }
}
