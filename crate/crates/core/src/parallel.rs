//! Execution policy for the data-parallel loops.
//!
//! With the `parallel` feature the [`Execution::Parallel`] policy dispatches to
//! rayon; without it every policy runs sequentially. Work items never share
//! mutable state, so both paths produce identical results.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this policy actually runs on the rayon pool in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Applies `f(chunk_index, chunk)` to consecutive `chunk_len` slices of `data`
/// and returns the per-chunk results in chunk order.
pub(crate) fn map_chunks_mut<T, R, F>(
    exec: Execution,
    data: &mut [T],
    chunk_len: usize,
    f: F,
) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut [T]) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return data
            .par_chunks_mut(chunk_len)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect();
    }
    let _ = exec;
    data.chunks_mut(chunk_len)
        .enumerate()
        .map(|(i, c)| f(i, c))
        .collect()
}

/// Evaluates `f` on `0..n` and returns the results in index order.
pub(crate) fn map_indices<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_results_keep_order() {
        let mut data: Vec<u32> = (0..100).collect();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let sums = map_chunks_mut(exec, &mut data, 10, |i, c| {
                c.iter_mut().for_each(|x| *x += 1);
                (i, c.iter().sum::<u32>())
            });
            assert_eq!(sums.len(), 10);
            assert!(sums.iter().enumerate().all(|(i, (j, _))| i == *j));
        }
        assert_eq!(data[0], 2);
    }

    #[test]
    fn indices_in_order() {
        let a = map_indices(Execution::Sequential, 50, |i| i * i);
        let b = map_indices(Execution::Parallel, 50, |i| i * i);
        assert_eq!(a, b);
    }
}
