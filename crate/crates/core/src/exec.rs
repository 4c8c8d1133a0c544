// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! Execution mode for the data-parallel kernels.
//!
//! Kernels only ever split work over independent output rows or over fixed
//! sample chunks whose partial results are combined in chunk order, so both
//! modes produce bit-identical output.

/// How a kernel distributes its outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exec {
    Sequential,
    /// Rayon work-stealing. Falls back to sequential without the `parallel`
    /// feature.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Map `f` over `0..n`, collecting results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Map `f` over consecutive `chunk`-sized ranges of `0..n`, collecting
    /// results in range order.
    pub fn map_ranges<T, F>(self, n: usize, chunk: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
    {
        let chunk = chunk.max(1);
        self.map(
            n.div_ceil(chunk),
            |c| f(c * chunk..((c + 1) * chunk).min(n)),
        )
    }

    /// Apply `f` to consecutive `chunk`-sized mutable slices of `data`,
    /// passing the chunk index.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let chunk = chunk.max(1);
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                data.par_chunks_mut(chunk)
                    .enumerate()
                    .for_each(|(i, c)| f(i, c));
            }
            _ => data
                .chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let seq = Exec::Sequential.map(100, |i| i * i);
        let par = Exec::Parallel.map(100, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[9], 81);
    }

    #[test]
    fn chunked_mutation_matches() {
        let mut a = vec![0usize; 37];
        let mut b = vec![0usize; 37];
        Exec::Sequential.for_each_chunk_mut(&mut a, 5, |i, c| c.iter_mut().for_each(|x| *x = i));
        Exec::Parallel.for_each_chunk_mut(&mut b, 5, |i, c| c.iter_mut().for_each(|x| *x = i));
        assert_eq!(a, b);
        assert_eq!(a[36], 7);
    }
}
