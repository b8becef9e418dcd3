//! Execution policy for the data-parallel loops (Monte Carlo trials,
//! strategy-box shards, misreport audits, random suites).
//!
//! With the `parallel` feature the [`Exec::Parallel`] policy runs on the
//! rayon global pool. Without it every policy degrades to the sequential
//! path, so results never depend on the feature set: all parallel maps
//! return their outputs in input order.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
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
    /// Whether this policy actually fans out in the current build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Order-preserving map over a slice.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Sum of `f(i)` over `0..n`, computed in fixed-size chunks whose
    /// partial sums are combined in index order. The result is therefore
    /// identical for both policies.
    pub fn sum_range<F>(self, n: usize, chunk: usize, f: F) -> u64
    where
        F: Fn(usize) -> u64 + Sync + Send,
    {
        let chunk = chunk.max(1);
        let chunks = n.div_ceil(chunk);
        let partial = self.map_range(chunks, |c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(n);
            (lo..hi).map(&f).sum::<u64>()
        });
        partial.into_iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let a = Exec::Sequential.map(&items, |x| x * x);
        let b = Exec::Parallel.map(&items, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(
            Exec::Sequential.sum_range(12345, 100, |i| i as u64 % 7),
            Exec::Parallel.sum_range(12345, 100, |i| i as u64 % 7)
        );
    }
}
