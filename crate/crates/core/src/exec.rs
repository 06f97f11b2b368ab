//! Execution mode for the data-parallel loops (Monte Carlo batches, pair
//! enumeration, per-index masked norms).
//!
//! With the `parallel` feature the default mode fans out over rayon; without
//! it everything runs on the calling thread. Results are collected in index
//! order in both modes, so any reduction performed afterwards sees the same
//! sequence of values.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Exec {
    /// `f(0), f(1), ..., f(len - 1)` in index order.
    pub fn map_range<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..len).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..len).into_par_iter().map(f).collect(),
        }
    }

    /// Minimum of `f` over `0..len`, `None` when every call returns `None`.
    /// `min` over non-NaN floats is exact, so both modes agree bitwise.
    pub fn min_f64<F>(self, len: usize, f: F) -> Option<f64>
    where
        F: Fn(usize) -> Option<f64> + Sync + Send,
    {
        let pick = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, None) => a,
            (None, b) => b,
        };
        match self {
            Exec::Sequential => (0..len).map(f).fold(None, pick),
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..len).into_par_iter().map(f).reduce(|| None, pick),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_keeps_order() {
        let v = Exec::default().map_range(100, |i| i * i);
        assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn min_matches_sequential() {
        let f = |i: usize| if i.is_multiple_of(3) { None } else { Some(((i * 7919) % 101) as f64) };
        assert_eq!(Exec::Sequential.min_f64(500, f), Exec::default().min_f64(500, f));
        assert_eq!(Exec::Sequential.min_f64(0, f), None);
    }
}
