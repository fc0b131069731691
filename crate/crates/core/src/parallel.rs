//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) `ExecMode::Parallel` fans work out
//! over the rayon pool; without it both modes run on the calling thread.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// True when `Parallel` actually runs on more than one thread.
    pub fn is_parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode == ExecMode::Parallel && items.len() > 1 {
            return items.par_iter().map(f).collect();
        }
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Maps `f` over `start..start + len`, preserving order.
pub fn map_range<R, F>(mode: ExecMode, start: u64, len: u64, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode == ExecMode::Parallel && len > 1 {
            return (0..len).into_par_iter().map(|i| f(start + i)).collect();
        }
    }
    let _ = mode;
    (0..len).map(|i| f(start + i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map(ExecMode::Sequential, &items, |x| x * x);
        let par = map(ExecMode::Parallel, &items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(
            map_range(ExecMode::Parallel, 10, 5, |i| i),
            vec![10, 11, 12, 13, 14]
        );
        assert!(map_range(ExecMode::Sequential, 3, 0, |i| i).is_empty());
    }
}
