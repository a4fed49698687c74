#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How grid sweeps are scheduled.
///
/// Results are always returned in input order, so both modes produce
/// bit-identical output. Without the `parallel` feature `Parallel` falls back
/// to sequential evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub(crate) fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }
}
