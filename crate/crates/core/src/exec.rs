/// How data-parallel loops are run.
///
/// `Parallel` uses rayon when the `parallel` feature is enabled and silently
/// runs sequentially otherwise. Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Applies `f` to every `(index, item)`; parallel when requested and available.
pub(crate) fn for_each_indexed<T: Send>(
    exec: Execution,
    items: Vec<T>,
    f: impl Fn(usize, T) + Sync + Send,
) {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        items.into_par_iter().enumerate().for_each(|(i, t)| f(i, t));
        return;
    }
    let _ = exec;
    items.into_iter().enumerate().for_each(|(i, t)| f(i, t));
}
