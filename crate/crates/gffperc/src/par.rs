//! Index-parallel map and fold with a sequential fallback.
//!
//! Folds split `0..n` into fixed chunks, fold each chunk in index order and
//! merge the chunk results left to right. The merge order is a function of
//! `n` and the chunk size only, so parallel and sequential runs agree bit for
//! bit.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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

pub const DEFAULT_CHUNK: usize = 64;

/// Execution path for a worker count: one worker runs sequentially.
pub fn execution_for(workers: usize) -> Execution {
    if workers == 1 {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

/// Sizes the global pool, `0` meaning one worker per core. Only the first
/// call takes effect; returns whether this one did.
pub fn set_workers(workers: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(workers).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        false
    }
}

pub fn map<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

pub fn fold<A, I, S, M>(exec: Execution, n: usize, chunk: usize, init: I, step: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    S: Fn(&mut A, usize) + Sync + Send,
    M: Fn(&mut A, A),
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let parts = map(exec, n_chunks, |c| {
        let mut acc = init();
        for i in c * chunk..((c + 1) * chunk).min(n) {
            step(&mut acc, i);
        }
        acc
    });
    let mut total = init();
    for p in parts {
        merge(&mut total, p);
    }
    total
}

/// Like [`map`] but short-circuits on the first error in index order.
pub fn try_map<T, E, F>(exec: Execution, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map(exec, n, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_is_identical_across_execution_modes() {
        let f = |acc: &mut f64, i: usize| *acc += (i as f64).sqrt().sin();
        let a = fold(Execution::Sequential, 1000, 7, || 0.0, f, |t, p| *t += p);
        let b = fold(Execution::Parallel, 1000, 7, || 0.0, f, |t, p| *t += p);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn try_map_reports_first_error() {
        let r: Result<Vec<usize>, usize> =
            try_map(Execution::default(), 10, |i| if i % 4 == 3 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(3));
    }
}
