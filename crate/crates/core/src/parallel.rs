//! Replica fan-out. Replica `i` always receives `derive_seed(master, i)` and
//! results come back in index order, so output is independent of the number
//! of worker threads.

use rayon::prelude::*;

use crate::noise::derive_seed;

pub const THREADS_ENV: &str = "ZRP_THREADS";

/// Explicit request, else `ZRP_THREADS`, else available parallelism.
pub fn thread_count(requested: Option<usize>) -> usize {
    requested
        .filter(|&n| n > 0)
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse().ok()).filter(|&n: &usize| n > 0))
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Runs `f(i, seed_i)` for `i in 0..n` on the current rayon pool.
pub fn replicas<T, F>(master: u64, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(|i| f(i, derive_seed(master, i as u64))).collect()
}

/// Fallible variant; the first error by index wins.
pub fn try_replicas<T, E, F>(master: u64, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize, u64) -> Result<T, E> + Sync + Send,
{
    replicas(master, n, f).into_iter().collect()
}

/// Runs `op` inside a dedicated pool with `threads` workers.
pub fn with_threads<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
        Ok(pool) => pool.install(op),
        Err(_) => op(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_seeds_independent_of_threads() {
        let one = with_threads(1, || replicas(7, 100, |i, s| (i, s)));
        let four = with_threads(4, || replicas(7, 100, |i, s| (i, s)));
        assert_eq!(one, four);
        assert!(one.iter().enumerate().all(|(i, &(j, s))| i == j && s == derive_seed(7, i as u64)));
    }

    #[test]
    fn try_replicas_reports_first_error() {
        let r: Result<Vec<usize>, usize> = try_replicas(1, 10, |i, _| if i >= 3 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(3));
    }

    #[test]
    fn explicit_threads_win() {
        assert_eq!(thread_count(Some(3)), 3);
        assert!(thread_count(None) >= 1);
    }
}
