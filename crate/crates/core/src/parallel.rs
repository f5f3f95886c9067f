use rayon::prelude::*;

/// Evaluates `f(0..n)` on a pool of `workers` threads and returns the results
/// in index order. Output never depends on the worker count as long as `f`
/// itself is a pure function of its index.
pub fn map_indexed<T, F>(workers: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let workers = workers.max(1);
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        // thread creation can fail in constrained sandboxes; fall back to serial
        Err(_) => (0..n).map(f).collect(),
    }
}
