//! Thread-parallel drivers whose results do not depend on the worker count.

use fnsyn_core::consolidation::{LifetimeConfig, LifetimeCurves, LifetimePlan};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// Chunks evaluated concurrently before merging. Fixed so that memory use and
/// merge order are the same for any `--jobs`.
pub const WAVE: usize = 8;

pub fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))
}

/// Monte-Carlo lifetime run. Chunks are merged strictly in index order, so
/// the curves are bit-identical for every `jobs`.
pub fn run_lifetime(
    cfg: &LifetimeConfig,
    jobs: usize,
    progress: &(dyn Fn(f64) + Sync),
) -> CliResult<LifetimeCurves> {
    let plan = LifetimePlan::new(cfg)?;
    let n = plan.n_chunks();
    let pool = pool(jobs)?;
    let mut acc = plan.empty();
    let mut done = 0;
    while done < n {
        let end = (done + WAVE).min(n);
        let wave: Vec<_> = pool.install(|| (done..end).into_par_iter().map(|c| plan.run_chunk(c)).collect());
        for part in &wave {
            acc.merge(part);
        }
        done = end;
        progress(done as f64 / n as f64);
    }
    Ok(plan.finish(&acc))
}

/// Maps `f` over `items` on `jobs` workers, preserving input order.
pub fn map_ordered<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> CliResult<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> CliResult<R> + Sync,
{
    let pool = pool(jobs)?;
    pool.install(|| items.into_par_iter().map(&f).collect())
}
