//! Chunked parallel execution of an experiment.
//!
//! Each chunk is a contiguous index range and every trial draws from its own
//! substream, so the merged dataset does not depend on how many threads ran.

use belltrace_core::harness::{run_range, Allocation, Dataset, HarnessError, TrialContext};
use rayon::prelude::*;

/// Trials per work unit.
pub const CHUNK: u64 = 1 << 14;

/// Runs every trial of `allocation`, on `pool` if one is given. The first
/// failing chunk in index order decides the error.
pub fn run_parallel(
    ctx: &TrialContext,
    allocation: &Allocation,
    keep_records: bool,
    pool: Option<&rayon::ThreadPool>,
) -> Result<Dataset, HarnessError> {
    let pairs = ctx.behavior().settings_a().len() * ctx.behavior().settings_b().len();
    let total = allocation.total(pairs);
    if total == 0 {
        return Err(HarnessError::InvalidPlan("at least one trial per setting pair is required".into()));
    }
    let chunks = total.div_ceil(CHUNK);
    let work = || -> Vec<Result<Dataset, HarnessError>> {
        (0..chunks)
            .into_par_iter()
            .map(|c| run_range(ctx, allocation, c * CHUNK..((c + 1) * CHUNK).min(total), keep_records))
            .collect()
    };
    let parts = match pool {
        Some(p) => p.install(work),
        None => work(),
    };
    let mut out = Dataset::for_behavior(ctx.behavior());
    for part in parts {
        out.merge(part?)?;
    }
    Ok(out)
}
