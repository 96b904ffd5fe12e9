//! Parallel driver for the acceptance criteria.

use geospread_core::acceptance::{criterion, Criterion, Outcome, CRITERIA};
use rayon::prelude::*;

use crate::error::CliError;

/// Evaluates the selected criteria (all when `only` is empty) on `workers`
/// threads; results come back in criterion order.
pub fn run_acceptance(workers: usize, only: &[String]) -> Result<Vec<Outcome>, CliError> {
    let selected: Vec<&Criterion> = if only.is_empty() {
        CRITERIA.iter().collect()
    } else {
        only.iter()
            .map(|id| criterion(id).ok_or_else(|| CliError::Validation(format!("unknown criterion `{id}`"))))
            .collect::<Result<_, _>>()?
    };
    if workers == 0 {
        return Err(CliError::Validation("--workers must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    Ok(pool.install(|| selected.par_iter().map(|c| c.evaluate()).collect()))
}
