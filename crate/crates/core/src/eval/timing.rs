use std::time::Instant;

use super::metrics::TimingStats;
use crate::error::{Error, Result};
use crate::model::Document;

/// Mean and standard deviation of per-document wall-clock time over `repeats` runs,
/// after one unmeasured warm-up run.
pub fn time_inference<F: FnMut(&Document)>(mut extract: F, docs: &[Document], repeats: usize) -> Result<TimingStats> {
    if repeats < 3 {
        return Err(Error::invalid(format!("need at least 3 repeats, got {repeats}")));
    }
    if docs.is_empty() {
        return Err(Error::invalid("cannot time an empty corpus"));
    }
    docs.iter().for_each(&mut extract);
    let runs: Vec<f64> = (0..repeats)
        .map(|_| {
            let t = Instant::now();
            docs.iter().for_each(&mut extract);
            t.elapsed().as_secs_f64() / docs.len() as f64
        })
        .collect();
    let mean = runs.iter().sum::<f64>() / runs.len() as f64;
    let var = runs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (runs.len() - 1) as f64;
    Ok(TimingStats {
        runs,
        mean,
        stddev: var.sqrt(),
    })
}
