//! Batched execution: B batches of R independent runs with derived seeds,
//! identical results whether the cells run serially or on a worker pool.

use rayon::prelude::*;

use crate::metrics::{batch_statistics, slot_means, BatchStats, Metric, MetricsReport};
use crate::model::ScenarioConfig;

use super::pipeline::{run_two_stage, HarnessError, RunRecord, SimOptions};

/// Aggregated outputs of a batch set, plus the per-run reports backing the
/// per-slot export. For multi-window runs the last window represents the
/// run.
#[derive(Debug, Clone)]
pub struct BatchSummary {
    pub stats: BatchStats,
    /// (batch, run, report of the run's last window).
    pub reports: Vec<(u32, u32, MetricsReport)>,
    pub kappa: u32,
}

impl BatchSummary {
    /// Mean of a per-slot metric across all runs, per slot.
    pub fn slot_means(&self, metric: Metric) -> Vec<Option<f64>> {
        let reports: Vec<MetricsReport> =
            self.reports.iter().map(|(_, _, r)| r.clone()).collect();
        slot_means(&reports, metric, self.kappa as usize)
    }
}

/// Run `batches x runs_per_batch` cells. Each cell's records stream through
/// `sink` (from worker threads when parallel); the summary aggregates in
/// deterministic (batch, run) order either way.
pub fn run_batches<F>(
    config: &ScenarioConfig,
    batches: u32,
    runs_per_batch: u32,
    opts: &SimOptions,
    parallel: bool,
    sink: &F,
) -> Result<BatchSummary, HarnessError>
where
    F: Fn(u32, u32, &[RunRecord]) -> Result<(), HarnessError> + Sync,
{
    config.validate().map_err(HarnessError::Config)?;
    let master = config.seed;
    let cells: Vec<(u32, u32)> = (0..batches)
        .flat_map(|b| (0..runs_per_batch).map(move |r| (b, r)))
        .collect();

    let process = |&(batch, run): &(u32, u32)| -> Result<(u32, u32, MetricsReport), HarnessError> {
        let records = run_two_stage(config, master, batch, run, opts)?;
        sink(batch, run, &records)?;
        let last = records.last().expect("at least one window").metrics.clone();
        Ok((batch, run, last))
    };

    let outcomes: Vec<Result<(u32, u32, MetricsReport), HarnessError>> = if parallel {
        cells.par_iter().map(process).collect()
    } else {
        cells.iter().map(process).collect()
    };
    let reports = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;

    let plain: Vec<MetricsReport> = reports.iter().map(|(_, _, r)| r.clone()).collect();
    let stats = batch_statistics(&plain, batches as usize, runs_per_batch as usize)?;
    Ok(BatchSummary { stats, reports, kappa: config.slots_per_auction })
}
