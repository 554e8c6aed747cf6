//! Effectiveness indices of one auction and batch statistics across runs.
//!
//! Every index is backed by integer tallies so a report recomputed from an
//! exported record reproduces the floating point values bit for bit. A
//! missing denominator yields an absent value, rendered as null in JSON and
//! as an empty CSV field.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::auction::{capacity_ledger, AuctionOutcome, ProvisionalWin};
use crate::model::{Micro, RequestedRun, ServiceId, SlotIndex};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("need at least 2 batches, got {0}")]
    InsufficientBatches(usize),
    #[error("{got} reports cannot fill {batches} batches of {runs}")]
    ShapeMismatch { got: usize, batches: usize, runs: usize },
}

/// Integer counters for one slot; the indices are ratios of these.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotTallies {
    /// Requested (client, service) parts covering the slot, and how many of
    /// them ended up fully or partially satisfied.
    pub requests: u64,
    pub requests_satisfied: u64,
    /// Distinct service types requested / requested-but-not-offered.
    pub services_requested: u64,
    pub services_unoffered: u64,
    /// Distinct service types offered / with at least one finalized sale.
    pub services_offered: u64,
    pub services_used: u64,
    /// vCPUs offered and sold in the slot.
    pub vcpus_offered: u64,
    pub vcpus_sold: u64,
    /// (coalition, service) cells offering / left with spot capacity.
    pub suppliers: u64,
    pub suppliers_with_leftover: u64,
    /// Finalized wins covering the slot / those of fragmented services.
    pub wins: u64,
    pub wins_fragmented: u64,
}

/// Per-auction integer counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionTallies {
    /// Run-slot instances offered when the proxy phase opened.
    pub offered_run_slots: u64,
    /// Covered slot instances of provisional wins left out of every package.
    pub overbid_win_slots: u64,
    /// Revenue of finalized wins and the same capacity valued at the asks.
    pub revenue_sold: Micro,
    pub ask_value_sold: Micro,
}

/// Index values of one slot; absent when the denominator is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotIndices {
    pub customer_satisfaction: Option<f64>,
    pub service_mismatch: Option<f64>,
    pub service_success: Option<f64>,
    pub capacity_allocation: Option<f64>,
    pub temporal_fragmentation: Option<f64>,
    pub spot_opportunity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_slot: Vec<SlotIndices>,
    pub overbidding_factor: Option<f64>,
    pub additional_profit: Option<f64>,
    pub slot_tallies: Vec<SlotTallies>,
    pub auction_tallies: AuctionTallies,
}

/// The eight reported metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    CustomerSatisfaction,
    ServiceMismatch,
    ServiceSuccess,
    CapacityAllocation,
    TemporalFragmentation,
    SpotOpportunity,
    OverbiddingFactor,
    AdditionalProfit,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::CustomerSatisfaction,
        Metric::ServiceMismatch,
        Metric::ServiceSuccess,
        Metric::CapacityAllocation,
        Metric::TemporalFragmentation,
        Metric::SpotOpportunity,
        Metric::OverbiddingFactor,
        Metric::AdditionalProfit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::CustomerSatisfaction => "customer_satisfaction",
            Metric::ServiceMismatch => "service_mismatch",
            Metric::ServiceSuccess => "service_success",
            Metric::CapacityAllocation => "capacity_allocation",
            Metric::TemporalFragmentation => "temporal_fragmentation",
            Metric::SpotOpportunity => "spot_opportunity",
            Metric::OverbiddingFactor => "overbidding_factor",
            Metric::AdditionalProfit => "additional_profit",
        }
    }

    pub fn is_per_slot(&self) -> bool {
        !matches!(self, Metric::OverbiddingFactor | Metric::AdditionalProfit)
    }

    pub fn slot_value(&self, report: &MetricsReport, slot: usize) -> Option<f64> {
        let s = report.per_slot.get(slot)?;
        match self {
            Metric::CustomerSatisfaction => s.customer_satisfaction,
            Metric::ServiceMismatch => s.service_mismatch,
            Metric::ServiceSuccess => s.service_success,
            Metric::CapacityAllocation => s.capacity_allocation,
            Metric::TemporalFragmentation => s.temporal_fragmentation,
            Metric::SpotOpportunity => s.spot_opportunity,
            _ => None,
        }
    }

    /// One scalar per run: the per-auction value, or the mean over the
    /// slots where the index is present.
    pub fn run_value(&self, report: &MetricsReport) -> Option<f64> {
        match self {
            Metric::OverbiddingFactor => report.overbidding_factor,
            Metric::AdditionalProfit => report.additional_profit,
            _ => {
                let present: Vec<f64> = (0..report.per_slot.len())
                    .filter_map(|slot| self.slot_value(report, slot))
                    .collect();
                if present.is_empty() {
                    None
                } else {
                    Some(present.iter().sum::<f64>() / present.len() as f64)
                }
            }
        }
    }
}

fn ratio(numerator: u64, denominator: u64) -> Option<f64> {
    if denominator == 0 {
        None
    } else {
        Some(numerator as f64 / denominator as f64)
    }
}

/// Compute every index of one auction outcome against the requests that
/// drove it. Total: zero denominators become absent values.
pub fn compute_indices(outcome: &AuctionOutcome, requests: &[RequestedRun]) -> MetricsReport {
    let kappa = outcome.kappa as usize;
    let finalized: Vec<&ProvisionalWin> =
        outcome.packages.iter().flat_map(|p| p.wins.iter()).collect();

    // Which requested parts are satisfied (>= 1 requested slot in the
    // client's winning package for that service).
    let satisfied: Vec<bool> = requests
        .iter()
        .map(|request| {
            finalized.iter().any(|win| {
                win.client_id == request.client_id
                    && win.run.service_id == request.service_id
                    && win.covered_slots().any(|slot| request.covers(slot))
            })
        })
        .collect();

    // Sold-slot set per service across the auction, for fragmentation.
    let mut sold_slots: BTreeMap<ServiceId, BTreeSet<u32>> = BTreeMap::new();
    for win in &finalized {
        let entry = sold_slots.entry(win.run.service_id).or_default();
        entry.extend(win.covered_slots().map(|s| s.0));
    }
    let fragmented: BTreeSet<ServiceId> = sold_slots
        .iter()
        .filter(|(_, slots)| {
            let span = slots.last().unwrap() - slots.first().unwrap() + 1;
            span as usize > slots.len()
        })
        .map(|(&service, _)| service)
        .collect();

    let ledger = capacity_ledger(outcome);

    let mut slot_tallies = vec![SlotTallies::default(); kappa];
    for (slot_index, tally) in slot_tallies.iter_mut().enumerate() {
        let slot = SlotIndex(slot_index as u32);

        for (request, ok) in requests.iter().zip(&satisfied) {
            if request.covers(slot) {
                tally.requests += 1;
                tally.requests_satisfied += u64::from(*ok);
            }
        }

        let requested_services: BTreeSet<ServiceId> = requests
            .iter()
            .filter(|r| r.covers(slot))
            .map(|r| r.service_id)
            .collect();
        let offered_services: BTreeSet<ServiceId> = outcome
            .offers
            .iter()
            .filter(|o| o.covers(slot))
            .map(|o| o.service_id)
            .collect();
        let used_services: BTreeSet<ServiceId> = finalized
            .iter()
            .filter(|w| w.covers(slot))
            .map(|w| w.run.service_id)
            .collect();
        tally.services_requested = requested_services.len() as u64;
        tally.services_unoffered =
            requested_services.difference(&offered_services).count() as u64;
        tally.services_offered = offered_services.len() as u64;
        tally.services_used = used_services.len() as u64;

        for (&(_, _, s), cell) in &ledger {
            if s == slot {
                tally.vcpus_offered += cell.offered;
                tally.vcpus_sold += cell.sold;
                tally.suppliers += 1;
                tally.suppliers_with_leftover += u64::from(cell.spot() > 0);
            }
        }

        for win in &finalized {
            if win.covers(slot) {
                tally.wins += 1;
                tally.wins_fragmented += u64::from(fragmented.contains(&win.run.service_id));
            }
        }
    }

    let auction_tallies = AuctionTallies {
        offered_run_slots: outcome.offers.iter().map(|o| o.length as u64).sum(),
        overbid_win_slots: outcome.overbids.iter().map(|w| w.covered_len as u64).sum(),
        revenue_sold: finalized.iter().map(|w| w.revenue()).sum(),
        ask_value_sold: finalized.iter().map(|w| w.run.ask.times(w.vcpu_slots())).sum(),
    };

    let per_slot = slot_tallies
        .iter()
        .map(|t| SlotIndices {
            customer_satisfaction: ratio(t.requests_satisfied, t.requests),
            service_mismatch: ratio(t.services_unoffered, t.services_requested),
            service_success: ratio(t.services_used, t.services_offered),
            capacity_allocation: ratio(t.vcpus_offered - t.vcpus_sold, t.vcpus_offered),
            temporal_fragmentation: ratio(t.wins_fragmented, t.wins),
            spot_opportunity: ratio(t.suppliers_with_leftover, t.suppliers),
        })
        .collect();

    let additional_profit = if auction_tallies.ask_value_sold > Micro::ZERO {
        let gain = auction_tallies.revenue_sold - auction_tallies.ask_value_sold;
        Some(gain.0 as f64 / auction_tallies.ask_value_sold.0 as f64)
    } else {
        None
    };

    MetricsReport {
        per_slot,
        overbidding_factor: ratio(
            auction_tallies.overbid_win_slots,
            auction_tallies.offered_run_slots,
        ),
        additional_profit,
        slot_tallies,
        auction_tallies,
    }
}

/// Mean and confidence half-width of one metric over batch means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub metric: Metric,
    pub mean: Option<f64>,
    pub half_width: Option<f64>,
    /// Batches that had at least one run with a present value.
    pub batches_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub batches: usize,
    pub runs_per_batch: usize,
    pub metrics: Vec<MetricStat>,
}

/// Student-t confidence interval over batch means: (mean, half-width).
pub fn t_confidence(batch_means: &[f64], confidence: f64) -> Result<(f64, f64), MetricsError> {
    if batch_means.len() < 2 {
        return Err(MetricsError::InsufficientBatches(batch_means.len()));
    }
    let n = batch_means.len() as f64;
    let mean = batch_means.iter().sum::<f64>() / n;
    let variance =
        batch_means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1.0);
    let student = StudentsT::new(0.0, 1.0, n - 1.0).expect("valid dof");
    let quantile = student.inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    Ok((mean, quantile * (variance / n).sqrt()))
}

/// Group per-run reports into `batches` of `runs_per_batch` (in order) and
/// compute the 95% interval of every metric over the batch means.
pub fn batch_statistics(
    reports: &[MetricsReport],
    batches: usize,
    runs_per_batch: usize,
) -> Result<BatchStats, MetricsError> {
    if batches < 2 {
        return Err(MetricsError::InsufficientBatches(batches));
    }
    if reports.len() != batches * runs_per_batch {
        return Err(MetricsError::ShapeMismatch {
            got: reports.len(),
            batches,
            runs: runs_per_batch,
        });
    }
    let mut metrics = Vec::with_capacity(Metric::ALL.len());
    for metric in Metric::ALL {
        let mut batch_means = Vec::with_capacity(batches);
        for batch in reports.chunks(runs_per_batch) {
            let values: Vec<f64> = batch.iter().filter_map(|r| metric.run_value(r)).collect();
            if !values.is_empty() {
                batch_means.push(values.iter().sum::<f64>() / values.len() as f64);
            }
        }
        let stat = match t_confidence(&batch_means, 0.95) {
            Ok((mean, half_width)) => MetricStat {
                metric,
                mean: Some(mean),
                half_width: Some(half_width),
                batches_used: batch_means.len(),
            },
            Err(_) => MetricStat {
                metric,
                mean: None,
                half_width: None,
                batches_used: batch_means.len(),
            },
        };
        metrics.push(stat);
    }
    Ok(BatchStats { batches, runs_per_batch, metrics })
}

/// Mean of one per-slot metric across runs, per slot.
pub fn slot_means(reports: &[MetricsReport], metric: Metric, kappa: usize) -> Vec<Option<f64>> {
    (0..kappa)
        .map(|slot| {
            let values: Vec<f64> =
                reports.iter().filter_map(|r| metric.slot_value(r, slot)).collect();
            if values.is_empty() {
                None
            } else {
                Some(values.iter().sum::<f64>() / values.len() as f64)
            }
        })
        .collect()
}

fn push_cell(line: &mut String, value: Option<f64>) {
    match value {
        Some(v) => {
            let _ = write!(line, ",{v}");
        }
        None => line.push(','),
    }
}

/// One row per (run, slot); absent values are empty fields.
pub fn render_per_slot_csv(rows: &[(u32, u32, &MetricsReport)]) -> String {
    let mut out = String::from(
        "batch,run,slot,customer_satisfaction,service_mismatch,service_success,capacity_allocation,temporal_fragmentation,spot_opportunity\n",
    );
    for &(batch, run, report) in rows {
        for (slot, indices) in report.per_slot.iter().enumerate() {
            let mut line = format!("{batch},{run},{slot}");
            push_cell(&mut line, indices.customer_satisfaction);
            push_cell(&mut line, indices.service_mismatch);
            push_cell(&mut line, indices.service_success);
            push_cell(&mut line, indices.capacity_allocation);
            push_cell(&mut line, indices.temporal_fragmentation);
            push_cell(&mut line, indices.spot_opportunity);
            line.push('\n');
            out.push_str(&line);
        }
    }
    out
}

/// One row per metric: mean and 95% half-width over batch means.
pub fn render_summary_csv(stats: &BatchStats) -> String {
    let mut out = String::from("metric,mean,ci95_half_width,batches,runs_per_batch\n");
    for stat in &stats.metrics {
        let mut line = String::from(stat.metric.name());
        push_cell(&mut line, stat.mean);
        push_cell(&mut line, stat.half_width);
        let _ = write!(line, ",{},{}", stats.batches, stats.runs_per_batch);
        line.push('\n');
        out.push_str(&line);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::{AuctionOutcome, ProvisionalWin, RunOffer, WinningPackage};
    use crate::model::{ClientId, CoalitionId, Micro};

    fn offer(coalition: u32, service: u32, start: u32, length: u32, vcpus: u32, ask: i64) -> RunOffer {
        RunOffer {
            coalition_id: CoalitionId(coalition),
            service_id: ServiceId(service),
            start: SlotIndex(start),
            length,
            vcpus,
            ask: Micro::units(ask),
        }
    }

    fn win(id: u32, client: u32, run: RunOffer, covered_len: u32, vcpus: u32, price: i64) -> ProvisionalWin {
        ProvisionalWin {
            id,
            client_id: ClientId(client),
            run,
            price_per_slot: Micro::units(price),
            vcpus,
            covered_len,
            round: 1,
        }
    }

    fn request(client: u32, service: u32, start: u32, length: u32, vcpus: u32) -> RequestedRun {
        RequestedRun {
            client_id: ClientId(client),
            service_id: ServiceId(service),
            start: SlotIndex(start),
            length,
            vcpus,
        }
    }

    fn outcome_with(
        kappa: u32,
        offers: Vec<RunOffer>,
        packages: Vec<WinningPackage>,
        overbids: Vec<ProvisionalWin>,
    ) -> AuctionOutcome {
        AuctionOutcome {
            kappa,
            offers,
            commitments: vec![],
            packages,
            overbids,
            unsatisfied: vec![],
            residual_runs: vec![],
        }
    }

    #[test]
    fn full_satisfaction_in_requested_slots() {
        let o = offer(0, 0, 0, 2, 60, 2);
        let w = win(0, 0, o.clone(), 2, 50, 3);
        let outcome = outcome_with(
            3,
            vec![o],
            vec![WinningPackage {
                client_id: ClientId(0),
                wins: vec![w.clone()],
                cost: w.revenue(),
            }],
            vec![],
        );
        let requests = vec![request(0, 0, 0, 2, 50)];
        let report = compute_indices(&outcome, &requests);
        assert_eq!(report.per_slot[0].customer_satisfaction, Some(1.0));
        assert_eq!(report.per_slot[1].customer_satisfaction, Some(1.0));
        // No request covers slot 2: absent.
        assert_eq!(report.per_slot[2].customer_satisfaction, None);
        assert_eq!(report.per_slot[2].service_mismatch, None);
    }

    #[test]
    fn mismatch_counts_unoffered_requested_services() {
        let o = offer(0, 0, 0, 1, 60, 2);
        let outcome = outcome_with(1, vec![o], vec![], vec![]);
        let requests = vec![request(0, 0, 0, 1, 50), request(0, 7, 0, 1, 50)];
        let report = compute_indices(&outcome, &requests);
        // Service 7 requested but never offered: 1 of 2.
        assert_eq!(report.per_slot[0].service_mismatch, Some(0.5));
        assert_eq!(report.per_slot[0].service_success, Some(0.0));
    }

    #[test]
    fn overbidding_factor_ratio() {
        // 10 offered run slots, one overbid win covering 1 slot.
        let offers = vec![offer(0, 0, 0, 6, 60, 2), offer(1, 1, 0, 4, 60, 2)];
        let overbid = win(0, 0, offer(0, 0, 0, 1, 60, 2), 1, 50, 3);
        let outcome = outcome_with(6, offers, vec![], vec![overbid]);
        let report = compute_indices(&outcome, &[]);
        assert_eq!(report.overbidding_factor, Some(0.1));
    }

    #[test]
    fn fragmentation_flags_non_consecutive_sales() {
        // Service 0 sells in slots 2 and 4 only.
        let o1 = offer(0, 0, 2, 1, 60, 2);
        let o2 = offer(1, 0, 4, 1, 60, 2);
        let w1 = win(0, 0, o1.clone(), 1, 50, 3);
        let w2 = win(1, 0, o2.clone(), 1, 50, 3);
        let cost = w1.revenue() + w2.revenue();
        let outcome = outcome_with(
            5,
            vec![o1, o2],
            vec![WinningPackage { client_id: ClientId(0), wins: vec![w1, w2], cost }],
            vec![],
        );
        let report = compute_indices(&outcome, &[]);
        assert_eq!(report.per_slot[2].temporal_fragmentation, Some(1.0));
        assert_eq!(report.per_slot[4].temporal_fragmentation, Some(1.0));
        assert_eq!(report.per_slot[3].temporal_fragmentation, None);
    }

    #[test]
    fn capacity_tallies_conserve() {
        let o = offer(0, 0, 0, 2, 80, 2);
        let w = win(0, 0, o.clone(), 2, 50, 3);
        let outcome = outcome_with(
            2,
            vec![o],
            vec![WinningPackage {
                client_id: ClientId(0),
                wins: vec![w.clone()],
                cost: w.revenue(),
            }],
            vec![],
        );
        let report = compute_indices(&outcome, &[]);
        for t in &report.slot_tallies {
            assert_eq!(t.vcpus_sold + (t.vcpus_offered - t.vcpus_sold), t.vcpus_offered);
            assert_eq!(t.vcpus_offered, 80);
            assert_eq!(t.vcpus_sold, 50);
        }
        assert_eq!(report.per_slot[0].capacity_allocation, Some(30.0 / 80.0));
    }

    #[test]
    fn additional_profit_relative_to_ask() {
        let o = offer(0, 0, 0, 1, 80, 2);
        let w = win(0, 0, o.clone(), 1, 50, 3);
        let outcome = outcome_with(
            1,
            vec![o],
            vec![WinningPackage {
                client_id: ClientId(0),
                wins: vec![w.clone()],
                cost: w.revenue(),
            }],
            vec![],
        );
        let report = compute_indices(&outcome, &[]);
        // (3 - 2) / 2.
        assert_eq!(report.additional_profit, Some(0.5));
        assert!(report.additional_profit.unwrap() >= 0.0);
    }

    #[test]
    fn spot_opportunity_drops_when_more_sells() {
        let o1 = offer(0, 0, 0, 1, 80, 2);
        let o2 = offer(1, 0, 0, 1, 80, 2);
        let w = win(0, 0, o1.clone(), 1, 80, 3);
        let before = outcome_with(1, vec![o1.clone(), o2.clone()], vec![], vec![w.clone()]);
        let report_before = compute_indices(&before, &[]);
        let after = outcome_with(
            1,
            vec![o1, o2],
            vec![WinningPackage {
                client_id: ClientId(0),
                wins: vec![w.clone()],
                cost: w.revenue(),
            }],
            vec![],
        );
        let report_after = compute_indices(&after, &[]);
        let b = report_before.per_slot[0].spot_opportunity.unwrap();
        let a = report_after.per_slot[0].spot_opportunity.unwrap();
        assert!(a <= b);
        assert_eq!(b, 1.0);
        assert_eq!(a, 0.5);
    }

    #[test]
    fn t_interval_matches_closed_form() {
        let (mean, half) = t_confidence(&[0.4, 0.6], 0.95).unwrap();
        assert!((mean - 0.5).abs() < 1e-12);
        // t(0.975, 1) * s / sqrt(2) with s = stdev{0.4, 0.6}.
        let s = ((0.4f64 - 0.5).powi(2) + (0.6f64 - 0.5).powi(2)).sqrt(); // sqrt(0.02)
        let expected = 12.706204736432095 * s / 2f64.sqrt();
        assert!((half - expected).abs() < 1e-9, "{half} vs {expected}");
    }

    #[test]
    fn identical_reports_have_zero_half_width() {
        let (mean, half) = t_confidence(&[0.3, 0.3, 0.3, 0.3], 0.95).unwrap();
        assert_eq!(mean, 0.3);
        assert_eq!(half, 0.0);
    }

    #[test]
    fn too_few_batches_is_an_error() {
        assert_eq!(t_confidence(&[0.5], 0.95), Err(MetricsError::InsufficientBatches(1)));
    }

    #[test]
    fn coverage_of_t_interval_on_synthetic_stream() {
        // 25 batches of 200 uniform(0.4, 0.6) samples; the 95% interval
        // over batch means should cover the true mean 0.5 nearly always.
        use rand::{Rng, SeedableRng};
        let mut covered = 0;
        for seed in 0..100u64 {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let batch_means: Vec<f64> = (0..25)
                .map(|_| (0..200).map(|_| rng.gen_range(0.4..0.6)).sum::<f64>() / 200.0)
                .collect();
            let (mean, half) = t_confidence(&batch_means, 0.95).unwrap();
            if (mean - 0.5).abs() <= half {
                covered += 1;
            }
        }
        assert!(covered >= 90, "covered {covered}/100");
    }

    #[test]
    fn batch_statistics_shapes() {
        let o = offer(0, 0, 0, 1, 80, 2);
        let outcome = outcome_with(1, vec![o], vec![], vec![]);
        let report = compute_indices(&outcome, &[]);
        let reports = vec![report.clone(), report];
        let stats = batch_statistics(&reports, 2, 1).unwrap();
        assert_eq!(stats.metrics.len(), 8);
        let capacity = stats
            .metrics
            .iter()
            .find(|s| s.metric == Metric::CapacityAllocation)
            .unwrap();
        assert_eq!(capacity.mean, Some(1.0));
        assert_eq!(capacity.half_width, Some(0.0));
        assert!(matches!(
            batch_statistics(&[], 1, 0),
            Err(MetricsError::InsufficientBatches(1))
        ));
    }

    #[test]
    fn csv_renders_absent_as_empty() {
        let o = offer(0, 0, 0, 1, 80, 2);
        let outcome = outcome_with(2, vec![o], vec![], vec![]);
        let report = compute_indices(&outcome, &[]);
        let csv = render_per_slot_csv(&[(0, 0, &report)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        // Slot 1 has no offers and no requests: all cells empty.
        assert_eq!(lines[2], "0,0,1,,,,,,");
    }
}
