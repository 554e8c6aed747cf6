//! The proxy phase: multi-round auctioning of consecutive-slot runs.
//!
//! Rounds walk from the longest runs down to single slots. A run's price
//! round is tied to its length relative to the service's longest initial
//! run, so every split moves a fragment one round later and one committed
//! price higher. A provisional win withdraws the coalition's remaining runs
//! for that service; an unmatched run loses its last slot and both pieces
//! re-enter the pool.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{
    AdvertisedBundle, ClientId, CoalitionId, Micro, RequestedRun, ServiceId, SlotIndex,
};

use super::{
    AuctionError, AuctionOutcome, ClockCommitment, CommitmentIndex, ProvisionalWin, RunOffer,
    WinningPackage,
};

/// Maximal consecutive runs per (coalition, service), constant quantity and
/// ask within a run. Longest first; ties by service, start slot, coalition.
type OfferCells = BTreeMap<(CoalitionId, ServiceId), Vec<(SlotIndex, u32, Micro)>>;

pub fn build_runs(advertised: &[AdvertisedBundle]) -> Vec<RunOffer> {
    let mut cells: OfferCells = BTreeMap::new();
    for bundle in advertised {
        for offer in &bundle.offers {
            cells
                .entry((bundle.coalition_id, offer.service_id))
                .or_default()
                .push((bundle.slot, offer.vcpus, offer.ask));
        }
    }
    let mut runs = Vec::new();
    for ((coalition_id, service_id), mut slots) in cells {
        slots.sort();
        slots.dedup();
        let mut open: Option<RunOffer> = None;
        for (slot, vcpus, ask) in slots {
            match open.as_mut() {
                Some(run)
                    if slot.0 == run.start.0 + run.length
                        && vcpus == run.vcpus
                        && ask == run.ask =>
                {
                    run.length += 1;
                }
                _ => {
                    runs.extend(open.take());
                    open = Some(RunOffer {
                        coalition_id,
                        service_id,
                        start: slot,
                        length: 1,
                        vcpus,
                        ask,
                    });
                }
            }
        }
        runs.extend(open);
    }
    runs.sort_by(|a, b| {
        b.length
            .cmp(&a.length)
            .then(a.service_id.cmp(&b.service_id))
            .then(a.start.cmp(&b.start))
            .then(a.coalition_id.cmp(&b.coalition_id))
    });
    runs
}

/// Price per slot a client pays for a run in preliminary round `round`: the
/// round-th lowest price among the client's clock commitments inside the
/// run, clamped to the highest one when the round exceeds their number.
pub fn run_price(
    run: &RunOffer,
    client_id: ClientId,
    commitments: &CommitmentIndex,
    round: u32,
) -> Result<Micro, AuctionError> {
    let by_slot = commitments
        .get(&(client_id, run.service_id))
        .ok_or(AuctionError::NoCommitment(client_id))?;
    let mut prices: Vec<Micro> = run
        .slots()
        .filter_map(|slot| by_slot.get(&slot).copied())
        .collect();
    if prices.is_empty() {
        return Err(AuctionError::NoCommitment(client_id));
    }
    prices.sort();
    let index = (round.max(1) as usize).min(prices.len()) - 1;
    Ok(prices[index])
}

/// A request selected as the provisional winner of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchedBid {
    pub client_id: ClientId,
    pub vcpus: u32,
    pub price_per_slot: Micro,
    pub covered_len: u32,
}

impl MatchedBid {
    pub fn revenue(&self) -> Micro {
        self.price_per_slot.times(self.vcpus as u64 * self.covered_len as u64)
    }
}

/// Find the best bid for one run among the requests.
///
/// A request matches when the run has the same length or one slot more
/// (single-slot runs accept any committed client), the capacity covers the
/// requested quantity, the client holds a clock commitment on at least one
/// slot of the run, and the resulting price does not undercut the ask. The
/// winner provides the largest revenue; ties go to the smallest client id.
pub fn match_run(
    run: &RunOffer,
    requests: &[RequestedRun],
    commitments: &CommitmentIndex,
    round: u32,
) -> Option<MatchedBid> {
    let mut best: Option<MatchedBid> = None;
    for request in requests {
        if request.service_id != run.service_id {
            continue;
        }
        let length_ok =
            run.length == request.length || run.length == request.length + 1 || run.length == 1;
        if !length_ok || run.vcpus < request.vcpus {
            continue;
        }
        let price = match run_price(run, request.client_id, commitments, round) {
            Ok(price) => price,
            Err(_) => continue,
        };
        if price < run.ask {
            continue;
        }
        let bid = MatchedBid {
            client_id: request.client_id,
            vcpus: request.vcpus,
            price_per_slot: price,
            covered_len: request.length.min(run.length),
        };
        let better = match &best {
            None => true,
            Some(current) => {
                let (a, b) = (bid.revenue(), current.revenue());
                a > b || (a == b && bid.client_id < current.client_id)
            }
        };
        if better {
            best = Some(bid);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreliminaryResult {
    pub wins: Vec<ProvisionalWin>,
    /// Fragments withdrawn after a win plus single slots nobody bid on.
    pub residual: Vec<RunOffer>,
}

/// Run the preliminary rounds to exhaustion.
///
/// Each pass processes every pooled run of the current maximum length. A
/// matched run becomes a provisional win and withdraws the coalition's
/// other runs for that service; an unmatched run is split into its first
/// `length - 1` slots and its last slot, both re-entering the pool, until
/// only single slots remain.
pub fn preliminary_rounds(
    initial_runs: Vec<RunOffer>,
    requests: &[RequestedRun],
    commitments: &CommitmentIndex,
) -> PreliminaryResult {
    let mut gamma: BTreeMap<ServiceId, u32> = BTreeMap::new();
    for run in &initial_runs {
        let g = gamma.entry(run.service_id).or_insert(0);
        *g = (*g).max(run.length);
    }

    let mut pool = initial_runs;
    let mut wins: Vec<ProvisionalWin> = Vec::new();
    let mut residual: Vec<RunOffer> = Vec::new();
    // Winning length per (coalition, service): strictly shorter runs are
    // withdrawn, equal-length ones (the peeled single slots) stay sellable.
    let mut won: BTreeMap<(CoalitionId, ServiceId), u32> = BTreeMap::new();

    while let Some(level) = pool.iter().map(|r| r.length).max() {
        let mut current: Vec<RunOffer> = Vec::new();
        pool.retain(|r| {
            if r.length == level {
                current.push(r.clone());
                false
            } else {
                true
            }
        });
        current.sort_by_key(|r| (r.service_id, r.start, r.coalition_id));
        for run in current {
            let key = (run.coalition_id, run.service_id);
            if won.get(&key).is_some_and(|&len| run.length < len) {
                residual.push(run);
                continue;
            }
            let round = gamma[&run.service_id] - run.length + 1;
            match match_run(&run, requests, commitments, round) {
                Some(bid) => {
                    won.entry(key)
                        .and_modify(|len| *len = (*len).max(run.length))
                        .or_insert(run.length);
                    wins.push(ProvisionalWin {
                        id: wins.len() as u32,
                        client_id: bid.client_id,
                        price_per_slot: bid.price_per_slot,
                        vcpus: bid.vcpus,
                        covered_len: bid.covered_len,
                        round,
                        run,
                    });
                }
                None if run.length > 1 => {
                    pool.push(RunOffer { length: run.length - 1, ..run.clone() });
                    pool.push(RunOffer {
                        start: SlotIndex(run.start.0 + run.length - 1),
                        length: 1,
                        ..run
                    });
                }
                None => residual.push(run),
            }
        }
    }
    PreliminaryResult { wins, residual }
}

fn overlap(win: &ProvisionalWin, request: &RequestedRun) -> u64 {
    let lo = win.run.start.0.max(request.start.0);
    let hi = (win.run.start.0 + win.covered_len).min(request.start.0 + request.length);
    u64::from(hi.saturating_sub(lo))
}

/// Best slot-disjoint subset of one service's wins for one request,
/// maximizing covered requested slots, then revenue. Weighted interval
/// selection over the wins sorted by start slot; ties prefer taking the
/// earlier (smaller-id-first within a start) win.
fn select_disjoint(wins: &[&ProvisionalWin], request: &RequestedRun) -> Vec<u32> {
    let mut sorted: Vec<&ProvisionalWin> = wins.to_vec();
    sorted.sort_by_key(|w| (w.run.start.0, w.id));
    let n = sorted.len();
    // next[i]: first win starting at or after the end of win i.
    let next: Vec<usize> = (0..n)
        .map(|i| {
            let end = sorted[i].run.start.0 + sorted[i].covered_len.max(1);
            sorted.partition_point(|w| w.run.start.0 < end).max(i + 1)
        })
        .collect();
    let mut best: Vec<(u64, Micro)> = vec![(0, Micro::ZERO); n + 1];
    for i in (0..n).rev() {
        let take = {
            let (coverage, revenue) = best[next[i]];
            (coverage + overlap(sorted[i], request), revenue + sorted[i].revenue())
        };
        best[i] = take.max(best[i + 1]);
    }
    let mut chosen = Vec::new();
    let mut i = 0;
    while i < n {
        let (coverage, revenue) = best[next[i]];
        let take = (coverage + overlap(sorted[i], request), revenue + sorted[i].revenue());
        if take == best[i] {
            chosen.push(sorted[i].id);
            i = next[i];
        } else {
            i += 1;
        }
    }
    chosen
}

/// The final round: each client reveals the package it keeps.
///
/// Per requested service the client assembles the slot-disjoint set of its
/// provisional wins that covers the most requested service-slots, with
/// revenue and then win ids breaking ties; overlapping alternatives lose.
/// Unselected wins form the overbid set and their capacity returns to the
/// spot pool.
pub fn final_round(
    kappa: u32,
    offers: Vec<RunOffer>,
    commitments: Vec<ClockCommitment>,
    preliminary: PreliminaryResult,
    requests: &[RequestedRun],
) -> AuctionOutcome {
    let mut wins_by_client: BTreeMap<ClientId, Vec<ProvisionalWin>> = BTreeMap::new();
    for win in preliminary.wins {
        wins_by_client.entry(win.client_id).or_default().push(win);
    }
    let mut requests_by_client: BTreeMap<ClientId, Vec<&RequestedRun>> = BTreeMap::new();
    for request in requests {
        requests_by_client.entry(request.client_id).or_default().push(request);
    }

    let mut packages = Vec::new();
    let mut overbids = Vec::new();
    let mut unsatisfied = Vec::new();
    for (client_id, client_requests) in requests_by_client {
        let wins = wins_by_client.remove(&client_id).unwrap_or_default();
        let mut selected_ids: BTreeSet<u32> = BTreeSet::new();
        for request in client_requests {
            let candidates: Vec<&ProvisionalWin> = wins
                .iter()
                .filter(|w| w.run.service_id == request.service_id)
                .collect();
            if candidates.is_empty() {
                unsatisfied.push((client_id, request.service_id));
                continue;
            }
            selected_ids.extend(select_disjoint(&candidates, request));
        }
        let mut selected: Vec<ProvisionalWin> = Vec::new();
        for win in wins {
            if selected_ids.contains(&win.id) {
                selected.push(win);
            } else {
                overbids.push(win);
            }
        }
        if !selected.is_empty() {
            let cost = selected.iter().map(ProvisionalWin::revenue).sum();
            packages.push(WinningPackage { client_id, wins: selected, cost });
        }
    }
    // Wins of clients without any surviving request record are overbids too.
    overbids.extend(wins_by_client.into_values().flatten());
    overbids.sort_by_key(|w| w.id);

    AuctionOutcome {
        kappa,
        offers,
        commitments,
        packages,
        overbids,
        unsatisfied,
        residual_runs: preliminary.residual,
    }
}
