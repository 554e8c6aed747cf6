//! Stage B: the clock-proxy auction.
//!
//! Per-service, per-slot clocks discover prices (clients drop out as the
//! price passes their private caps); the proxy phase then auctions runs of
//! consecutive slots from longest to single slots, and a final round picks
//! each client's winning package from its provisional wins. Capacity never
//! sells twice: what is left joins the spot pool at the coalition's ask.

mod clock;
mod proxy;

pub use clock::{clock_aggregates, run_clock_phase, starting_price, ClockState, DemandLine, SupplyLine};
pub use proxy::{build_runs, final_round, match_run, preliminary_rounds, run_price, MatchedBid, PreliminaryResult};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AdvertisedBundle, ClientId, CoalitionId, Micro, ModelError, Package, RequestedRun, ServiceId,
    SlotIndex,
};

#[derive(Debug, Error, PartialEq)]
pub enum AuctionError {
    #[error("no coalition supplies service {0} in slot {1}")]
    NoMarket(ServiceId, SlotIndex),
    #[error("client {0} holds no commitment on any slot of the run")]
    NoCommitment(ClientId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How clock capacity is aggregated at a price point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CapacityMode {
    /// Count only coalitions whose ask is at or below the clock price; a
    /// coalition never sells below its consensus floor.
    #[default]
    AskFiltered,
    /// Count every supplying coalition regardless of ask.
    Literal,
}

/// Everything the auction consumes: advertised bundles, requested packages
/// and the clients' private price caps per service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSnapshot {
    pub kappa: u32,
    pub advertised: Vec<AdvertisedBundle>,
    pub packages: Vec<Package>,
    pub caps: Vec<(ClientId, ServiceId, Micro)>,
}

impl MarketSnapshot {
    pub fn requested_runs(&self) -> Result<Vec<RequestedRun>, ModelError> {
        let mut runs = Vec::new();
        for package in &self.packages {
            runs.extend(package.requested_runs()?);
        }
        Ok(runs)
    }

    pub fn cap_index(&self) -> BTreeMap<(ClientId, ServiceId), Micro> {
        self.caps.iter().map(|&(c, s, cap)| ((c, s), cap)).collect()
    }
}

/// A client's standing obligation from the clock phase: quantity at the
/// final clock price for one service in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockCommitment {
    pub client_id: ClientId,
    pub service_id: ServiceId,
    pub slot: SlotIndex,
    pub vcpus: u32,
    pub price: Micro,
}

/// Fast lookup of a client's committed prices: (client, service) -> slot -> price.
pub type CommitmentIndex = BTreeMap<(ClientId, ServiceId), BTreeMap<SlotIndex, Micro>>;

pub fn index_commitments(commitments: &[ClockCommitment]) -> CommitmentIndex {
    let mut index: CommitmentIndex = BTreeMap::new();
    for c in commitments {
        index
            .entry((c.client_id, c.service_id))
            .or_default()
            .insert(c.slot, c.price);
    }
    index
}

/// A coalition's offer of one service over consecutive slots at a constant
/// quantity and ask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOffer {
    pub coalition_id: CoalitionId,
    pub service_id: ServiceId,
    pub start: SlotIndex,
    pub length: u32,
    /// Capacity per slot.
    pub vcpus: u32,
    pub ask: Micro,
}

impl RunOffer {
    pub fn slots(&self) -> impl Iterator<Item = SlotIndex> {
        (self.start.0..self.start.0 + self.length).map(SlotIndex)
    }

    pub fn covers(&self, slot: SlotIndex) -> bool {
        slot.0 >= self.start.0 && slot.0 < self.start.0 + self.length
    }
}

/// A bid tentatively holding a run until the final round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvisionalWin {
    /// Creation-order id; the deterministic tie-breaker of the final round.
    pub id: u32,
    pub client_id: ClientId,
    pub run: RunOffer,
    pub price_per_slot: Micro,
    pub vcpus: u32,
    /// Slots actually allocated: the first `covered_len` slots of the run.
    pub covered_len: u32,
    /// Preliminary round the run was won in.
    pub round: u32,
}

impl ProvisionalWin {
    pub fn covered_slots(&self) -> impl Iterator<Item = SlotIndex> {
        (self.run.start.0..self.run.start.0 + self.covered_len).map(SlotIndex)
    }

    pub fn covers(&self, slot: SlotIndex) -> bool {
        slot.0 >= self.run.start.0 && slot.0 < self.run.start.0 + self.covered_len
    }

    pub fn vcpu_slots(&self) -> u64 {
        self.vcpus as u64 * self.covered_len as u64
    }

    /// Linear pricing: price per slot times quantity times allocated slots.
    pub fn revenue(&self) -> Micro {
        self.price_per_slot.times(self.vcpu_slots())
    }
}

/// The wins a client's final package keeps, with the package cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinningPackage {
    pub client_id: ClientId,
    pub wins: Vec<ProvisionalWin>,
    pub cost: Micro,
}

/// Result of one auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub kappa: u32,
    /// The runs offered when the proxy phase opened.
    pub offers: Vec<RunOffer>,
    pub commitments: Vec<ClockCommitment>,
    pub packages: Vec<WinningPackage>,
    /// Provisional wins excluded from every final package.
    pub overbids: Vec<ProvisionalWin>,
    /// Requested parts for which the client holds no win at all.
    pub unsatisfied: Vec<(ClientId, ServiceId)>,
    /// Run fragments withdrawn or left unsold by the preliminary rounds.
    pub residual_runs: Vec<RunOffer>,
}

/// Offered / sold / spot capacity of one (coalition, service, slot) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityCell {
    pub offered: u64,
    pub sold: u64,
    pub ask: Micro,
}

impl CapacityCell {
    pub fn spot(&self) -> u64 {
        self.offered - self.sold
    }
}

/// Per (coalition, service, slot) capacity ledger of an outcome. Sold
/// counts only wins inside final packages; overbid capacity returns to the
/// pool.
pub fn capacity_ledger(
    outcome: &AuctionOutcome,
) -> BTreeMap<(CoalitionId, ServiceId, SlotIndex), CapacityCell> {
    let mut ledger: BTreeMap<(CoalitionId, ServiceId, SlotIndex), CapacityCell> = BTreeMap::new();
    for offer in &outcome.offers {
        for slot in offer.slots() {
            let cell = ledger
                .entry((offer.coalition_id, offer.service_id, slot))
                .or_default();
            cell.offered += offer.vcpus as u64;
            cell.ask = offer.ask;
        }
    }
    for package in &outcome.packages {
        for win in &package.wins {
            for slot in win.covered_slots() {
                let cell = ledger
                    .entry((win.run.coalition_id, win.run.service_id, slot))
                    .or_default();
                cell.sold += win.vcpus as u64;
            }
        }
    }
    ledger
}

/// Capacity left uncommitted in `slot`, available for spot allocation at
/// the coalition's ask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpotCapacity {
    pub coalition_id: CoalitionId,
    pub service_id: ServiceId,
    pub vcpus: u64,
    pub ask: Micro,
}

pub fn spot_pool(outcome: &AuctionOutcome, slot: SlotIndex) -> Vec<SpotCapacity> {
    capacity_ledger(outcome)
        .into_iter()
        .filter(|&((_, _, s), cell)| s == slot && cell.spot() > 0)
        .map(|((coalition_id, service_id, _), cell)| SpotCapacity {
            coalition_id,
            service_id,
            vcpus: cell.spot(),
            ask: cell.ask,
        })
        .collect()
}

/// One line of the exportable auction trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    ClockTick {
        service_id: ServiceId,
        slot: SlotIndex,
        price: Micro,
        capacity: u64,
        demand: u64,
    },
    ProvisionalWin {
        win_id: u32,
        client_id: ClientId,
        coalition_id: CoalitionId,
        service_id: ServiceId,
        start: SlotIndex,
        length: u32,
        covered_len: u32,
        price_per_slot: Micro,
        vcpus: u32,
        round: u32,
    },
    FinalSelection {
        client_id: ClientId,
        win_ids: Vec<u32>,
        cost: Micro,
    },
}

/// Run the whole auction: clock phase, preliminary proxy rounds, final
/// round. Pure in (market, increment, mode); the trace records every clock
/// tick, provisional win and final selection.
pub fn run_auction(
    market: &MarketSnapshot,
    increment: Micro,
    mode: CapacityMode,
) -> Result<(AuctionOutcome, Vec<TraceEvent>), AuctionError> {
    let mut trace = Vec::new();
    let requests = market.requested_runs()?;
    let commitments = run_clock_phase(market, increment, mode, &mut trace);
    let commitment_index = index_commitments(&commitments);
    let offers = build_runs(&market.advertised);
    let preliminary = preliminary_rounds(offers.clone(), &requests, &commitment_index);
    for win in &preliminary.wins {
        trace.push(TraceEvent::ProvisionalWin {
            win_id: win.id,
            client_id: win.client_id,
            coalition_id: win.run.coalition_id,
            service_id: win.run.service_id,
            start: win.run.start,
            length: win.run.length,
            covered_len: win.covered_len,
            price_per_slot: win.price_per_slot,
            vcpus: win.vcpus,
            round: win.round,
        });
    }
    let outcome = final_round(market.kappa, offers, commitments, preliminary, &requests);
    for package in &outcome.packages {
        trace.push(TraceEvent::FinalSelection {
            client_id: package.client_id,
            win_ids: package.wins.iter().map(|w| w.id).collect(),
            cost: package.cost,
        });
    }
    Ok((outcome, trace))
}
