//! The clock phase: one independent price clock per (service, slot).
//!
//! A clock opens at the lowest ask among the supplying coalitions. While
//! demand exceeds the capacity available at the current price, the price
//! rises by the configured increment and clients whose caps fall below it
//! leave the market. Everyone still active when the clock stops commits to
//! the final price. Finite caps bound the number of increments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{ClientId, CoalitionId, Micro, ServiceId, SlotIndex};

use super::{AuctionError, CapacityMode, ClockCommitment, MarketSnapshot, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupplyLine {
    pub coalition_id: CoalitionId,
    pub vcpus: u32,
    pub ask: Micro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandLine {
    pub client_id: ClientId,
    pub vcpus: u32,
    pub cap: Micro,
}

/// State of one (service, slot) clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockState {
    pub service_id: ServiceId,
    pub slot: SlotIndex,
    pub current_price: Micro,
    pub active_demands: Vec<DemandLine>,
    pub supplies: Vec<SupplyLine>,
}

/// The opening price: the minimum ask among the supplying coalitions.
pub fn starting_price(supplies: &[SupplyLine]) -> Result<Micro, AuctionError> {
    supplies
        .iter()
        .map(|s| s.ask)
        .min()
        .ok_or(AuctionError::NoMarket(ServiceId(0), SlotIndex(0)))
}

/// Capacity and demand at the state's current price. Capacity counts only
/// coalitions already selling at this price unless the literal mode is on;
/// demand counts clients whose caps still reach the price.
pub fn clock_aggregates(state: &ClockState, mode: CapacityMode) -> (u64, u64) {
    let capacity = state
        .supplies
        .iter()
        .filter(|s| mode == CapacityMode::Literal || s.ask <= state.current_price)
        .map(|s| s.vcpus as u64)
        .sum();
    let demand = state
        .active_demands
        .iter()
        .filter(|d| d.cap >= state.current_price)
        .map(|d| d.vcpus as u64)
        .sum();
    (capacity, demand)
}

/// Run every (service, slot) clock of the market to termination and return
/// the commitments of the clients still active at the final prices.
pub fn run_clock_phase(
    market: &MarketSnapshot,
    increment: Micro,
    mode: CapacityMode,
    trace: &mut Vec<TraceEvent>,
) -> Vec<ClockCommitment> {
    assert!(increment > Micro::ZERO, "price increment must be positive");

    // Collect supply and demand per (service, slot), in deterministic order.
    let mut supplies: BTreeMap<(ServiceId, SlotIndex), Vec<SupplyLine>> = BTreeMap::new();
    for bundle in &market.advertised {
        for offer in &bundle.offers {
            supplies
                .entry((offer.service_id, bundle.slot))
                .or_default()
                .push(SupplyLine {
                    coalition_id: bundle.coalition_id,
                    vcpus: offer.vcpus,
                    ask: offer.ask,
                });
        }
    }
    let caps = market.cap_index();
    let mut demands: BTreeMap<(ServiceId, SlotIndex), Vec<DemandLine>> = BTreeMap::new();
    for package in &market.packages {
        for part in &package.parts {
            for demand in &part.demands {
                let cap = caps
                    .get(&(package.client_id, demand.service_id))
                    .copied()
                    .unwrap_or(Micro::ZERO);
                demands
                    .entry((demand.service_id, part.slot))
                    .or_default()
                    .push(DemandLine {
                        client_id: package.client_id,
                        vcpus: demand.vcpus,
                        cap,
                    });
            }
        }
    }

    let mut commitments = Vec::new();
    for ((service_id, slot), supply) in supplies {
        let demand = match demands.remove(&(service_id, slot)) {
            Some(d) => d,
            None => continue,
        };
        let mut state = ClockState {
            service_id,
            slot,
            current_price: starting_price(&supply).expect("supply non-empty"),
            active_demands: demand,
            supplies: supply,
        };
        loop {
            state.active_demands.retain(|d| d.cap >= state.current_price);
            let (capacity, demand) = clock_aggregates(&state, mode);
            trace.push(TraceEvent::ClockTick {
                service_id,
                slot,
                price: state.current_price,
                capacity,
                demand,
            });
            if demand <= capacity {
                break;
            }
            state.current_price += increment;
        }
        for d in &state.active_demands {
            commitments.push(ClockCommitment {
                client_id: d.client_id,
                service_id,
                slot,
                vcpus: d.vcpus,
                price: state.current_price,
            });
        }
    }
    commitments
}
