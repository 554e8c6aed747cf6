//! Scenario sampling from the configured uniform ranges.
//!
//! A scenario fixes the entity counts and the window-1 market; later
//! windows resample their market with the same machinery keyed by the
//! window index, because the coalition layout they price depends on the
//! feedback stage.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{IntRange, Micro, ScenarioConfig, ServiceId, ServiceType, SlotIndex};

use super::rng::{stream, Purpose};

/// One service a coalition plans to offer: the run and quantity; the ask
/// price comes from consensus later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferingPlan {
    pub service_id: ServiceId,
    pub start: SlotIndex,
    pub length: u32,
    pub vcpus: u32,
}

/// Market-facing features of one coalition for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionPlan {
    pub offerings: Vec<OfferingPlan>,
    /// Internal cost per unit of service, one entry per member.
    pub member_costs: Vec<Micro>,
    /// Proposal margin above the floor, one entry per member.
    pub member_margins: Vec<Micro>,
}

/// One requested service of a client's package.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestPlan {
    pub service_id: ServiceId,
    pub start: SlotIndex,
    pub length: u32,
    pub vcpus: u32,
}

/// A client's demand for one window: the package parts and the private
/// price cap per requested service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandPlan {
    pub parts: Vec<RequestPlan>,
    pub caps: BTreeMap<ServiceId, Micro>,
}

/// Sampled market of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMarket {
    pub coalitions: Vec<CoalitionPlan>,
    pub clients: Vec<DemandPlan>,
}

/// A sampled scenario: entity counts, the service catalogue, and the
/// window-1 market for the bootstrap coalition layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub coalition_count: u32,
    pub client_count: u32,
    pub service_count: u32,
    pub services: Vec<ServiceType>,
    pub market: WindowMarket,
}

fn draw(rng: &mut ChaCha12Rng, range: IntRange) -> u32 {
    rng.gen_range(range.lo()..=range.hi())
}

fn draw_micro(rng: &mut ChaCha12Rng, lo: Micro, hi: Micro) -> Micro {
    Micro(rng.gen_range(lo.0..=hi.0))
}

/// `count` distinct values out of 0..population, by partial shuffle.
fn distinct(rng: &mut ChaCha12Rng, population: u32, count: u32) -> Vec<u32> {
    let mut ids: Vec<u32> = (0..population).collect();
    let count = count.min(population) as usize;
    for i in 0..count {
        let j = rng.gen_range(i..ids.len());
        ids.swap(i, j);
    }
    ids.truncate(count);
    ids
}

/// Sample the per-coalition offerings and economics for one window, given
/// the coalition sizes the formation stage produced.
pub fn sample_coalition_plans(
    config: &ScenarioConfig,
    service_count: u32,
    coalition_sizes: &[u32],
    market_rng: &mut ChaCha12Rng,
    econ_rng: &mut ChaCha12Rng,
) -> Vec<CoalitionPlan> {
    let kappa = config.slots_per_auction;
    coalition_sizes
        .iter()
        .map(|&size| {
            let wanted = draw(market_rng, config.services_per_coalition);
            let services = distinct(market_rng, service_count, wanted);
            let offerings = services
                .into_iter()
                .map(|service| {
                    // The service comes up at a random slot; whatever part of
                    // its availability run falls past the window belongs to
                    // the next auction.
                    let length = draw(market_rng, config.offered_run_lengths).clamp(1, kappa);
                    let start = market_rng.gen_range(0..kappa);
                    OfferingPlan {
                        service_id: ServiceId(service),
                        start: SlotIndex(start),
                        length: length.min(kappa - start),
                        vcpus: draw(market_rng, config.offered_vcpus),
                    }
                })
                .collect();
            let member_costs = (0..size)
                .map(|_| draw_micro(econ_rng, config.member_cost.lo(), config.member_cost.hi()))
                .collect();
            let member_margins = (0..size)
                .map(|_| {
                    draw_micro(econ_rng, config.proposal_margin.lo(), config.proposal_margin.hi())
                })
                .collect();
            CoalitionPlan { offerings, member_costs, member_margins }
        })
        .collect()
}

/// Sample every client's package for one window, keeping the number of
/// bidders per (service, slot) within the configured band.
pub fn sample_demand_plans(
    config: &ScenarioConfig,
    service_count: u32,
    client_count: u32,
    rng: &mut ChaCha12Rng,
) -> Vec<DemandPlan> {
    let kappa = config.slots_per_auction;
    let max_bidders = config.bidders_per_service_slot.hi();
    let mut bidders: BTreeMap<(ServiceId, u32), u32> = BTreeMap::new();
    (0..client_count)
        .map(|_| {
            let wanted = draw(rng, config.services_per_package);
            let services = distinct(rng, service_count, wanted);
            let mut parts = Vec::new();
            let mut caps = BTreeMap::new();
            for service in services {
                let service_id = ServiceId(service);
                // Resample the run a bounded number of times to respect the
                // per-slot bidder cap; when nothing fits, fall back to the
                // shortest possible request before dropping the part.
                let mut placed = None;
                for attempt in 0..256 {
                    let length = if attempt < 224 {
                        draw(rng, config.requested_run_lengths).clamp(1, kappa)
                    } else {
                        config.requested_run_lengths.lo().clamp(1, kappa)
                    };
                    let start = rng.gen_range(0..=kappa - length);
                    let fits = (start..start + length)
                        .all(|slot| {
                            bidders.get(&(service_id, slot)).copied().unwrap_or(0) < max_bidders
                        });
                    if fits {
                        placed = Some((start, length));
                        break;
                    }
                }
                let Some((start, length)) = placed else { continue };
                for slot in start..start + length {
                    *bidders.entry((service_id, slot)).or_insert(0) += 1;
                }
                parts.push(RequestPlan {
                    service_id,
                    start: SlotIndex(start),
                    length,
                    vcpus: draw(rng, config.requested_vcpus),
                });
                caps.insert(
                    service_id,
                    draw_micro(rng, config.client_price_cap.lo(), config.client_price_cap.hi()),
                );
            }
            DemandPlan { parts, caps }
        })
        .collect()
}

fn service_catalogue(count: u32) -> Vec<ServiceType> {
    (0..count)
        .map(|i| ServiceType {
            service_id: ServiceId(i),
            attributes: vec![
                ("vcpus".to_string(), "shared-core".to_string()),
                ("profile".to_string(), format!("tier-{}", i % 4)),
            ],
        })
        .collect()
}

/// Sample a scenario for (master seed, batch, run): entity counts plus the
/// window-1 market under the bootstrap coalition layout.
pub fn sample_scenario(
    config: &ScenarioConfig,
    master: u64,
    batch: u32,
    run: u32,
) -> Scenario {
    let mut shape = stream(master, batch, run, 0, Purpose::ScenarioShape);
    let coalition_count = draw(&mut shape, config.coalitions);
    let client_count = draw(&mut shape, config.clients);
    let service_count = draw(&mut shape, config.services).max(1);

    let sizes = vec![config.bootstrap_size.max(1); coalition_count as usize];
    let mut market_rng = stream(master, batch, run, 0, Purpose::CoalitionMarket);
    let mut econ_rng = stream(master, batch, run, 0, Purpose::MemberEconomics);
    let coalitions =
        sample_coalition_plans(config, service_count, &sizes, &mut market_rng, &mut econ_rng);
    let mut demand_rng = stream(master, batch, run, 0, Purpose::ClientDemand);
    let clients = sample_demand_plans(config, service_count, client_count, &mut demand_rng);

    Scenario {
        coalition_count,
        client_count,
        service_count,
        services: service_catalogue(service_count),
        market: WindowMarket { coalitions, clients },
    }
}

/// Stable hex digest of (config, scenario).
pub fn scenario_digest(config: &ScenarioConfig, scenario: &Scenario) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(config).expect("config serializes"));
    hasher.update(serde_json::to_vec(scenario).expect("scenario serializes"));
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
