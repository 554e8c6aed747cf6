//! The two-stage loop: rack-level coalition formation fed by auction
//! history, per-coalition price consensus, the clock-proxy auction, and the
//! metrics of each window.
//!
//! Window 1 always uses the predetermined bootstrap layout. Later windows
//! aggregate each rack's reports over the sliding history window; when no
//! feasible structure exists the rack falls back to the bootstrap layout
//! and the degradation is logged, never fatal. A coalition whose price
//! consensus times out simply does not advertise that service this window.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::{
    capacity_ledger, index_commitments, run_auction, AuctionError, AuctionOutcome, CapacityMode,
    MarketSnapshot, TraceEvent,
};
use crate::coalition::{
    aggregate_history, assign_and_elect, bootstrap_structure, optimal_structure, CoalitionError,
    CoalitionSpec, CoalitionStructure, PcsEntry,
};
use crate::consensus::{
    run_price_consensus, ConsensusError, ConsensusOutcome, DecisionRecord, MemberShare,
    PriceProposalContext, ProcedureMessage,
};
use crate::metrics::{compute_indices, MetricsError, MetricsReport};
use crate::model::{
    AdvertisedBundle, ClientId, CoalitionId, Demand, Micro, Offer, Package, RackId,
    RequestedRun, ReservationBundle, ScenarioConfig, Server, ServerId, ServiceId, SlotIndex,
};
use crate::simnet::{NetConfig, NetError, SimNet};

use super::rng::{stream, substream, Purpose};
use super::sample::{
    sample_coalition_plans, sample_demand_plans, sample_scenario, scenario_digest, CoalitionPlan,
    DemandPlan,
};

/// Servers per rack.
pub const RACK_CAPACITY: u32 = 48;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error(transparent)]
    Coalition(#[from] CoalitionError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub windows: u32,
    /// Message-loss probability of the consensus networks.
    pub loss: f64,
    pub capacity_mode: CapacityMode,
    /// Consensus round budget per coalition and service.
    pub max_rounds: u32,
    /// Keep the auction trace in each record.
    pub trace: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            windows: 1,
            loss: 0.0,
            capacity_mode: CapacityMode::AskFiltered,
            max_rounds: 10,
            trace: false,
        }
    }
}

/// Stage-A outcome of one rack for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RackRecord {
    pub rack_id: RackId,
    pub available: u32,
    /// The aggregated history list the structure search ran on.
    pub pcs: Vec<PcsEntry>,
    /// False when the rack fell back to the bootstrap layout.
    pub used_history: bool,
    pub structure: CoalitionStructure,
}

/// Everything recorded about one auction window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub batch: u32,
    pub run: u32,
    pub window: u32,
    pub scenario_digest: String,
    pub racks: Vec<RackRecord>,
    /// Formed coalitions; the index is the coalition id.
    pub coalitions: Vec<CoalitionSpec>,
    pub decisions: Vec<DecisionRecord>,
    pub requests: Vec<RequestedRun>,
    pub outcome: AuctionOutcome,
    pub metrics: MetricsReport,
    /// Report-only charge on overbid capacity at the configured rate.
    pub overbid_penalty: Micro,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<TraceEvent>>,
}

/// Per-server rolling history over the last `w` slots.
struct ServerLedger {
    servers: Vec<(ServerId, RackId)>,
    /// One record per slot per server: size -> (participated, value).
    history: Vec<VecDeque<BTreeMap<u32, (bool, Micro)>>>,
    window_len: usize,
}

impl ServerLedger {
    /// Lay the population out so no bootstrap coalition straddles racks: a
    /// rack holds as many whole size-`bootstrap` groups as fit in its 48
    /// servers.
    fn new(population: u32, window_len: usize, bootstrap: u32) -> ServerLedger {
        let bootstrap = bootstrap.max(1);
        let groups_per_rack = (RACK_CAPACITY / bootstrap).max(1);
        let servers: Vec<(ServerId, RackId)> = (0..population)
            .map(|i| (ServerId(i), RackId((i / bootstrap) / groups_per_rack)))
            .collect();
        ServerLedger {
            history: vec![VecDeque::new(); servers.len()],
            servers,
            window_len,
        }
    }

    fn rack_count(&self) -> u32 {
        self.servers.last().map_or(0, |&(_, rack)| rack.0 + 1)
    }

    /// Reports for one rack, participation vectors padded to the window.
    fn reports(&self, rack: RackId) -> Vec<Server> {
        let w = self.window_len;
        self.servers
            .iter()
            .zip(&self.history)
            .filter(|((_, r), _)| *r == rack)
            .map(|(&(server_id, rack_id), history)| {
                let mut server = Server::new(server_id, rack_id);
                let offset = w.saturating_sub(history.len());
                for (i, record) in history.iter().enumerate() {
                    for (&size, &(participated, value)) in record {
                        if participated {
                            server
                                .participation
                                .entry(size)
                                .or_insert_with(|| vec![false; w])[offset + i] = true;
                        }
                        if value > Micro::ZERO {
                            *server.value_history.entry(size).or_insert(Micro::ZERO) += value;
                        }
                    }
                }
                // Sizes with value but no participation vector cannot occur;
                // sizes with participation and zero value keep the vector.
                for size in server.participation.keys() {
                    server.value_history.entry(*size).or_insert(Micro::ZERO);
                }
                server
            })
            .collect()
    }

    /// Fold one window's outcome into the rolling history.
    fn record_window(
        &mut self,
        coalitions: &[CoalitionSpec],
        outcome: &AuctionOutcome,
        kappa: u32,
    ) {
        let base: Vec<usize> = self
            .history
            .iter_mut()
            .map(|h| {
                for _ in 0..kappa {
                    h.push_back(BTreeMap::new());
                }
                h.len() - kappa as usize
            })
            .collect();

        let index_of: BTreeMap<ServerId, usize> = self
            .servers
            .iter()
            .enumerate()
            .map(|(i, &(id, _))| (id, i))
            .collect();

        for package in &outcome.packages {
            let total_vcpu_slots: u64 = package.wins.iter().map(|w| w.vcpu_slots()).sum();
            if total_vcpu_slots == 0 {
                continue;
            }
            for win in &package.wins {
                // The package value splits across coalitions pro rata by the
                // vCPU-slots each one supplied, then equally among members
                // and evenly over the covered slots.
                let share = Micro(
                    (package.cost.0 as i128 * win.vcpu_slots() as i128
                        / total_vcpu_slots as i128) as i64,
                );
                let spec = &coalitions[win.run.coalition_id.0 as usize];
                let per_member_slot = share
                    .div_round_half_up(spec.size as i64 * win.covered_len.max(1) as i64);
                for &member in &spec.members {
                    let server_index = index_of[&member];
                    for slot in win.covered_slots() {
                        let record =
                            &mut self.history[server_index][base[server_index] + slot.0 as usize];
                        let entry =
                            record.entry(spec.size).or_insert((false, Micro::ZERO));
                        entry.0 = true;
                        entry.1 += per_member_slot;
                    }
                }
            }
        }

        for h in &mut self.history {
            while h.len() > self.window_len {
                h.pop_front();
            }
        }
    }
}

/// Stage A for one window: per-rack structure search and assignment.
fn form_coalitions(
    ledger: &ServerLedger,
    window: u32,
    bootstrap_size: u32,
) -> Result<(Vec<RackRecord>, Vec<CoalitionSpec>), HarnessError> {
    let mut racks = Vec::new();
    let mut coalitions = Vec::new();
    for rack_index in 0..ledger.rack_count() {
        let rack_id = RackId(rack_index);
        let reports = ledger.reports(rack_id);
        let (available, pcs) = aggregate_history(&reports)?;
        let (structure, used_history) = if window == 1 {
            (bootstrap_structure(available, bootstrap_size), false)
        } else {
            match optimal_structure(&pcs, available) {
                Ok(structure) => (structure, true),
                Err(CoalitionError::Infeasible(_)) => {
                    log::debug!(
                        "rack {rack_id}: no feasible structure from history, using bootstrap"
                    );
                    (bootstrap_structure(available, bootstrap_size), false)
                }
                Err(other) => return Err(other.into()),
            }
        };
        let assignment = assign_and_elect(&structure, &reports)?;
        coalitions.extend(assignment.coalitions);
        racks.push(RackRecord { rack_id, available, pcs, used_history, structure });
    }
    Ok((racks, coalitions))
}

/// Price consensus for every (coalition, offering); timeouts drop the
/// offering for the window.
#[allow(clippy::too_many_arguments)]
fn agree_prices(
    plans: &[CoalitionPlan],
    coalitions: &[CoalitionSpec],
    master: u64,
    batch: u32,
    run: u32,
    window: u32,
    opts: &SimOptions,
) -> Result<(Vec<DecisionRecord>, Vec<AdvertisedBundle>), HarnessError> {
    debug_assert_eq!(plans.len(), coalitions.len());
    let mut decisions = Vec::new();
    let mut per_slot: BTreeMap<(CoalitionId, SlotIndex), Vec<Offer>> = BTreeMap::new();

    for (ordinal, (plan, spec)) in plans.iter().zip(coalitions).enumerate() {
        let coalition_id = CoalitionId(ordinal as u32);
        for (offering_index, offering) in plan.offerings.iter().enumerate() {
            // Split the offered quantity across members, front-loaded;
            // members left with nothing sit this offering out.
            let base = offering.vcpus / spec.size;
            let remainder = (offering.vcpus % spec.size) as usize;
            let mut shares = Vec::new();
            let mut margins = Vec::new();
            for (i, &member) in spec.members.iter().enumerate() {
                let vcpus = base + u32::from(i < remainder);
                if vcpus == 0 {
                    continue;
                }
                shares.push(MemberShare { member, vcpus, cost: plan.member_costs[i] });
                margins.push((member, plan.member_margins[i]));
            }
            let ctx = PriceProposalContext::new(shares)?;
            let floor = ctx.floor();
            let members: Vec<u32> = ctx.members().iter().map(|m| m.member.0).collect();
            let targets: BTreeMap<u32, Micro> = margins
                .into_iter()
                .map(|(member, margin)| (member.0, floor + margin))
                .collect();
            let leader = if members.contains(&spec.leader.0) {
                spec.leader.0
            } else {
                members[0]
            };

            let seed = substream(
                master,
                batch,
                run,
                window,
                Purpose::ConsensusNet,
                (ordinal as u64) << 16 | offering_index as u64,
            );
            let mut net: SimNet<ProcedureMessage> = SimNet::new(NetConfig {
                default_loss: opts.loss,
                seed,
                ..NetConfig::default()
            })?;
            let outcome =
                run_price_consensus(&ctx, &members, leader, &targets, &mut net, opts.max_rounds)?;
            decisions.push(DecisionRecord {
                coalition_id,
                service_id: offering.service_id,
                price: outcome.price(),
                rounds: outcome.rounds(),
                messages: outcome.messages(),
                decided: outcome.price().is_some(),
            });
            match outcome {
                ConsensusOutcome::Decided { price, .. } => {
                    for slot in offering.start.0..offering.start.0 + offering.length {
                        per_slot
                            .entry((coalition_id, SlotIndex(slot)))
                            .or_default()
                            .push(Offer {
                                service_id: offering.service_id,
                                vcpus: offering.vcpus,
                                ask: price,
                            });
                    }
                }
                ConsensusOutcome::Timeout { .. } => {
                    log::warn!(
                        "{coalition_id}/{}: consensus timeout, not offering this window",
                        offering.service_id
                    );
                }
            }
        }
    }

    let advertised = per_slot
        .into_iter()
        .map(|((coalition_id, slot), offers)| AdvertisedBundle { coalition_id, slot, offers })
        .collect();
    Ok((decisions, advertised))
}

fn demand_to_market(clients: &[DemandPlan]) -> (Vec<Package>, Vec<(ClientId, ServiceId, Micro)>) {
    let mut packages = Vec::new();
    let mut caps = Vec::new();
    for (ordinal, plan) in clients.iter().enumerate() {
        let client_id = ClientId(ordinal as u32);
        let mut per_slot: BTreeMap<SlotIndex, Vec<Demand>> = BTreeMap::new();
        for part in &plan.parts {
            for slot in part.start.0..part.start.0 + part.length {
                per_slot
                    .entry(SlotIndex(slot))
                    .or_default()
                    .push(Demand { service_id: part.service_id, vcpus: part.vcpus });
            }
        }
        for (&service_id, &cap) in &plan.caps {
            caps.push((client_id, service_id, cap));
        }
        if per_slot.is_empty() {
            continue;
        }
        packages.push(Package {
            client_id,
            parts: per_slot
                .into_iter()
                .map(|(slot, demands)| ReservationBundle { client_id, slot, demands })
                .collect(),
        });
    }
    (packages, caps)
}

fn check_invariants(outcome: &AuctionOutcome) -> Result<(), HarnessError> {
    for ((coalition, service, slot), cell) in capacity_ledger(outcome) {
        if cell.sold > cell.offered {
            return Err(HarnessError::Invariant(format!(
                "{coalition}/{service} slot {slot}: sold {} exceeds offered {}",
                cell.sold, cell.offered
            )));
        }
    }
    let index = index_commitments(&outcome.commitments);
    for win in outcome.packages.iter().flat_map(|p| p.wins.iter()).chain(&outcome.overbids) {
        let committed = index
            .get(&(win.client_id, win.run.service_id))
            .map(|slots| win.run.slots().any(|s| slots.contains_key(&s)))
            .unwrap_or(false);
        if !committed {
            return Err(HarnessError::Invariant(format!(
                "win {} by {} holds no clock commitment on its run",
                win.id, win.client_id
            )));
        }
    }
    Ok(())
}

/// Run `opts.windows` chained windows for one (batch, run) cell, one record
/// per auction window.
pub fn run_two_stage(
    config: &ScenarioConfig,
    master: u64,
    batch: u32,
    run: u32,
    opts: &SimOptions,
) -> Result<Vec<RunRecord>, HarnessError> {
    config.validate().map_err(HarnessError::Config)?;
    let windows = opts.windows.max(1);
    let scenario = sample_scenario(config, master, batch, run);
    let digest = scenario_digest(config, &scenario);
    let population = scenario.coalition_count * config.bootstrap_size.max(1);
    let mut ledger = ServerLedger::new(
        population,
        config.history_window as usize,
        config.bootstrap_size,
    );

    let mut records = Vec::with_capacity(windows as usize);
    for window in 1..=windows {
        let (racks, coalitions) = form_coalitions(&ledger, window, config.bootstrap_size)?;

        let plans: Vec<CoalitionPlan> = if window == 1 {
            scenario.market.coalitions.clone()
        } else {
            let sizes: Vec<u32> = coalitions.iter().map(|c| c.size).collect();
            let mut market_rng =
                stream(master, batch, run, window - 1, Purpose::CoalitionMarket);
            let mut econ_rng =
                stream(master, batch, run, window - 1, Purpose::MemberEconomics);
            sample_coalition_plans(
                config,
                scenario.service_count,
                &sizes,
                &mut market_rng,
                &mut econ_rng,
            )
        };
        debug_assert_eq!(plans.len(), coalitions.len());

        let (decisions, advertised) =
            agree_prices(&plans, &coalitions, master, batch, run, window, opts)?;

        let clients: Vec<DemandPlan> = if window == 1 {
            scenario.market.clients.clone()
        } else {
            let mut demand_rng = stream(master, batch, run, window - 1, Purpose::ClientDemand);
            sample_demand_plans(
                config,
                scenario.service_count,
                scenario.client_count,
                &mut demand_rng,
            )
        };
        let (packages, caps) = demand_to_market(&clients);
        let market = MarketSnapshot {
            kappa: config.slots_per_auction,
            advertised,
            packages,
            caps,
        };

        let requests = market.requested_runs().map_err(AuctionError::Model)?;
        let (outcome, trace) = run_auction(&market, config.price_increment, opts.capacity_mode)?;
        check_invariants(&outcome)?;
        let metrics = compute_indices(&outcome, &requests);

        let overbid_cost: Micro = outcome.overbids.iter().map(|w| w.revenue()).sum();
        let overbid_penalty =
            Micro((overbid_cost.0 as f64 * config.overbid_penalty_rate).round() as i64);

        ledger.record_window(&coalitions, &outcome, config.slots_per_auction);

        records.push(RunRecord {
            seed: master,
            batch,
            run,
            window,
            scenario_digest: digest.clone(),
            racks,
            coalitions,
            decisions,
            requests,
            outcome,
            metrics,
            overbid_penalty,
            trace: opts.trace.then_some(trace),
        });
    }
    Ok(records)
}
