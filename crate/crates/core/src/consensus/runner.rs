//! Drives price agreement over the simulated network.
//!
//! The production path is [`run_price_consensus`]: the coalition leader is
//! the distinguished proposer, every member is an acceptor, and the leader
//! announces the decision once a quorum accepts. [`run_contended`] drives
//! several competing proposers over one acceptor set; the safety sweeps are
//! built on it.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::Micro;
use crate::simnet::{NetConfig, NodeId, Payload, SimNet};

use super::paxos::{AcceptorState, PaxosMessage, ProposerPhase, ProposerState};
use super::{ConsensusError, PriceProposalContext};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcedureMessage {
    /// Leader -> members: the price floor, requesting target proposals.
    Floor(Micro),
    /// Member -> leader: desired target price, at or above the floor.
    Target(Micro),
    Paxos(PaxosMessage),
    /// Leader -> members: the agreed price.
    Decision(Micro),
}

impl Payload for ProcedureMessage {
    fn kind(&self) -> &'static str {
        match self {
            ProcedureMessage::Floor(_) => "floor",
            ProcedureMessage::Target(_) => "target",
            ProcedureMessage::Paxos(PaxosMessage::Prepare { .. }) => "prepare",
            ProcedureMessage::Paxos(PaxosMessage::Promise { .. }) => "promise",
            ProcedureMessage::Paxos(PaxosMessage::AcceptRequest { .. }) => "accept_request",
            ProcedureMessage::Paxos(PaxosMessage::Accepted { .. }) => "accepted",
            ProcedureMessage::Decision(_) => "decided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConsensusOutcome {
    Decided { price: Micro, messages: u64, rounds: u32 },
    /// No quorum within the round budget; nothing was announced.
    Timeout { messages: u64, rounds: u32 },
}

impl ConsensusOutcome {
    pub fn price(&self) -> Option<Micro> {
        match self {
            ConsensusOutcome::Decided { price, .. } => Some(*price),
            ConsensusOutcome::Timeout { .. } => None,
        }
    }

    pub fn messages(&self) -> u64 {
        match self {
            ConsensusOutcome::Decided { messages, .. }
            | ConsensusOutcome::Timeout { messages, .. } => *messages,
        }
    }

    pub fn rounds(&self) -> u32 {
        match self {
            ConsensusOutcome::Decided { rounds, .. }
            | ConsensusOutcome::Timeout { rounds, .. } => *rounds,
        }
    }
}

/// Full price procedure for one coalition: floor announcement, target
/// collection, consensus rounds, decision broadcast.
///
/// `targets` holds each member's desired price; submissions below the floor
/// are rejected. The leader advocates the highest valid target, falling back
/// to the floor itself when no valid target exists. Retries use the next
/// round number after a fixed deadline; `max_rounds` bounds them.
pub fn run_price_consensus(
    ctx: &PriceProposalContext,
    members: &[NodeId],
    leader: NodeId,
    targets: &BTreeMap<NodeId, Micro>,
    net: &mut SimNet<ProcedureMessage>,
    max_rounds: u32,
) -> Result<ConsensusOutcome, ConsensusError> {
    assert!(members.contains(&leader), "leader must be a member");
    let floor = ctx.floor();
    let base_sent = net.messages_sent();

    let own_target = targets.get(&leader).copied().filter(|&t| t >= floor);
    if members.len() == 1 {
        // Nothing to agree with; the leader's own target stands.
        return Ok(ConsensusOutcome::Decided {
            price: own_target.unwrap_or(floor),
            messages: 0,
            rounds: 0,
        });
    }

    for &node in members {
        net.register(node);
    }
    let quorum = members.len() / 2 + 1;
    let phase_window = 2 * net_delay(net) + 2;

    let mut acceptors: BTreeMap<NodeId, AcceptorState> =
        members.iter().map(|&m| (m, AcceptorState::default())).collect();
    let mut valid_targets: Vec<Micro> = own_target.into_iter().collect();

    for &node in members {
        if node != leader {
            net.send(leader, node, ProcedureMessage::Floor(floor))?;
        }
    }

    // Collect targets for one full round trip.
    let collect_until = net.tick() + phase_window;
    while net.tick() < collect_until {
        for envelope in net.step() {
            match envelope.payload {
                ProcedureMessage::Floor(f) => {
                    if let Some(&target) = targets.get(&envelope.to) {
                        // Rejected at submission when below the floor.
                        if target >= f {
                            net.send(envelope.to, leader, ProcedureMessage::Target(target))?;
                        }
                    }
                }
                ProcedureMessage::Target(t) if envelope.to == leader && t >= floor => {
                    valid_targets.push(t);
                }
                _ => {}
            }
        }
    }

    let candidate = valid_targets.iter().copied().max().unwrap_or(floor);
    let mut proposer = ProposerState::new(leader, quorum, candidate);
    let mut round = 0u32;
    let mut deadline = net.tick();

    loop {
        if net.tick() >= deadline && proposer.phase != ProposerPhase::Decided {
            round += 1;
            if round > max_rounds {
                return Ok(ConsensusOutcome::Timeout {
                    messages: net.messages_sent() - base_sent,
                    rounds: round - 1,
                });
            }
            deadline = net.tick() + phase_window;
            let prepare = proposer.start_round(round).expect("not decided");
            let PaxosMessage::Prepare { pn } = prepare else { unreachable!() };
            for &node in members {
                if node != leader {
                    net.send(leader, node, ProcedureMessage::Paxos(prepare))?;
                }
            }
            // The leader's own acceptor answers locally, without messages.
            let leader_acceptor = acceptors.get_mut(&leader).expect("leader registered");
            if let Some(PaxosMessage::Promise { pn, accepted }) = leader_acceptor.on_prepare(pn) {
                handle_promise(&mut proposer, leader, pn, accepted, members, net, &mut acceptors, &mut deadline, phase_window)?;
            }
        }

        for envelope in net.step() {
            match envelope.payload {
                ProcedureMessage::Paxos(PaxosMessage::Prepare { pn }) => {
                    let acceptor = acceptors.get_mut(&envelope.to).expect("registered");
                    if let Some(reply) = acceptor.on_prepare(pn) {
                        net.send(envelope.to, leader, ProcedureMessage::Paxos(reply))?;
                    }
                }
                ProcedureMessage::Paxos(PaxosMessage::Promise { pn, accepted }) => {
                    if envelope.to == leader {
                        handle_promise(&mut proposer, envelope.from, pn, accepted, members, net, &mut acceptors, &mut deadline, phase_window)?;
                    }
                }
                ProcedureMessage::Paxos(PaxosMessage::AcceptRequest { pn, value }) => {
                    let acceptor = acceptors.get_mut(&envelope.to).expect("registered");
                    if let Some(reply) = acceptor.on_accept_request(pn, value) {
                        net.send(envelope.to, leader, ProcedureMessage::Paxos(reply))?;
                    }
                }
                ProcedureMessage::Paxos(PaxosMessage::Accepted { pn, value })
                    if envelope.to == leader =>
                {
                    proposer.on_accepted(envelope.from, pn, value);
                }
                _ => {}
            }
        }

        if let Some(price) = proposer.decided {
            for &node in members {
                if node != leader {
                    net.send(leader, node, ProcedureMessage::Decision(price))?;
                }
            }
            // Drain the announcement so the trace is complete.
            for _ in 0..=net_delay(net) {
                net.step();
            }
            return Ok(ConsensusOutcome::Decided {
                price,
                messages: net.messages_sent() - base_sent,
                rounds: round,
            });
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn handle_promise(
    proposer: &mut ProposerState,
    from: NodeId,
    pn: super::ProposalNumber,
    accepted: Option<(super::ProposalNumber, Micro)>,
    members: &[NodeId],
    net: &mut SimNet<ProcedureMessage>,
    acceptors: &mut BTreeMap<NodeId, AcceptorState>,
    deadline: &mut u64,
    phase_window: u64,
) -> Result<(), ConsensusError> {
    let leader = proposer.node;
    if let Some(request) = proposer.on_promise(from, pn, accepted) {
        *deadline = net.tick() + phase_window;
        let PaxosMessage::AcceptRequest { pn, value } = request else { unreachable!() };
        for &node in members {
            if node != leader {
                net.send(leader, node, ProcedureMessage::Paxos(request))?;
            }
        }
        let leader_acceptor = acceptors.get_mut(&leader).expect("leader registered");
        if let Some(PaxosMessage::Accepted { pn, value }) =
            leader_acceptor.on_accept_request(pn, value)
        {
            proposer.on_accepted(leader, pn, value);
        }
    }
    Ok(())
}

fn net_delay(net: &SimNet<ProcedureMessage>) -> u64 {
    // Phase windows scale with the configured hop delay.
    net.delay()
}

/// Configuration of a contended instance: several proposers advocating
/// different prices over one acceptor group.
#[derive(Debug, Clone)]
pub struct ContendedConfig {
    pub acceptors: u32,
    pub proposer_values: Vec<Micro>,
    pub loss: f64,
    pub seed: u64,
    pub max_ticks: u64,
    pub retry_interval: u64,
}

/// Everything a safety check needs: the ground-truth chosen set recorded at
/// the acceptors, what learners learned, and what was proposed.
#[derive(Debug, Clone)]
pub struct ContendedReport {
    /// Values with a full quorum of acceptances at a single proposal number.
    pub chosen: BTreeSet<Micro>,
    /// Values decided by proposers.
    pub decided: Vec<Micro>,
    /// Values learners recorded from decision announcements.
    pub learned: Vec<Micro>,
    pub proposed: BTreeSet<Micro>,
    pub messages: u64,
}

impl ContendedReport {
    /// Agreement: at most one chosen value, and every decision/learned value
    /// is the chosen one.
    pub fn agreement_holds(&self) -> bool {
        if self.chosen.len() > 1 {
            return false;
        }
        self.decided
            .iter()
            .chain(self.learned.iter())
            .all(|v| self.chosen.contains(v))
    }

    /// Validity: chosen values were proposed.
    pub fn validity_holds(&self) -> bool {
        self.chosen.is_subset(&self.proposed)
    }
}

/// Run one contended instance to quiescence or the tick budget.
pub fn run_contended(config: &ContendedConfig) -> Result<ContendedReport, ConsensusError> {
    let acceptor_nodes: Vec<NodeId> = (0..config.acceptors).collect();
    let first_proposer = config.acceptors;
    let quorum = acceptor_nodes.len() / 2 + 1;

    let mut net: SimNet<ProcedureMessage> =
        SimNet::new(NetConfig::with_loss(config.loss, config.seed))?;
    for &node in &acceptor_nodes {
        net.register(node);
    }

    let mut proposers: Vec<ProposerState> = config
        .proposer_values
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let node = first_proposer + i as NodeId;
            net.register(node);
            ProposerState::new(node, quorum, value)
        })
        .collect();
    let mut acceptors: BTreeMap<NodeId, AcceptorState> =
        acceptor_nodes.iter().map(|&n| (n, AcceptorState::default())).collect();

    // Ground truth, recorded at the acceptors themselves.
    let mut acceptances: BTreeMap<super::ProposalNumber, (Micro, BTreeSet<NodeId>)> =
        BTreeMap::new();
    let mut learned = Vec::new();
    let mut next_round: Vec<u32> = vec![1; proposers.len()];
    // Stagger starts one tick apart so rounds interleave.
    let mut next_start: Vec<u64> = (0..proposers.len() as u64).collect();

    while net.tick() < config.max_ticks {
        for (i, proposer) in proposers.iter_mut().enumerate() {
            if proposer.phase != ProposerPhase::Decided && net.tick() >= next_start[i] {
                let round = next_round[i];
                next_round[i] += 1;
                next_start[i] = net.tick() + config.retry_interval;
                if let Some(prepare) = proposer.start_round(round) {
                    for &node in &acceptor_nodes {
                        net.send(proposer.node, node, ProcedureMessage::Paxos(prepare))?;
                    }
                }
            }
        }

        for envelope in net.step() {
            match envelope.payload {
                ProcedureMessage::Paxos(PaxosMessage::Prepare { pn }) => {
                    let acceptor = acceptors.get_mut(&envelope.to).expect("registered");
                    if let Some(reply) = acceptor.on_prepare(pn) {
                        net.send(envelope.to, pn.proposer, ProcedureMessage::Paxos(reply))?;
                    }
                }
                ProcedureMessage::Paxos(PaxosMessage::Promise { pn, accepted }) => {
                    if let Some(p) = proposers.iter_mut().find(|p| p.node == envelope.to) {
                        if let Some(request) = p.on_promise(envelope.from, pn, accepted) {
                            for &node in &acceptor_nodes {
                                net.send(p.node, node, ProcedureMessage::Paxos(request))?;
                            }
                        }
                    }
                }
                ProcedureMessage::Paxos(PaxosMessage::AcceptRequest { pn, value }) => {
                    let acceptor = acceptors.get_mut(&envelope.to).expect("registered");
                    if let Some(reply) = acceptor.on_accept_request(pn, value) {
                        let entry = acceptances
                            .entry(pn)
                            .or_insert_with(|| (value, BTreeSet::new()));
                        debug_assert_eq!(entry.0, value, "one value per proposal number");
                        entry.1.insert(envelope.to);
                        net.send(envelope.to, pn.proposer, ProcedureMessage::Paxos(reply))?;
                    }
                }
                ProcedureMessage::Paxos(PaxosMessage::Accepted { pn, value }) => {
                    if let Some(p) = proposers.iter_mut().find(|p| p.node == envelope.to) {
                        if p.on_accepted(envelope.from, pn, value).is_some() {
                            for &node in &acceptor_nodes {
                                net.send(p.node, node, ProcedureMessage::Decision(value))?;
                            }
                        }
                    }
                }
                ProcedureMessage::Decision(value)
                    if acceptors.contains_key(&envelope.to) =>
                {
                    learned.push(value);
                }
                _ => {}
            }
        }

        let all_decided = proposers.iter().all(|p| p.phase == ProposerPhase::Decided);
        if all_decided && net.idle() {
            break;
        }
    }

    let chosen: BTreeSet<Micro> = acceptances
        .values()
        .filter(|(_, who)| who.len() >= quorum)
        .map(|&(value, _)| value)
        .collect();
    Ok(ContendedReport {
        chosen,
        decided: proposers.iter().filter_map(|p| p.decided).collect(),
        learned,
        proposed: config.proposer_values.iter().copied().collect(),
        messages: net.messages_sent(),
    })
}
