//! Single-decree consensus state machines.
//!
//! Acceptors and proposers are pure step functions driven by the simulated
//! network: `(state, message) -> (state', outputs)`. Proposal numbers are
//! (round, proposer) pairs ordered lexicographically, which makes them
//! globally unique without coordination.

use serde::{Deserialize, Serialize};

use crate::model::Micro;
use crate::simnet::NodeId;

use super::ConsensusError;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct ProposalNumber {
    pub round: u32,
    pub proposer: NodeId,
}

impl ProposalNumber {
    pub fn new(round: u32, proposer: NodeId) -> ProposalNumber {
        ProposalNumber { round, proposer }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PaxosMessage {
    Prepare { pn: ProposalNumber },
    Promise { pn: ProposalNumber, accepted: Option<(ProposalNumber, Micro)> },
    AcceptRequest { pn: ProposalNumber, value: Micro },
    Accepted { pn: ProposalNumber, value: Micro },
}

/// Fault-tolerant memory of the protocol. `accepted` survives simulated
/// crashes: the state lives outside the network and a crash is modeled as
/// total link loss, not state erasure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptorState {
    /// Highest proposal number ever responded to.
    pub promised: Option<ProposalNumber>,
    /// Highest accepted proposal, persisted.
    pub accepted: Option<(ProposalNumber, Micro)>,
}

impl AcceptorState {
    /// Promise not to honor anything below `pn`, or stay silent if an
    /// equal-or-higher prepare was already answered.
    pub fn on_prepare(&mut self, pn: ProposalNumber) -> Option<PaxosMessage> {
        match self.promised {
            Some(promised) if pn <= promised => None,
            _ => {
                self.promised = Some(pn);
                Some(PaxosMessage::Promise { pn, accepted: self.accepted })
            }
        }
    }

    /// Accept unless a strictly higher prepare has been promised. `pn` equal
    /// to the promise is accepted: it is the proposer's own prepared round.
    pub fn on_accept_request(
        &mut self,
        pn: ProposalNumber,
        value: Micro,
    ) -> Option<PaxosMessage> {
        match self.promised {
            Some(promised) if pn < promised => None,
            _ => {
                self.promised = Some(pn);
                self.accepted = Some((pn, value));
                Some(PaxosMessage::Accepted { pn, value })
            }
        }
    }
}

/// The value a quorum of promises obliges the proposer to advocate: the
/// accepted pair with the highest proposal number, or the proposer's own
/// candidate when no acceptor reported one.
pub fn choose_value(
    promises: &[Option<(ProposalNumber, Micro)>],
    own_candidate: Micro,
    quorum: usize,
) -> Result<Micro, ConsensusError> {
    if promises.len() < quorum {
        return Err(ConsensusError::NoQuorum { got: promises.len(), quorum });
    }
    Ok(promises
        .iter()
        .flatten()
        .max_by_key(|(pn, _)| *pn)
        .map(|&(_, value)| value)
        .unwrap_or(own_candidate))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProposerPhase {
    Idle,
    Preparing,
    Accepting,
    Decided,
}

/// Book-keeping for one proposer. Phases move idle -> preparing ->
/// accepting -> decided; a retry restarts at preparing with a higher round,
/// and decided is terminal.
#[derive(Debug, Clone)]
pub struct ProposerState {
    pub node: NodeId,
    pub quorum: usize,
    pub phase: ProposerPhase,
    pub pn: ProposalNumber,
    /// Value this proposer advocates when free to choose.
    pub candidate: Micro,
    /// Value locked in by the promise quorum for the current round.
    pub value: Option<Micro>,
    promises: Vec<(NodeId, Option<(ProposalNumber, Micro)>)>,
    accepts: Vec<NodeId>,
    pub decided: Option<Micro>,
}

impl ProposerState {
    pub fn new(node: NodeId, quorum: usize, candidate: Micro) -> ProposerState {
        ProposerState {
            node,
            quorum,
            phase: ProposerPhase::Idle,
            pn: ProposalNumber::new(0, node),
            candidate,
            value: None,
            promises: Vec::new(),
            accepts: Vec::new(),
            decided: None,
        }
    }

    /// Open round `round`, returning the prepare message to broadcast.
    pub fn start_round(&mut self, round: u32) -> Option<PaxosMessage> {
        if self.phase == ProposerPhase::Decided {
            return None;
        }
        self.pn = ProposalNumber::new(round, self.node);
        self.phase = ProposerPhase::Preparing;
        self.value = None;
        self.promises.clear();
        self.accepts.clear();
        Some(PaxosMessage::Prepare { pn: self.pn })
    }

    /// Record a promise; on reaching quorum, lock the value and return the
    /// accept request to broadcast.
    pub fn on_promise(
        &mut self,
        from: NodeId,
        pn: ProposalNumber,
        accepted: Option<(ProposalNumber, Micro)>,
    ) -> Option<PaxosMessage> {
        if self.phase != ProposerPhase::Preparing || pn != self.pn {
            return None;
        }
        if self.promises.iter().any(|(node, _)| *node == from) {
            return None;
        }
        self.promises.push((from, accepted));
        if self.promises.len() < self.quorum {
            return None;
        }
        let reported: Vec<Option<(ProposalNumber, Micro)>> =
            self.promises.iter().map(|(_, acc)| *acc).collect();
        let value = choose_value(&reported, self.candidate, self.quorum)
            .expect("quorum just checked");
        self.value = Some(value);
        self.phase = ProposerPhase::Accepting;
        Some(PaxosMessage::AcceptRequest { pn: self.pn, value })
    }

    /// Record an accept; on reaching quorum the value is decided.
    pub fn on_accepted(&mut self, from: NodeId, pn: ProposalNumber, value: Micro) -> Option<Micro> {
        if self.phase != ProposerPhase::Accepting || pn != self.pn {
            return None;
        }
        if self.accepts.contains(&from) {
            return None;
        }
        debug_assert_eq!(Some(value), self.value);
        self.accepts.push(from);
        if self.accepts.len() >= self.quorum {
            self.phase = ProposerPhase::Decided;
            self.decided = Some(value);
            self.decided
        } else {
            None
        }
    }
}
