//! Price agreement inside a coalition: a single-decree consensus round
//! among the members plus the payoff algebra the agreed price must satisfy.
//!
//! Members hand the leader their quantity and internal cost per unit of
//! service; the agreed price may never fall below the highest member cost,
//! which keeps every payoff component non-negative.

mod paxos;
mod runner;

pub use paxos::{choose_value, AcceptorState, PaxosMessage, ProposalNumber, ProposerPhase, ProposerState};
pub use runner::{
    run_contended, run_price_consensus, ConsensusOutcome, ContendedConfig, ContendedReport,
    ProcedureMessage,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CoalitionId, Micro, ServerId, ServiceId};

#[derive(Debug, Error, PartialEq)]
pub enum ConsensusError {
    #[error("coalition has no members")]
    EmptyCoalition,
    #[error("member {0} offers a zero quantity")]
    ZeroQuantity(ServerId),
    #[error("total quantity is zero")]
    ZeroTotalQuantity,
    #[error("value chosen with {got} promises, quorum is {quorum}")]
    NoQuorum { got: usize, quorum: usize },
    #[error(transparent)]
    Net(#[from] crate::simnet::NetError),
}

/// One member's contribution: quantity offered and internal cost per unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberShare {
    pub member: ServerId,
    pub vcpus: u32,
    pub cost: Micro,
}

/// Member quantities and costs, held sorted by ascending cost so the price
/// floor is always the last member's cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceProposalContext {
    members: Vec<MemberShare>,
}

impl PriceProposalContext {
    pub fn new(mut members: Vec<MemberShare>) -> Result<PriceProposalContext, ConsensusError> {
        if members.is_empty() {
            return Err(ConsensusError::EmptyCoalition);
        }
        for share in &members {
            if share.vcpus == 0 {
                return Err(ConsensusError::ZeroQuantity(share.member));
            }
        }
        members.sort_by(|a, b| a.cost.cmp(&b.cost).then(a.member.cmp(&b.member)));
        Ok(PriceProposalContext { members })
    }

    pub fn members(&self) -> &[MemberShare] {
        &self.members
    }

    /// The minimum admissible price: the highest internal cost.
    pub fn floor(&self) -> Micro {
        self.members.last().expect("non-empty by construction").cost
    }

    pub fn total_vcpus(&self) -> u64 {
        self.members.iter().map(|m| m.vcpus as u64).sum()
    }
}

/// Coalition value at price `p`: revenue over the summed quantities minus
/// the members' internal costs, and the per-unit value rounded half up.
pub fn coalition_value(
    price: Micro,
    ctx: &PriceProposalContext,
) -> Result<(Micro, Micro), ConsensusError> {
    let total = ctx.total_vcpus();
    if total == 0 {
        return Err(ConsensusError::ZeroTotalQuantity);
    }
    let value: Micro = ctx
        .members()
        .iter()
        .map(|m| (price - m.cost).times(m.vcpus as u64))
        .sum();
    Ok((value, value.div_round_half_up(total as i64)))
}

/// Per-member rewards at price `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffDivision {
    pub rewards: Vec<(ServerId, Micro)>,
    /// True when every reward is strictly positive.
    pub in_core: bool,
}

/// Split the coalition value member by member: `reward = q * (p - c)`.
/// The rewards sum to the coalition value exactly.
pub fn payoff_division(price: Micro, ctx: &PriceProposalContext) -> PayoffDivision {
    let rewards: Vec<(ServerId, Micro)> = ctx
        .members()
        .iter()
        .map(|m| (m.member, (price - m.cost).times(m.vcpus as u64)))
        .collect();
    let in_core = rewards.iter().all(|&(_, r)| r > Micro::ZERO);
    PayoffDivision { rewards, in_core }
}

/// Outcome record of one coalition's price agreement, exported as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub coalition_id: CoalitionId,
    pub service_id: ServiceId,
    pub price: Option<Micro>,
    pub rounds: u32,
    pub messages: u64,
    pub decided: bool,
}
