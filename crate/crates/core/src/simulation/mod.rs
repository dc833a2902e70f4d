//! Discrete-time venue simulation.
//!
//! Agents random-walk on a 10 x 10 m floor. Every tick they sense each
//! other, earn proximity credit, log immediate contacts and may infect
//! their neighbours. Diagnosed agents publish trace transactions,
//! misbehaving agents are penalized by the authorized validators, and
//! pending transactions are mined into a W-Hash chain by credit-ranked
//! miners.

mod contacts;
mod run;
mod world;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

pub use contacts::{ContactLog, LoggedContact};
pub use run::{
    interaction_stats, AuditContact, BehaviorAssignment, CreditRow, InteractionLog, InteractionStats, MetricsRow,
    SecurityEvent, SecurityEventKind, SimConfig, SimError, SimOutput, Simulation, TickInteractions, TraceAudit,
    REPORTED_RADII,
};
pub use world::{
    extract_contacts, infection_probability, reflect, spread_infection, step_mobility, Agent, Behavior, Contact,
    InfectionState, Venue, WorldState,
};

use crate::identity::NodeId;
use crate::ledger::{Block, TracePayload, TxKind};

/// A trace transaction that does not match the world record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceMismatch {
    /// No accepted audit record for this sender at this tick.
    UnknownClaim {
        block: u64,
        sender: NodeId,
        tick: u64,
    },
    /// A listed peer was not an immediate contact within the retention window.
    UnloggedPeer {
        block: u64,
        sender: NodeId,
        peer: NodeId,
    },
    Undecodable {
        block: u64,
        sender: NodeId,
    },
}

/// Checks every trace transaction on the chain against the accepted claims
/// in `audit`: the sender was diagnosed by then, and each listed peer was
/// logged closer than `immediate_threshold` within `retention` ticks.
pub fn check_trace_consistency(
    blocks: &[Block],
    audit: &[TraceAudit],
    immediate_threshold: f64,
    retention: u64,
) -> Vec<TraceMismatch> {
    let claims: BTreeMap<(NodeId, u64), &TraceAudit> =
        audit.iter().filter(|a| a.accepted).map(|a| ((a.node_id, a.tick), a)).collect();
    let mut issues = Vec::new();
    for block in blocks {
        for tx in block.transactions.iter().filter(|t| t.kind == TxKind::Trace) {
            let sender = tx.sender;
            let Ok(payload) = TracePayload::decode(&tx.payload) else {
                issues.push(TraceMismatch::Undecodable { block: block.index, sender });
                continue;
            };
            let claim = claims.get(&(sender, tx.timestamp));
            let Some(claim) = claim.filter(|c| c.diagnosed_tick.is_some_and(|d| d <= tx.timestamp)) else {
                issues.push(TraceMismatch::UnknownClaim { block: block.index, sender, tick: tx.timestamp });
                continue;
            };
            for c in payload.contacts {
                let logged = claim.contacts.iter().any(|a| {
                    a.peer == c.peer
                        && a.tick == c.tick
                        && a.distance < immediate_threshold
                        && tx.timestamp.saturating_sub(a.tick) <= retention
                });
                if !logged {
                    issues.push(TraceMismatch::UnloggedPeer { block: block.index, sender, peer: c.peer });
                }
            }
        }
    }
    issues
}
