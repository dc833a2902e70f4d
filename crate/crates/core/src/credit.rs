//! Dynamic proof of credit.
//!
//! A node's credit is its accumulated proximity credit plus a non-positive
//! penalty term. Each observed neighbour contributes `-lambda_minus / L` when
//! it is closer than the immediate threshold and `L / lambda_plus` otherwise.
//! Each abnormal event contributes `-omega(kind) * delta_t / (now - t_l)`, so
//! penalties fade as they age.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::identity::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum CreditError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("penalty at tick {event} is not strictly before now ({now})")]
    TemporalOrder { event: u64, now: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PenaltyKind {
    FalseClaim,
    ContactViolation,
    NetworkAttack,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PenaltyEvent {
    pub kind: PenaltyKind,
    pub tick: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CreditPolicy {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub omega_fc: f64,
    pub omega_sc: f64,
    pub omega_na: f64,
    /// Penalty time unit, in ticks.
    pub delta_t: f64,
    pub alpha_d: f64,
    /// Boundary between immediate and near/far contacts, metres.
    pub immediate_threshold: f64,
    /// Floor applied to measured distances before scoring, metres.
    pub min_separation: f64,
}

impl Default for CreditPolicy {
    fn default() -> Self {
        CreditPolicy {
            lambda_minus: 12.0,
            lambda_plus: 2.0,
            omega_fc: 50.0,
            omega_sc: 10.0,
            omega_na: 1.0e7,
            delta_t: 1.0,
            alpha_d: 0.0,
            immediate_threshold: 2.0,
            min_separation: 0.05,
        }
    }
}

impl CreditPolicy {
    pub fn omega(&self, kind: PenaltyKind) -> f64 {
        match kind {
            PenaltyKind::FalseClaim => self.omega_fc,
            PenaltyKind::ContactViolation => self.omega_sc,
            PenaltyKind::NetworkAttack => self.omega_na,
        }
    }

    /// Applies the minimum-separation floor to a measured distance.
    pub fn clamp_distance(&self, distance_m: f64) -> f64 {
        if distance_m < self.min_separation || distance_m.is_nan() {
            self.min_separation
        } else {
            distance_m
        }
    }

    pub fn is_immediate(&self, distance_m: f64) -> bool {
        distance_m < self.immediate_threshold
    }
}

/// Credit earned for one neighbour at `distance_m`.
pub fn proximity_credit(distance_m: f64, policy: &CreditPolicy) -> Result<f64, CreditError> {
    if !(distance_m > 0.0) {
        return Err(CreditError::NonPositiveDistance(distance_m));
    }
    Ok(if policy.is_immediate(distance_m) {
        -policy.lambda_minus / distance_m
    } else {
        distance_m / policy.lambda_plus
    })
}

/// Sum of decaying penalties, always `<= 0`.
pub fn negative_credit(events: &[PenaltyEvent], now: u64, policy: &CreditPolicy) -> Result<f64, CreditError> {
    let mut total = 0.0;
    for e in events {
        if e.tick >= now {
            return Err(CreditError::TemporalOrder { event: e.tick, now });
        }
        total -= policy.omega(e.kind) * policy.delta_t / (now - e.tick) as f64;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreditState {
    pub node: NodeId,
    pub prox_credit: f64,
    pub neg_events: Vec<PenaltyEvent>,
}

impl CreditState {
    pub fn new(node: NodeId) -> Self {
        CreditState { node, prox_credit: 0.0, neg_events: Vec::new() }
    }

    /// Adds each contact's proximity credit to the running total. On error
    /// the state is left unchanged.
    pub fn accumulate_proximity(
        &mut self,
        contacts: &[(NodeId, f64)],
        policy: &CreditPolicy,
    ) -> Result<(), CreditError> {
        let mut acc = self.prox_credit;
        for &(_, d) in contacts {
            acc += proximity_credit(d, policy)?;
        }
        self.prox_credit = acc;
        Ok(())
    }

    pub fn record_penalty(&mut self, kind: PenaltyKind, tick: u64) {
        self.neg_events.push(PenaltyEvent { kind, tick });
    }

    pub fn negative_credit(&self, now: u64, policy: &CreditPolicy) -> Result<f64, CreditError> {
        negative_credit(&self.neg_events, now, policy)
    }

    pub fn total_credit(&self, now: u64, policy: &CreditPolicy) -> Result<f64, CreditError> {
        Ok(self.prox_credit + self.negative_credit(now, policy)?)
    }
}

/// Read access to node credit for difficulty gating.
pub trait CreditLookup {
    /// Current total credit; unknown nodes have zero credit.
    fn credit_of(&self, node: &NodeId) -> f64;
}

/// Fixed per-node credits, mostly for tests and offline validation.
#[derive(Clone, Debug, Default)]
pub struct FixedCredits(pub BTreeMap<NodeId, f64>);

impl FromIterator<(NodeId, f64)> for FixedCredits {
    fn from_iter<I: IntoIterator<Item = (NodeId, f64)>>(iter: I) -> Self {
        FixedCredits(iter.into_iter().collect())
    }
}

impl CreditLookup for FixedCredits {
    fn credit_of(&self, node: &NodeId) -> f64 {
        self.0.get(node).copied().unwrap_or(0.0)
    }
}

/// Credit states keyed by node, evaluated at a fixed `now`.
#[derive(Clone, Debug)]
pub struct CreditBook {
    pub policy: CreditPolicy,
    pub now: u64,
    states: BTreeMap<NodeId, CreditState>,
}

impl CreditBook {
    pub fn new(policy: CreditPolicy) -> Self {
        CreditBook { policy, now: 0, states: BTreeMap::new() }
    }

    pub fn state_mut(&mut self, node: NodeId) -> &mut CreditState {
        self.states.entry(node).or_insert_with(|| CreditState::new(node))
    }

    pub fn state(&self, node: &NodeId) -> Option<&CreditState> {
        self.states.get(node)
    }

    pub fn insert(&mut self, state: CreditState) {
        self.states.insert(state.node, state);
    }
}

impl CreditLookup for CreditBook {
    fn credit_of(&self, node: &NodeId) -> f64 {
        self.states
            .get(node)
            .map(|s| s.total_credit(self.now, &self.policy).unwrap_or(f64::NEG_INFINITY))
            .unwrap_or(0.0)
    }
}
