//! The tick loop: mobility, sensing, credit, infection, reporting and mining.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::contacts::ContactLog;
use super::world::{
    distance, infection_probability, step_mobility, Agent, Behavior, InfectionState, Venue, WorldState,
};
use crate::consensus::{self, difficulty_for, mine, DifficultyLevel, Entitlement, MiningError, Rejection};
use crate::credit::{proximity_credit, CreditError, CreditLookup, CreditPolicy, CreditState, PenaltyKind};
use crate::identity::{publish_registry, AuthorizedRegistry, IdentityError, NodeId, NodeIdentity, Role};
use crate::ledger::{
    whash_window_for, Chain, InfectedUsersPool, LedgerError, TraceContact, TracePayload, Transaction, TxKind,
    MAX_BLOCK_BYTES, MAX_WHASH_WINDOW,
};

/// Radii whose cumulative infection counts are always reported.
pub const REPORTED_RADII: [f64; 2] = [2.0, 5.0];

/// Room left in every block for the header and encoding overhead.
const BLOCK_HEADROOM: usize = 64 * 1024;

const STREAM_MOBILITY: u64 = 1;
const STREAM_INFECTION: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_TRAFFIC: u64 = 4;
const STREAM_MINING: u64 = 5;
const STREAM_IDENTITY: u64 = 6;
const STREAM_PLACEMENT: u64 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorAssignment {
    pub agent: usize,
    pub behavior: Behavior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_agents: usize,
    pub ticks: u64,
    /// Standard deviation of each random-walk coordinate step, metres.
    pub step_std: f64,
    /// Radius of the infection process that drives diagnoses and traces.
    pub infection_radius: f64,
    pub seed: u64,
    pub policy: CreditPolicy,
    pub tx_per_block_mean: u32,
    /// Target chain growth over the run; sets the background traffic rate.
    pub n_blocks: u32,
    /// Per-tick transmission probability from one infected neighbour.
    pub p_inf: f64,
    /// Per-tick probability that an infected agent is diagnosed.
    pub p_diagnosis: f64,
    /// Range within which devices observe each other for credit.
    pub observation_radius: f64,
    /// Gaussian error added to sensed distances; zero means exact ranging.
    pub distance_noise_std: f64,
    pub day_ticks: u64,
    pub retention_days: u64,
    /// Agent infected at tick 0, if any.
    pub patient_zero: Option<usize>,
    pub behaviors: Vec<BehaviorAssignment>,
    pub attack_tick: u64,
    pub false_claim_tick: u64,
    /// Minimum ticks between two contact-violation penalties for one agent.
    pub violation_cooldown: u64,
    pub n_authorized: usize,
    /// Share of light nodes, ranked by credit, that may mine.
    pub miner_fraction: f64,
    pub tracked_agents: Vec<usize>,
    /// Explicit starting positions; drawn uniformly when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_positions: Option<Vec<[f64; 2]>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_agents: 1000,
            ticks: 1000,
            step_std: 0.3,
            infection_radius: 2.0,
            seed: 7,
            policy: CreditPolicy::default(),
            tx_per_block_mean: 200,
            n_blocks: 120,
            p_inf: 0.02,
            p_diagnosis: 1e-4,
            observation_radius: 10.0,
            distance_noise_std: 0.0,
            day_ticks: 1000,
            retention_days: 14,
            patient_zero: Some(1),
            behaviors: vec![
                BehaviorAssignment { agent: 0, behavior: Behavior::FalseClaimer },
                BehaviorAssignment { agent: 500, behavior: Behavior::Attacker },
                BehaviorAssignment { agent: 10, behavior: Behavior::DistanceViolator },
                BehaviorAssignment { agent: 20, behavior: Behavior::DistanceViolator },
                BehaviorAssignment { agent: 30, behavior: Behavior::DistanceViolator },
            ],
            attack_tick: 500,
            false_claim_tick: 300,
            violation_cooldown: 100,
            n_authorized: 4,
            miner_fraction: 0.1,
            tracked_agents: vec![0, 100, 250, 500, 750, 999],
            initial_positions: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.n_agents;
        let checks: [(bool, &'static str); 12] = [
            (n >= 2, "n_agents must be at least 2"),
            (self.ticks >= 1, "ticks must be positive"),
            (self.step_std >= 0.0 && self.step_std.is_finite(), "step_std must be finite and non-negative"),
            (self.infection_radius > 0.0 && self.infection_radius.is_finite(), "infection_radius must be positive"),
            ((0.0..=1.0).contains(&self.p_inf), "p_inf must lie in [0, 1]"),
            ((0.0..=1.0).contains(&self.p_diagnosis), "p_diagnosis must lie in [0, 1]"),
            (self.observation_radius > 0.0, "observation_radius must be positive"),
            (self.distance_noise_std >= 0.0, "distance_noise_std must be non-negative"),
            (self.tx_per_block_mean >= 1, "tx_per_block_mean must be positive"),
            (self.n_authorized >= 1, "n_authorized must be positive"),
            ((0.0..=1.0).contains(&self.miner_fraction), "miner_fraction must lie in [0, 1]"),
            (self.day_ticks >= 1 && self.retention_days >= 1, "retention must be positive"),
        ];
        if let Some((_, msg)) = checks.iter().find(|(ok, _)| !ok) {
            return Err(SimError::Config(msg));
        }
        if self.patient_zero.is_some_and(|p| p >= n)
            || self.behaviors.iter().any(|b| b.agent >= n)
            || self.tracked_agents.iter().any(|&a| a >= n)
        {
            return Err(SimError::Config("agent index out of range"));
        }
        if let Some(p) = &self.initial_positions {
            if p.len() != n {
                return Err(SimError::Config("initial_positions must list every agent"));
            }
        }
        Ok(())
    }

    pub fn retention_ticks(&self) -> u64 {
        self.day_ticks * self.retention_days
    }

    pub fn behavior_of(&self, agent: usize) -> Behavior {
        self.behaviors.iter().rev().find(|b| b.agent == agent).map_or(Behavior::Honest, |b| b.behavior)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Credit(#[from] CreditError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error("honest block rejected: {0}")]
    Rejected(Rejection),
    #[error("forged block was accepted at tick {0}")]
    ForgeryAccepted(u64),
    #[error("no interactions were recorded")]
    EmptyMetrics,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub tick: u64,
    pub infected_count_2m: usize,
    pub infected_count_5m: usize,
    /// Transactions submitted during the tick.
    pub tx_count: usize,
    /// Blocks on the chain after the tick, genesis excluded.
    pub blocks_mined: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreditRow {
    pub tick: u64,
    pub agent: usize,
    pub node_id: NodeId,
    pub prox_credit: f64,
    pub neg_credit: f64,
    pub total_credit: f64,
    pub level: DifficultyLevel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditContact {
    pub peer_agent: usize,
    pub peer: NodeId,
    pub tick: u64,
    pub distance: f64,
}

/// A trace claim as seen by the authorized validators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceAudit {
    pub tick: u64,
    pub agent: usize,
    pub node_id: NodeId,
    pub diagnosed_tick: Option<u64>,
    pub accepted: bool,
    pub contacts: Vec<AuditContact>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecurityEventKind {
    ForgedBlockRejected,
    EntitlementRejected,
    FalseClaimRejected,
    ContactViolation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityEvent {
    pub tick: u64,
    pub agent: usize,
    pub node_id: NodeId,
    pub kind: SecurityEventKind,
    pub rejection: Option<Rejection>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TickInteractions {
    /// Directed observations: a pair in range counts once per side.
    pub interactions: u64,
    pub gained_credit: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionLog {
    pub n_agents: usize,
    pub ticks: Vec<TickInteractions>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionStats {
    pub avg_interactions: f64,
    pub avg_gained_credit: f64,
}

/// Per-agent totals over the whole run.
pub fn interaction_stats(log: &InteractionLog) -> Result<InteractionStats, SimError> {
    if log.ticks.is_empty() || log.n_agents == 0 {
        return Err(SimError::EmptyMetrics);
    }
    let n = log.n_agents as f64;
    let interactions: u64 = log.ticks.iter().map(|t| t.interactions).sum();
    let gained: f64 = log.ticks.iter().map(|t| t.gained_credit).sum();
    Ok(InteractionStats { avg_interactions: interactions as f64 / n, avg_gained_credit: gained / n })
}

#[derive(Clone, Debug, PartialEq)]
struct InfectionLayer {
    radius: f64,
    infected: Vec<bool>,
    count: usize,
}

struct Streams {
    mobility: ChaCha8Rng,
    infection: ChaCha8Rng,
    noise: ChaCha8Rng,
    traffic: ChaCha8Rng,
    mining: ChaCha8Rng,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

struct CreditView<'a> {
    index: &'a BTreeMap<NodeId, usize>,
    states: &'a [CreditState],
    policy: &'a CreditPolicy,
    now: u64,
}

impl CreditLookup for CreditView<'_> {
    fn credit_of(&self, node: &NodeId) -> f64 {
        self.index
            .get(node)
            .map(|&i| self.states[i].total_credit(self.now, self.policy).unwrap_or(f64::NEG_INFINITY))
            .unwrap_or(0.0)
    }
}

/// Everything a finished run produced.
#[derive(Clone, Debug)]
pub struct SimOutput {
    pub config: SimConfig,
    pub metrics: Vec<MetricsRow>,
    pub credits: Vec<CreditRow>,
    pub contacts: Vec<TraceAudit>,
    pub events: Vec<SecurityEvent>,
    pub interactions: InteractionLog,
    pub chain: Chain,
    pub iup: InfectedUsersPool,
    pub registry: AuthorizedRegistry,
    pub manager: NodeIdentity,
    pub agent_ids: Vec<NodeId>,
    pub behaviors: Vec<Behavior>,
    /// Total credit of every agent, evaluated one tick after the last.
    pub final_credits: Vec<f64>,
}

pub struct Simulation {
    config: SimConfig,
    world: WorldState,
    identities: Vec<NodeIdentity>,
    index: BTreeMap<NodeId, usize>,
    credits: Vec<CreditState>,
    layers: Vec<InfectionLayer>,
    primary: usize,
    contact_log: ContactLog,
    manager: NodeIdentity,
    authorities: Vec<NodeIdentity>,
    registry: AuthorizedRegistry,
    chain: Chain,
    iup: InfectedUsersPool,
    pool: VecDeque<Transaction>,
    block_target: usize,
    rng: Streams,
    last_violation: Vec<Option<u64>>,
    attack_pending: Vec<usize>,
    tx_this_tick: usize,
    metrics: Vec<MetricsRow>,
    credit_rows: Vec<CreditRow>,
    audit: Vec<TraceAudit>,
    events: Vec<SecurityEvent>,
    interactions: InteractionLog,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let n = config.n_agents;
        let venue = Venue::default();

        let mut id_rng = ChaCha20Rng::seed_from_u64(config.seed);
        id_rng.set_stream(STREAM_IDENTITY);
        let identities: Vec<NodeIdentity> = (0..n).map(|_| NodeIdentity::generate(Role::Light, &mut id_rng)).collect();
        let manager = NodeIdentity::generate(Role::Manager, &mut id_rng);
        let authorities: Vec<NodeIdentity> =
            (0..config.n_authorized).map(|_| NodeIdentity::generate(Role::Authorized, &mut id_rng)).collect();
        let registry = publish_registry(&manager, authorities.iter().map(|a| a.public_key().clone()).collect())?;

        let mut placement = stream(config.seed, STREAM_PLACEMENT);
        let agents: Vec<Agent> = identities
            .iter()
            .enumerate()
            .map(|(i, id)| Agent {
                id: id.node_id(),
                position: match &config.initial_positions {
                    Some(p) => p[i],
                    None => venue.random_point(&mut placement),
                },
                infection: if config.patient_zero == Some(i) {
                    InfectionState::Infected
                } else {
                    InfectionState::Susceptible
                },
                behavior: config.behavior_of(i),
            })
            .collect();

        let mut radii: Vec<f64> = REPORTED_RADII.to_vec();
        if !radii.contains(&config.infection_radius) {
            radii.push(config.infection_radius);
        }
        let primary = radii.iter().position(|&r| r == config.infection_radius).unwrap_or(0);
        let layers = radii
            .into_iter()
            .map(|radius| {
                let mut infected = vec![false; n];
                if let Some(p) = config.patient_zero {
                    infected[p] = true;
                }
                InfectionLayer { radius, infected, count: usize::from(config.patient_zero.is_some()) }
            })
            .collect();

        let index = identities.iter().enumerate().map(|(i, id)| (id.node_id(), i)).collect();
        let credits = identities.iter().map(|id| CreditState::new(id.node_id())).collect();
        let mut rng = Streams {
            mobility: stream(config.seed, STREAM_MOBILITY),
            infection: stream(config.seed, STREAM_INFECTION),
            noise: stream(config.seed, STREAM_NOISE),
            traffic: stream(config.seed, STREAM_TRAFFIC),
            mining: stream(config.seed, STREAM_MINING),
        };
        let block_target = draw_block_target(config.tx_per_block_mean, &mut rng.mining);

        let mut pool = VecDeque::new();
        pool.push_back(Transaction::new_signed(&manager, TxKind::Registry, registry.encode(), 0)?);

        Ok(Simulation {
            world: WorldState { venue, agents, step_std: config.step_std, tick: 0 },
            identities,
            index,
            credits,
            layers,
            primary,
            contact_log: ContactLog::new(n, config.retention_ticks()),
            manager,
            authorities,
            registry,
            chain: Chain::new(),
            iup: InfectedUsersPool::new(config.retention_ticks()),
            pool,
            block_target,
            rng,
            last_violation: vec![None; n],
            attack_pending: Vec::new(),
            tx_this_tick: 0,
            metrics: Vec::new(),
            credit_rows: Vec::new(),
            audit: Vec::new(),
            events: Vec::new(),
            interactions: InteractionLog { n_agents: n, ticks: Vec::new() },
            config,
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn contact_log(&self) -> &ContactLog {
        &self.contact_log
    }

    pub fn credit_state(&self, agent: usize) -> &CreditState {
        &self.credits[agent]
    }

    pub fn tick(&self) -> u64 {
        self.world.tick
    }

    /// Cumulative infections in the layer with the given radius.
    pub fn infected_at(&self, radius: f64) -> Option<usize> {
        self.layers.iter().find(|l| l.radius == radius).map(|l| l.count)
    }

    /// Runs a whole simulation.
    pub fn run(config: SimConfig) -> Result<SimOutput, SimError> {
        let mut sim = Simulation::new(config)?;
        for _ in 0..sim.config.ticks {
            sim.run_epoch()?;
        }
        Ok(sim.finish())
    }

    /// Advances the world by one tick.
    pub fn run_epoch(&mut self) -> Result<(), SimError> {
        step_mobility(&mut self.world, &mut self.rng.mobility);
        let tick = self.world.tick;
        self.tx_this_tick = 0;
        if tick > self.contact_log.retention() {
            self.contact_log.prune(tick);
        }
        self.iup.prune(tick);

        let (immediate_now, exposures) = self.sense_contacts(tick)?;
        let diagnosed = self.spread_and_diagnose(&exposures);
        for i in diagnosed {
            self.report_diagnosis(i, tick)?;
        }
        self.apply_behaviors(tick, &immediate_now)?;
        self.background_traffic(tick)?;
        while self.pool.len() >= self.block_target {
            self.mine_next_block(tick)?;
            self.block_target = draw_block_target(self.config.tx_per_block_mean, &mut self.rng.mining);
        }
        self.record_tick(tick)
    }

    /// Distances between all non-isolated agents: credit, contact log and
    /// infection exposure. Returns which agents had an immediate contact and
    /// the per-layer exposure counts.
    fn sense_contacts(&mut self, tick: u64) -> Result<(Vec<bool>, Vec<Vec<u32>>), SimError> {
        let n = self.config.n_agents;
        let policy = self.config.policy;
        let obs = self.config.observation_radius;
        let noise_std = self.config.distance_noise_std;
        let isolated: Vec<bool> = self.world.agents.iter().map(Agent::is_isolated).collect();
        let positions: Vec<[f64; 2]> = self.world.agents.iter().map(|a| a.position).collect();
        // Saturated layers cannot change, so their exposures are not needed.
        let max_layer = self.layers.iter().filter(|l| l.count < n).map(|l| l.radius).fold(-1.0, f64::max);

        let mut gained = vec![0.0; n];
        let mut immediate = vec![false; n];
        let mut exposures = vec![vec![0u32; n]; self.layers.len()];
        let mut interactions = 0u64;
        for i in 0..n {
            if isolated[i] {
                continue;
            }
            for j in i + 1..n {
                if isolated[j] {
                    continue;
                }
                let d = distance(positions[i], positions[j]);
                if d <= max_layer {
                    for (layer, exp) in self.layers.iter().zip(exposures.iter_mut()) {
                        if d <= layer.radius {
                            exp[i] += u32::from(layer.infected[j]);
                            exp[j] += u32::from(layer.infected[i]);
                        }
                    }
                }
                if d <= obs {
                    let sensed = if noise_std > 0.0 {
                        let e: f64 = StandardNormal.sample(&mut self.rng.noise);
                        d + noise_std * e
                    } else {
                        d
                    };
                    let sensed = policy.clamp_distance(sensed);
                    let c = proximity_credit(sensed, &policy)?;
                    gained[i] += c;
                    gained[j] += c;
                    interactions += 2;
                    if policy.is_immediate(sensed) {
                        self.contact_log.record(i, j, tick, sensed);
                        immediate[i] = true;
                        immediate[j] = true;
                    }
                }
            }
        }
        for (s, g) in self.credits.iter_mut().zip(&gained) {
            s.prox_credit += g;
        }
        self.interactions.ticks.push(TickInteractions { interactions, gained_credit: gained.iter().sum() });
        Ok((immediate, exposures))
    }

    /// Synchronous infection update for every layer, then diagnoses in the
    /// primary layer. Each agent draws one uniform for infection and one for
    /// diagnosis every tick, shared by all layers, so a larger radius can
    /// never infect fewer agents.
    fn spread_and_diagnose(&mut self, exposures: &[Vec<u32>]) -> Vec<usize> {
        let p_inf = self.config.p_inf;
        let p_diag = self.config.p_diagnosis;
        let mut diagnosed = Vec::new();
        for i in 0..self.config.n_agents {
            let u: f64 = self.rng.infection.gen();
            let v: f64 = self.rng.infection.gen();
            let agent = &mut self.world.agents[i];
            if agent.infection == InfectionState::Infected && v < p_diag {
                diagnosed.push(i);
            }
            for (layer, exp) in self.layers.iter_mut().zip(exposures) {
                if !layer.infected[i] && u < infection_probability(p_inf, exp[i]) {
                    layer.infected[i] = true;
                    layer.count += 1;
                }
            }
            if agent.infection == InfectionState::Susceptible && self.layers[self.primary].infected[i] {
                agent.infection = InfectionState::Infected;
            }
        }
        diagnosed
    }

    fn submit(&mut self, tx: Transaction) {
        self.pool.push_back(tx);
        self.tx_this_tick += 1;
    }

    fn trace_contacts(&self, agent: usize, tick: u64) -> Vec<AuditContact> {
        let threshold = self.config.policy.immediate_threshold;
        self.contact_log
            .contacts_of(agent)
            .filter(|c| c.distance < threshold && tick - c.tick <= self.contact_log.retention())
            .map(|c| AuditContact {
                peer_agent: c.peer,
                peer: self.world.agents[c.peer].id,
                tick: c.tick,
                distance: c.distance,
            })
            .collect()
    }

    fn trace_transaction(&self, agent: usize, contacts: &[AuditContact], tick: u64) -> Result<Transaction, SimError> {
        let payload =
            TracePayload { contacts: contacts.iter().map(|c| TraceContact { peer: c.peer, tick: c.tick }).collect() };
        Ok(Transaction::new_signed(&self.identities[agent], TxKind::Trace, payload.encode(), tick)?)
    }

    /// A diagnosed agent asks to join the pool of infected users, an
    /// authorized node records it and raises an alarm, and the agent
    /// publishes its immediate contacts.
    fn report_diagnosis(&mut self, agent: usize, tick: u64) -> Result<(), SimError> {
        self.world.agents[agent].infection = InfectionState::Notified;
        let node = self.world.agents[agent].id;
        self.iup.record(node, tick);
        let contacts = self.trace_contacts(agent, tick);
        let request = Transaction::new_signed(&self.identities[agent], TxKind::Request, Vec::new(), tick)?;
        let trace = self.trace_transaction(agent, &contacts, tick)?;
        let alarm = Transaction::new_signed(&self.authorities[0], TxKind::Alarm, node.0.to_vec(), tick)?;
        self.submit(request);
        self.submit(trace);
        self.submit(alarm);
        self.audit.push(TraceAudit {
            tick,
            agent,
            node_id: node,
            diagnosed_tick: self.iup.diagnosis_tick(&node),
            accepted: true,
            contacts,
        });
        Ok(())
    }

    fn event(&mut self, tick: u64, agent: usize, kind: SecurityEventKind, rejection: Option<Rejection>) {
        let node_id = self.world.agents[agent].id;
        self.events.push(SecurityEvent { tick, agent, node_id, kind, rejection });
    }

    #[allow(clippy::needless_range_loop)]
    fn apply_behaviors(&mut self, tick: u64, immediate_now: &[bool]) -> Result<(), SimError> {
        for i in core::mem::take(&mut self.attack_pending) {
            self.mine_as_attacker(i, tick)?;
        }
        for i in 0..self.config.n_agents {
            match self.world.agents[i].behavior {
                Behavior::Honest => {}
                Behavior::FalseClaimer if tick == self.config.false_claim_tick => self.false_claim(i, tick)?,
                Behavior::Attacker if tick == self.config.attack_tick => self.forge_block(i, tick)?,
                Behavior::DistanceViolator => {
                    let agent = &self.world.agents[i];
                    let cooled = self.last_violation[i].is_none_or(|t| tick - t >= self.config.violation_cooldown);
                    if agent.infection == InfectionState::Notified && immediate_now[i] && cooled {
                        self.credits[i].record_penalty(PenaltyKind::ContactViolation, tick);
                        self.last_violation[i] = Some(tick);
                        self.event(tick, i, SecurityEventKind::ContactViolation, None);
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Authorized validators accept a trace only from a node in the pool of
    /// infected users and punish any other claimant.
    fn false_claim(&mut self, agent: usize, tick: u64) -> Result<(), SimError> {
        let node = self.world.agents[agent].id;
        let contacts = self.trace_contacts(agent, tick);
        let diagnosed_tick = self.iup.diagnosis_tick(&node);
        let accepted = diagnosed_tick.is_some();
        if accepted {
            let trace = self.trace_transaction(agent, &contacts, tick)?;
            self.submit(trace);
        } else {
            self.credits[agent].record_penalty(PenaltyKind::FalseClaim, tick);
            self.event(tick, agent, SecurityEventKind::FalseClaimRejected, None);
        }
        self.audit.push(TraceAudit { tick, agent, node_id: node, diagnosed_tick, accepted, contacts });
        Ok(())
    }

    fn pending_transactions(&self, limit: usize) -> Vec<Transaction> {
        let mut size = 0;
        let mut out = Vec::new();
        for tx in self.pool.iter().take(limit) {
            size += tx.encoded_len();
            if size > MAX_BLOCK_BYTES as usize - BLOCK_HEADROOM && !out.is_empty() {
                break;
            }
            out.push(tx.clone());
        }
        out
    }

    fn draw_window(&mut self) -> Result<u8, SimError> {
        let draw = self.rng.mining.gen_range(0..=u64::from(MAX_WHASH_WINDOW));
        Ok(whash_window_for(self.chain.len() as u64, draw)?)
    }

    /// The attacker mines a well-formed block, then rewrites its timestamp
    /// before broadcasting it. Validators reject the block and punish the
    /// miner; the attacker retries with an honest block on the next tick.
    fn forge_block(&mut self, agent: usize, tick: u64) -> Result<(), SimError> {
        let node = self.world.agents[agent].id;
        let window = self.draw_window()?;
        let txs = self.pending_transactions(self.block_target);
        let template = self.chain.next_template(window, txs, node, tick);
        let mut forged = mine(self.chain.blocks(), template, DifficultyLevel::Easy, 0, None)?.block;
        forged.timestamp += 1;
        let view = CreditView { index: &self.index, states: &self.credits, policy: &self.config.policy, now: tick + 1 };
        let ent = Entitlement { registry: Some(&self.registry), credits: &view, alpha_d: self.config.policy.alpha_d };
        match consensus::validate_block(self.chain.blocks(), &forged, DifficultyLevel::Easy, Some(&ent)) {
            Ok(()) => Err(SimError::ForgeryAccepted(tick)),
            Err(rejection) => {
                self.credits[agent].record_penalty(PenaltyKind::NetworkAttack, tick);
                self.event(tick, agent, SecurityEventKind::ForgedBlockRejected, Some(rejection));
                self.attack_pending.push(agent);
                Ok(())
            }
        }
    }

    /// A properly mined easy-level block from a punished attacker.
    fn mine_as_attacker(&mut self, agent: usize, tick: u64) -> Result<(), SimError> {
        let node = self.world.agents[agent].id;
        let window = self.draw_window()?;
        let txs = self.pending_transactions(self.block_target);
        let template = self.chain.next_template(window, txs, node, tick);
        let block = mine(self.chain.blocks(), template, DifficultyLevel::Easy, 0, None)?.block;
        let view = CreditView { index: &self.index, states: &self.credits, policy: &self.config.policy, now: tick + 1 };
        let ent = Entitlement { registry: Some(&self.registry), credits: &view, alpha_d: self.config.policy.alpha_d };
        let verdict = consensus::validate_block(self.chain.blocks(), &block, DifficultyLevel::Easy, Some(&ent));
        match verdict {
            Ok(()) => {
                // Credit recovered: the block is legitimate.
                self.chain.append_at_level(block, DifficultyLevel::Easy, Some(&ent)).map_err(SimError::Rejected)?;
                self.pool.drain(..self.pool.len().min(self.chain.tip().transactions.len()));
            }
            Err(rejection) => self.event(tick, agent, SecurityEventKind::EntitlementRejected, Some(rejection)),
        }
        Ok(())
    }

    fn background_traffic(&mut self, tick: u64) -> Result<(), SimError> {
        let rate =
            f64::from(self.config.n_blocks) * f64::from(self.config.tx_per_block_mean) / self.config.ticks as f64;
        let count =
            if rate > 0.0 { Poisson::new(rate).map(|p| p.sample(&mut self.rng.traffic)).unwrap_or(0.0) } else { 0.0 };
        for _ in 0..count as u64 {
            let sender = self.rng.traffic.gen_range(0..self.config.n_agents);
            let (kind, len) =
                if self.rng.traffic.gen_bool(0.7) { (TxKind::Submission, 48) } else { (TxKind::Query, 32) };
            let mut payload = vec![0u8; len];
            self.rng.traffic.fill(&mut payload[..]);
            let tx = Transaction::new_signed(&self.identities[sender], kind, payload, tick)?;
            self.submit(tx);
        }
        Ok(())
    }

    /// Authorized nodes plus the top credit share of light nodes.
    fn miner_set(&self, now: u64) -> Result<Vec<NodeId>, SimError> {
        let policy = &self.config.policy;
        let mut ranked = Vec::with_capacity(self.credits.len());
        for (i, s) in self.credits.iter().enumerate() {
            ranked.push((s.total_credit(now, policy)?, i));
        }
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let take = libm::ceil(self.config.miner_fraction * self.credits.len() as f64) as usize;
        let mut miners: Vec<NodeId> = self.authorities.iter().map(NodeIdentity::node_id).collect();
        miners.extend(ranked.iter().take(take).map(|&(_, i)| self.world.agents[i].id));
        Ok(miners)
    }

    fn mine_next_block(&mut self, tick: u64) -> Result<(), SimError> {
        let now = tick + 1;
        let miners = self.miner_set(now)?;
        let miner = miners[self.rng.mining.gen_range(0..miners.len())];
        let window = self.draw_window()?;
        let nonce_start = u64::from(self.rng.mining.gen::<u32>());
        let txs = self.pending_transactions(self.block_target);
        let n_txs = txs.len();
        let template = self.chain.next_template(window, txs, miner, tick);
        let view = CreditView { index: &self.index, states: &self.credits, policy: &self.config.policy, now };
        let ent = Entitlement { registry: Some(&self.registry), credits: &view, alpha_d: self.config.policy.alpha_d };
        let level = ent.level_for(&miner);
        let outcome = mine(self.chain.blocks(), template, level, nonce_start, None)?;
        self.chain.append_block(outcome.block, &ent).map_err(SimError::Rejected)?;
        self.pool.drain(..n_txs);
        Ok(())
    }

    fn record_tick(&mut self, tick: u64) -> Result<(), SimError> {
        let count_at = |r: f64| self.layers.iter().find(|l| l.radius == r).map_or(0, |l| l.count);
        self.metrics.push(MetricsRow {
            tick,
            infected_count_2m: count_at(REPORTED_RADII[0]),
            infected_count_5m: count_at(REPORTED_RADII[1]),
            tx_count: self.tx_this_tick,
            blocks_mined: self.chain.len() - 1,
        });
        let now = tick + 1;
        let policy = self.config.policy;
        for &agent in &self.config.tracked_agents {
            let s = &self.credits[agent];
            let neg = s.negative_credit(now, &policy)?;
            let total = s.prox_credit + neg;
            self.credit_rows.push(CreditRow {
                tick,
                agent,
                node_id: s.node,
                prox_credit: s.prox_credit,
                neg_credit: neg,
                total_credit: total,
                level: difficulty_for(total, policy.alpha_d, false),
            });
        }
        Ok(())
    }

    pub fn finish(self) -> SimOutput {
        let now = self.world.tick + 1;
        let final_credits = self
            .credits
            .iter()
            .map(|s| s.total_credit(now, &self.config.policy).unwrap_or(f64::NEG_INFINITY))
            .collect();
        SimOutput {
            metrics: self.metrics,
            credits: self.credit_rows,
            contacts: self.audit,
            events: self.events,
            interactions: self.interactions,
            chain: self.chain,
            iup: self.iup,
            registry: self.registry,
            manager: self.manager.to_public(),
            agent_ids: self.world.agents.iter().map(|a| a.id).collect(),
            behaviors: self.world.agents.iter().map(|a| a.behavior).collect(),
            final_credits,
            config: self.config,
        }
    }
}

fn draw_block_target<R: Rng + ?Sized>(mean: u32, rng: &mut R) -> usize {
    let draw: f64 = Poisson::new(f64::from(mean)).map(|p| p.sample(rng)).unwrap_or(f64::from(mean));
    (draw as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::verify_chain;
    use crate::simulation::check_trace_consistency;

    fn small() -> SimConfig {
        SimConfig {
            n_agents: 80,
            ticks: 120,
            n_blocks: 6,
            tx_per_block_mean: 20,
            p_diagnosis: 0.01,
            attack_tick: 60,
            false_claim_tick: 30,
            behaviors: vec![
                BehaviorAssignment { agent: 0, behavior: Behavior::FalseClaimer },
                BehaviorAssignment { agent: 50, behavior: Behavior::Attacker },
                BehaviorAssignment { agent: 10, behavior: Behavior::DistanceViolator },
            ],
            tracked_agents: vec![0, 10, 50, 79],
            ..SimConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        assert!(SimConfig { n_agents: 1, tracked_agents: vec![], behaviors: vec![], patient_zero: None, ..small() }
            .validate()
            .is_err());
        assert!(SimConfig { infection_radius: 0.0, ..small() }.validate().is_err());
        assert!(SimConfig { patient_zero: Some(80), ..small() }.validate().is_err());
        assert!(SimConfig { initial_positions: Some(vec![[0.0, 0.0]]), ..small() }.validate().is_err());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let a = Simulation::run(small()).unwrap();
        let b = Simulation::run(small()).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.credits, b.credits);
        assert_eq!(a.contacts, b.contacts);
        assert_eq!(a.chain, b.chain);
        let c = Simulation::run(SimConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.metrics, c.metrics);
    }

    #[test]
    fn infection_counts_are_conserved_and_monotone() {
        let mut sim = Simulation::new(SimConfig { p_inf: 0.01, ..small() }).unwrap();
        let mut prev = (0, 0);
        for _ in 0..120 {
            sim.run_epoch().unwrap();
            let agents = &sim.world().agents;
            let infected = agents.iter().filter(|a| a.infection.is_infected()).count();
            let susceptible = agents.iter().filter(|a| a.infection == InfectionState::Susceptible).count();
            assert_eq!(infected + susceptible, 80);
            assert_eq!(Some(infected), sim.infected_at(2.0));
            let now = (sim.infected_at(2.0).unwrap(), sim.infected_at(5.0).unwrap());
            assert!(now.0 <= now.1, "{now:?}");
            assert!(now.0 >= prev.0 && now.1 >= prev.1);
            prev = now;
        }
    }

    #[test]
    fn larger_radius_dominates_at_every_tick() {
        for seed in 0..5 {
            let out = Simulation::run(SimConfig { seed, p_inf: 1.0, ..small() }).unwrap();
            assert!(out.metrics.iter().all(|m| m.infected_count_5m >= m.infected_count_2m));
        }
    }

    #[test]
    fn no_infection_without_transmission_or_seed_case() {
        let out = Simulation::run(SimConfig { p_inf: 0.0, ..small() }).unwrap();
        assert!(out.metrics.iter().all(|m| m.infected_count_2m == 1 && m.infected_count_5m == 1));

        let out = Simulation::run(SimConfig { patient_zero: None, ..small() }).unwrap();
        assert!(out.metrics.iter().all(|m| m.infected_count_2m == 0));
        let kinds: Vec<TxKind> =
            out.chain.blocks().iter().flat_map(|b| b.transactions.iter().map(|t| t.kind)).collect();
        assert!(!kinds.contains(&TxKind::Trace));
        assert!(kinds.iter().all(|k| matches!(k, TxKind::Submission | TxKind::Query | TxKind::Registry)));
        assert!(kinds.contains(&TxKind::Submission));
    }

    #[test]
    fn false_claim_is_punished() {
        let out = Simulation::run(small()).unwrap();
        let ev = out.events.iter().find(|e| e.kind == SecurityEventKind::FalseClaimRejected).unwrap();
        assert_eq!((ev.agent, ev.tick), (0, 30));
        let claim = out.contacts.iter().find(|a| a.agent == 0 && a.tick == 30).unwrap();
        assert!(!claim.accepted);
        let after = out.credits.iter().find(|r| r.agent == 0 && r.tick == 30).unwrap();
        assert!((after.neg_credit + out.config.policy.omega_fc).abs() < 1e-9);
    }

    #[test]
    fn attack_drops_credit_and_blocks_easy_mining() {
        let out = Simulation::run(small()).unwrap();
        let alpha = out.config.policy.alpha_d;
        let forged = out.events.iter().find(|e| e.kind == SecurityEventKind::ForgedBlockRejected).unwrap();
        assert_eq!((forged.agent, forged.tick), (50, 60));
        let row = out.credits.iter().find(|r| r.agent == 50 && r.tick == 60).unwrap();
        assert!(row.total_credit < alpha);
        assert_eq!(row.level, DifficultyLevel::Hard);
        let before = out.credits.iter().find(|r| r.agent == 50 && r.tick == 59).unwrap();
        assert!(before.total_credit - row.total_credit > 0.9 * out.config.policy.omega_na);
        let retry = out.events.iter().find(|e| e.kind == SecurityEventKind::EntitlementRejected).unwrap();
        assert_eq!(retry.tick, 61);
        assert!(matches!(retry.rejection, Some(Rejection::Entitlement { entitled: DifficultyLevel::Hard, .. })));
        assert!(out.chain.blocks().iter().all(|b| b.miner != out.agent_ids[50] || b.timestamp < 60));
    }

    #[test]
    fn persisted_chain_is_valid_and_consistent() {
        let out = Simulation::run(small()).unwrap();
        assert!(out.chain.len() > 3);
        assert!(verify_chain(out.chain.blocks()).is_valid());
        let registry_tx = &out.chain.blocks()[1].transactions[0];
        assert_eq!(registry_tx.kind, TxKind::Registry);
        let p = &out.config.policy;
        assert!(out.contacts.iter().any(|a| a.accepted));
        assert!(check_trace_consistency(
            out.chain.blocks(),
            &out.contacts,
            p.immediate_threshold,
            out.config.retention_ticks()
        )
        .is_empty());
    }

    #[test]
    fn contact_log_respects_retention() {
        let cfg = SimConfig { day_ticks: 5, retention_days: 2, ..small() };
        let mut sim = Simulation::new(cfg).unwrap();
        for _ in 0..60 {
            sim.run_epoch().unwrap();
            let now = sim.tick();
            if let Some(oldest) = sim.contact_log().oldest_tick() {
                assert!(now - oldest <= 10, "tick {now}: entry from {oldest}");
            }
        }
    }

    #[test]
    fn interaction_statistics() {
        assert_eq!(interaction_stats(&InteractionLog::default()), Err(SimError::EmptyMetrics));

        let isolated = SimConfig {
            n_agents: 2,
            step_std: 0.0,
            initial_positions: Some(vec![[0.0, 0.0], [10.0, 10.0]]),
            behaviors: vec![],
            tracked_agents: vec![],
            patient_zero: None,
            ticks: 20,
            ..small()
        };
        let s = interaction_stats(&Simulation::run(isolated).unwrap().interactions).unwrap();
        assert_eq!((s.avg_interactions, s.avg_gained_credit), (0.0, 0.0));

        let base = SimConfig { n_blocks: 0, ticks: 60, ..small() };
        let exact = interaction_stats(&Simulation::run(base.clone()).unwrap().interactions).unwrap();
        let noisy_cfg = SimConfig { distance_noise_std: 0.5, ..base.clone() };
        let noisy = interaction_stats(&Simulation::run(noisy_cfg).unwrap().interactions).unwrap();
        assert_eq!(exact.avg_interactions, noisy.avg_interactions);
        assert!(exact.avg_gained_credit >= noisy.avg_gained_credit);

        let dense_cfg = SimConfig { n_agents: 160, ..base };
        let dense = interaction_stats(&Simulation::run(dense_cfg).unwrap().interactions).unwrap();
        assert!(dense.avg_interactions > exact.avg_interactions);
    }
}
