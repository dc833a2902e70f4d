//! Mining benchmark, multi-threaded nonce search and the hash-window attack
//! experiment.

use std::sync::atomic::AtomicU64;
use std::sync::atomic::Ordering;
use std::thread;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use serde::{Deserialize, Serialize};
use tbict_core::consensus::{self, attack_cost_model, search_partition, DifficultyLevel, MiningError, MiningOutcome};
use tbict_core::identity::{NodeIdentity, Role};
use tbict_core::ledger::{Block, BlockTemplate, Chain, Transaction, TxKind, WindowHasher};

use crate::error::{Error, Result};
use crate::spec::ExperimentSpec;

const PAYLOAD_STREAM: u64 = 8;
const KEY_STREAM: u64 = 9;
const ATTACK_STREAM: u64 = 10;

/// Resolves a worker count of 0 to the available parallelism.
pub fn resolve_workers(workers: usize) -> usize {
    if workers > 0 {
        workers
    } else {
        thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

/// Nonce search from 0 split across `workers` threads.
///
/// The result is the smallest satisfying nonce, the same block a sequential
/// search returns, and `trials` is the sequential count `nonce + 1`.
pub fn mine_block(
    history: &[Block],
    candidate: BlockTemplate,
    level: DifficultyLevel,
    max_trials: Option<u64>,
    workers: usize,
) -> std::result::Result<MiningOutcome, MiningError> {
    if workers <= 1 {
        return consensus::mine(history, candidate, level, 0, max_trials);
    }
    let hasher = WindowHasher::new(history, &candidate)?;
    let end = max_trials.unwrap_or(u64::MAX);
    let best = AtomicU64::new(u64::MAX);
    thread::scope(|s| {
        for k in 0..workers as u64 {
            let (hasher, best) = (&hasher, &best);
            s.spawn(move || search_partition(hasher, level, k, workers as u64, end, best));
        }
    });
    let nonce = best.load(Ordering::Relaxed);
    if nonce == u64::MAX {
        return Err(MiningError::Timeout { trials: end });
    }
    let digest = hasher.digest(nonce);
    Ok(MiningOutcome { block: candidate.seal(nonce, digest), nonce, trials: nonce + 1 })
}

/// Deterministic signed filler traffic and a miner identity.
pub struct BlockFactory {
    pub miner: NodeIdentity,
    sender: NodeIdentity,
    rng: ChaCha8Rng,
    txs_per_block: usize,
}

impl BlockFactory {
    pub fn new(seed: u64, txs_per_block: usize) -> Self {
        let mut keys = ChaCha20Rng::seed_from_u64(seed);
        keys.set_stream(KEY_STREAM);
        let miner = NodeIdentity::generate(Role::Authorized, &mut keys);
        let sender = NodeIdentity::generate(Role::Light, &mut keys);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(PAYLOAD_STREAM);
        BlockFactory { miner, sender, rng, txs_per_block }
    }

    /// Template for the next block of `chain` carrying fresh submissions.
    pub fn template(&mut self, chain: &Chain, window: u8, timestamp: u64) -> BlockTemplate {
        let txs = (0..self.txs_per_block)
            .map(|_| {
                let mut payload = vec![0u8; 48];
                self.rng.fill_bytes(&mut payload);
                Transaction::new_signed(&self.sender, TxKind::Submission, payload, timestamp)
                    .expect("light identity holds a signing key")
            })
            .collect();
        chain.next_template(window, txs, self.miner.node_id(), timestamp)
    }

    /// Extends `chain` by `n` easy blocks with windows from `window_of(index)`.
    pub fn extend(&mut self, chain: &mut Chain, n: usize, mut window_of: impl FnMut(u64) -> u8) {
        for _ in 0..n {
            let index = chain.len() as u64;
            let template = self.template(chain, window_of(index), index);
            let outcome = consensus::mine(chain.blocks(), template, DifficultyLevel::Easy, 0, None)
                .expect("easy search without a cap terminates");
            chain
                .append_at_level(outcome.block, DifficultyLevel::Easy, None)
                .expect("freshly mined block extends the chain");
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningRow {
    pub whash: u8,
    pub level: DifficultyLevel,
    pub block_index: u64,
    pub trials: u64,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub whash: u8,
    pub level: DifficultyLevel,
    pub block_index: u64,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub whash: u8,
    pub level: DifficultyLevel,
    pub blocks: usize,
    pub truncated: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchOutput {
    pub rows: Vec<MiningRow>,
    pub timings: Vec<TimingRow>,
    /// Trial statistics per cell, excluding truncated blocks.
    pub summary: Vec<CellSummary>,
    /// Wall-clock statistics per cell, excluding truncated blocks.
    pub timing_summary: Vec<CellSummary>,
}

impl BenchOutput {
    pub fn cell(&self, whash: u8, level: DifficultyLevel) -> Option<&CellSummary> {
        self.summary.iter().find(|c| c.whash == whash && c.level == level)
    }
}

fn summarize(whash: u8, level: DifficultyLevel, values: &[f64], truncated: usize) -> CellSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => sorted[n / 2],
        _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    };
    CellSummary {
        whash,
        level,
        blocks: n,
        truncated,
        min: sorted.first().copied().unwrap_or(f64::NAN),
        max: sorted.last().copied().unwrap_or(f64::NAN),
        mean: if n == 0 { f64::NAN } else { sorted.iter().sum::<f64>() / n as f64 },
        median,
    }
}

/// Mines `spec.sim.n_blocks` blocks for every (window, level) cell.
///
/// Every cell starts from the same base chain of easy blocks so that all
/// windows have full history. Blocks that hit the trial cap are reported as
/// truncated and retried with a new timestamp.
pub fn run_mining_benchmark(spec: &ExperimentSpec) -> Result<BenchOutput> {
    let cfg = &spec.bench;
    let workers = resolve_workers(cfg.workers);
    let mut factory = BlockFactory::new(spec.sim.seed, cfg.txs_per_block);
    let mut base = Chain::new();
    factory.extend(&mut base, cfg.base_blocks as usize, |_| 0);

    let mut out = BenchOutput::default();
    for &whash in &spec.whash_values {
        for &level in &spec.levels {
            let mut chain = base.clone();
            let (mut trials, mut elapsed, mut truncated) = (Vec::new(), Vec::new(), 0);
            let mut attempt = 0u64;
            while chain.len() < base.len() + spec.sim.n_blocks as usize {
                attempt += 1;
                let template = factory.template(&chain, whash, attempt);
                let index = template.index;
                let start = Instant::now();
                let result = mine_block(chain.blocks(), template, level, cfg.max_trials, workers);
                let secs = start.elapsed().as_secs_f64();
                let (row_trials, cut) = match result {
                    Ok(outcome) => {
                        let t = outcome.trials;
                        chain
                            .append_at_level(outcome.block, level, None)
                            .map_err(|r| Error::Validation(format!("benchmark block {index}: {r}")))?;
                        trials.push(t as f64);
                        elapsed.push(secs);
                        (t, false)
                    }
                    Err(MiningError::Timeout { trials }) => {
                        truncated += 1;
                        (trials, true)
                    }
                    Err(MiningError::Ledger(e)) => return Err(Error::Config(format!("window {whash}: {e}"))),
                };
                out.rows.push(MiningRow { whash, level, block_index: index, trials: row_trials, truncated: cut });
                out.timings.push(TimingRow { whash, level, block_index: index, elapsed_s: secs });
            }
            out.summary.push(summarize(whash, level, &trials, truncated));
            out.timing_summary.push(summarize(whash, level, &elapsed, truncated));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowAttackRow {
    pub n_wh: u8,
    pub bits: u32,
    pub reps: usize,
    /// Mean block-hash evaluations of a miner who knows the window.
    pub honest_ops: f64,
    /// Mean block-hash evaluations of a miner who tries windows `1..=n_wh`.
    pub attacker_ops: f64,
    pub model_honest_ops: f64,
    pub model_attacker_ops: f64,
}

impl WindowAttackRow {
    pub fn measured_ratio(&self) -> f64 {
        self.attacker_ops / self.honest_ops
    }

    pub fn model_ratio(&self) -> f64 {
        self.model_attacker_ops / self.model_honest_ops
    }
}

/// Re-mines the next block of a `chain_len`-block chain at the easy level.
///
/// The honest miner searches once with the true window. The attacker does not
/// know it and runs a full search for every window from 1 up to the true one.
/// Work is counted in block hashes: a trial under window `w` hashes `w`
/// blocks.
pub fn window_attack_experiment(
    n_values: &[u8],
    chain_len: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<WindowAttackRow>> {
    let level = DifficultyLevel::Easy;
    let mut factory = BlockFactory::new(seed, 1);
    let mut chain = Chain::new();
    factory.extend(&mut chain, chain_len.saturating_sub(1), |_| 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ATTACK_STREAM);

    let search = |template: BlockTemplate, nonce_start: u64| -> Result<u64> {
        consensus::mine(chain.blocks(), template, level, nonce_start, None)
            .map(|o| o.trials)
            .map_err(|e| Error::Config(e.to_string()))
    };
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let (mut honest, mut attacker) = (0.0, 0.0);
        for rep in 0..reps {
            let timestamp = 1_000_000 + rep as u64;
            let base = factory.template(&chain, n, timestamp);
            honest += f64::from(n.max(1)) * search(base.clone(), rng.gen())? as f64;
            for w in 1..=n.max(1) {
                let guess = BlockTemplate { whash_window: w, ..base.clone() };
                attacker += f64::from(w) * search(guess, rng.gen())? as f64;
            }
        }
        let model = attack_cost_model(u32::from(n), level.bits());
        rows.push(WindowAttackRow {
            n_wh: n,
            bits: level.bits(),
            reps,
            honest_ops: honest / reps as f64,
            attacker_ops: attacker / reps as f64,
            model_honest_ops: model.honest_ops,
            model_attacker_ops: model.attacker_ops,
        });
    }
    Ok(rows)
}
