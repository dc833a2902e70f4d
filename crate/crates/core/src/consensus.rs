//! Credit-gated dynamic proof of work.
//!
//! Two fixed difficulty levels exist. [`DifficultyLevel::Easy`] needs one
//! leading zero hex digit in the W-Hash digest and is granted to authorized
//! nodes and to nodes whose credit is at least `alpha_d`; everyone else mines
//! at [`DifficultyLevel::Hard`], four leading zero digits.

use alloc::vec::Vec;
use core::fmt;
#[cfg(target_has_atomic = "64")]
use core::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::credit::CreditLookup;
use crate::encoding::Digest;
use crate::identity::{AuthorizedRegistry, NodeId};
use crate::ledger::{self, Block, BlockTemplate, LedgerError, WindowHasher, MAX_BLOCK_BYTES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DifficultyLevel {
    #[serde(rename = "DL_e")]
    Easy,
    #[serde(rename = "DL_h")]
    Hard,
}

impl DifficultyLevel {
    pub const ALL: [DifficultyLevel; 2] = [DifficultyLevel::Easy, DifficultyLevel::Hard];

    pub fn name(self) -> &'static str {
        match self {
            DifficultyLevel::Easy => "DL_e",
            DifficultyLevel::Hard => "DL_h",
        }
    }

    pub fn prefix_nibbles(self) -> u32 {
        match self {
            DifficultyLevel::Easy => 1,
            DifficultyLevel::Hard => 4,
        }
    }

    /// Size in bits of the zero prefix (`b`).
    pub fn bits(self) -> u32 {
        4 * self.prefix_nibbles()
    }

    pub fn accepts(self, digest: &Digest) -> bool {
        digest.leading_zero_nibbles() >= self.prefix_nibbles()
    }

    /// Per-trial success probability, `16^-prefix`.
    pub fn success_probability(self) -> f64 {
        libm::pow(16.0, -f64::from(self.prefix_nibbles()))
    }
}

impl fmt::Display for DifficultyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for DifficultyLevel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "DL_e" | "easy" | "e" => Ok(DifficultyLevel::Easy),
            "DL_h" | "hard" | "h" => Ok(DifficultyLevel::Hard),
            _ => Err(()),
        }
    }
}

/// Easy level for authorized nodes and for credit at or above `alpha_d`.
pub fn difficulty_for(credit: f64, alpha_d: f64, is_authorized: bool) -> DifficultyLevel {
    if is_authorized || credit >= alpha_d {
        DifficultyLevel::Easy
    } else {
        DifficultyLevel::Hard
    }
}

/// What a validator needs to decide a miner's level.
pub struct Entitlement<'a> {
    pub registry: Option<&'a AuthorizedRegistry>,
    pub credits: &'a dyn CreditLookup,
    pub alpha_d: f64,
}

impl Entitlement<'_> {
    pub fn is_authorized(&self, node: &NodeId) -> bool {
        self.registry.is_some_and(|r| r.contains(node))
    }

    pub fn level_for(&self, node: &NodeId) -> DifficultyLevel {
        difficulty_for(self.credits.credit_of(node), self.alpha_d, self.is_authorized(node))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MiningOutcome {
    pub block: Block,
    pub nonce: u64,
    /// Hash evaluations, `nonce - nonce_start + 1`.
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MiningError {
    #[error("no nonce found within {trials} trials")]
    Timeout { trials: u64 },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// Sequential nonce search from `nonce_start`.
pub fn mine(
    history: &[Block],
    candidate: BlockTemplate,
    level: DifficultyLevel,
    nonce_start: u64,
    max_trials: Option<u64>,
) -> Result<MiningOutcome, MiningError> {
    let hasher = WindowHasher::new(history, &candidate)?;
    let limit = max_trials.unwrap_or(u64::MAX);
    let mut nonce = nonce_start;
    let mut trials = 0u64;
    while trials < limit {
        trials += 1;
        let digest = hasher.digest(nonce);
        if level.accepts(&digest) {
            return Ok(MiningOutcome { block: candidate.seal(nonce, digest), nonce, trials });
        }
        nonce = nonce.wrapping_add(1);
    }
    Err(MiningError::Timeout { trials })
}

/// One worker of a partitioned search.
///
/// Worker `k` of `n` calls this with `start = nonce_start + k` and
/// `stride = n`. `best` is shared by all workers and starts at `u64::MAX`;
/// a worker stops as soon as its next nonce exceeds the best hit so far, so
/// the final value of `best` is the smallest satisfying nonce in the searched
/// range, exactly what a sequential search returns. `end` bounds the search
/// (exclusive). Returns the number of hashes this worker evaluated.
#[cfg(target_has_atomic = "64")]
pub fn search_partition(
    hasher: &WindowHasher,
    level: DifficultyLevel,
    start: u64,
    stride: u64,
    end: u64,
    best: &AtomicU64,
) -> u64 {
    assert!(stride > 0, "stride must be positive");
    let mut nonce = start;
    let mut evaluated = 0;
    while nonce < end && nonce < best.load(Ordering::Relaxed) {
        evaluated += 1;
        if level.accepts(&hasher.digest(nonce)) {
            best.fetch_min(nonce, Ordering::Relaxed);
            break;
        }
        match nonce.checked_add(stride) {
            Some(n) => nonce = n,
            None => break,
        }
    }
    evaluated
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum Rejection {
    #[error("expected block index {expected}, found {found}")]
    BadIndex { expected: u64, found: u64 },
    #[error("prev_hash does not link to the current tip")]
    StalePrevHash,
    #[error("encoded block is {size} bytes, above the bound")]
    Oversize { size: u64 },
    #[error("W-Hash window {window} is invalid for this height")]
    BadWindow { window: u8 },
    #[error("stored block hash does not match the recomputed W-Hash digest")]
    HashMismatch,
    #[error("digest does not meet the {level} prefix")]
    InsufficientDifficulty { level: DifficultyLevel },
    #[error("transaction {tx} has an invalid signature or payload")]
    BadSignature { tx: usize },
    #[error("miner is entitled to {entitled} but presented a {claimed} block")]
    Entitlement { entitled: DifficultyLevel, claimed: DifficultyLevel },
    #[error("block 0 is not the canonical genesis block")]
    BadGenesis,
}

/// Checks `block` as the successor of `history`.
///
/// Clauses are checked in a fixed order and the first failure is reported:
/// linkage, size, window, digest, difficulty prefix, signatures, then miner
/// entitlement (skipped when `entitlement` is `None`).
pub fn validate_block(
    history: &[Block],
    block: &Block,
    expected_level: DifficultyLevel,
    entitlement: Option<&Entitlement<'_>>,
) -> Result<(), Rejection> {
    let expected_index = history.len() as u64;
    if block.index != expected_index {
        return Err(Rejection::BadIndex { expected: expected_index, found: block.index });
    }
    let tip_hash = history.last().map(|b| b.block_hash).unwrap_or(Digest::ZERO);
    if block.prev_hash != tip_hash {
        return Err(Rejection::StalePrevHash);
    }
    let size = block.encoded_len() as u64;
    if size > MAX_BLOCK_BYTES {
        return Err(Rejection::Oversize { size });
    }
    let digest = match ledger::recompute_block_hash(history, block) {
        Ok(d) => d,
        Err(_) => return Err(Rejection::BadWindow { window: block.whash_window }),
    };
    if digest != block.block_hash {
        return Err(Rejection::HashMismatch);
    }
    if !expected_level.accepts(&digest) {
        return Err(Rejection::InsufficientDifficulty { level: expected_level });
    }
    if let Some(tx) = block.transactions.iter().position(|t| !t.verify()) {
        return Err(Rejection::BadSignature { tx });
    }
    if let Some(ent) = entitlement {
        let entitled = ent.level_for(&block.miner);
        if entitled == DifficultyLevel::Hard && expected_level == DifficultyLevel::Easy {
            return Err(Rejection::Entitlement { entitled, claimed: expected_level });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockIssue {
    pub index: usize,
    pub rejection: Rejection,
}

/// Result of revalidating a persisted chain.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    pub blocks_checked: usize,
    pub issues: Vec<BlockIssue>,
}

impl ChainReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn issues_at(&self, index: usize) -> impl Iterator<Item = &Rejection> {
        self.issues.iter().filter(move |i| i.index == index).map(|i| &i.rejection)
    }
}

/// Revalidates every block against its own predecessors at the minimum
/// (easy) level, collecting every failure rather than stopping at the first.
/// Entitlement is not rechecked because credit history is not persisted.
pub fn verify_chain(blocks: &[Block]) -> ChainReport {
    let mut report = ChainReport { blocks_checked: blocks.len(), issues: Vec::new() };
    let Some(first) = blocks.first() else {
        return report;
    };
    if *first != Block::genesis() {
        report.issues.push(BlockIssue { index: 0, rejection: Rejection::BadGenesis });
    }
    for k in 1..blocks.len() {
        if let Err(rejection) = validate_block(&blocks[..k], &blocks[k], DifficultyLevel::Easy, None) {
            report.issues.push(BlockIssue { index: k, rejection });
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum DomainError {
    #[error("target hash must be positive, got {0}")]
    NonPositiveTarget(f64),
    #[error("hash rate must be positive, got {0}")]
    NonPositiveHashRate(f64),
}

/// `D = DL / TargetHash`, with `DL` taken as the level's size in bits and
/// `target_hash` as the numeric value of the threshold.
pub fn block_difficulty(level: DifficultyLevel, target_hash: f64) -> Result<f64, DomainError> {
    if !(target_hash > 0.0) {
        return Err(DomainError::NonPositiveTarget(target_hash));
    }
    Ok(f64::from(level.bits()) / target_hash)
}

/// Average seconds to mine a block: `D * 2^b / HashRate`.
pub fn expected_interval(difficulty: f64, bits: u32, hash_rate: f64) -> Result<f64, DomainError> {
    if !(hash_rate > 0.0) {
        return Err(DomainError::NonPositiveHashRate(hash_rate));
    }
    Ok(difficulty * libm::exp2(f64::from(bits)) / hash_rate)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackCost {
    pub honest_ops: f64,
    pub attacker_ops: f64,
}

impl AttackCost {
    pub fn ratio(&self) -> f64 {
        self.attacker_ops / self.honest_ops
    }
}

/// Work model in block-hash units. An honest miner who knows the window
/// hashes `n_wh` blocks per trial over a `2^b` search space; an attacker must
/// redo that search for each of the `n_wh` window positions. Windows 0 and 1
/// both hash a single block.
pub fn attack_cost_model(n_wh: u32, bits: u32) -> AttackCost {
    let n = f64::from(n_wh.max(1));
    let space = libm::exp2(f64::from(bits));
    AttackCost { honest_ops: n * space, attacker_ops: n * n * space }
}
