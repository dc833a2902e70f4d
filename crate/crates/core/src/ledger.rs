//! Transactions, blocks, the append-only chain and randomized hash-window
//! (W-Hash) digests.
//!
//! A block with window `n` is hashed together with its `n - 1` immediate
//! predecessors, newest first:
//!
//! ```text
//! H_c = sha256( enc(B_{c-1}) || ... || enc(B_{c-n+1}) || enc(candidate) || nonce_le )
//! ```
//!
//! Windows 0 and 1 hash the candidate alone, which is classical proof of work.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::consensus::{self, DifficultyLevel, Entitlement, Rejection};
use crate::encoding::{Decoder, Digest, Encoder};
use crate::identity::{IdentityError, NodeId, NodeIdentity, PublicKey, Signature};

/// Upper bound on an encoded block.
pub const MAX_BLOCK_BYTES: u64 = 1_048_576;
/// Largest W-Hash window.
pub const MAX_WHASH_WINDOW: u8 = 100;

const TX_DOMAIN: &[u8] = b"tbict/tx/v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("block of {size} bytes exceeds the {MAX_BLOCK_BYTES}-byte bound")]
    BlockOverflow { size: u64 },
    #[error("W-Hash window {0} outside [0, 100]")]
    WindowOutOfRange(u64),
    #[error("W-Hash window {window} needs {needed} predecessors but only {available} exist")]
    WindowExceedsHistory { window: u8, needed: usize, available: usize },
    #[error("malformed trace payload")]
    MalformedPayload,
    #[error(transparent)]
    Identity(#[from] IdentityError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TxKind {
    #[serde(rename = "ST")]
    Submission,
    #[serde(rename = "TT")]
    Trace,
    #[serde(rename = "QT")]
    Query,
    #[serde(rename = "RT")]
    Request,
    #[serde(rename = "AT")]
    Alarm,
    #[serde(rename = "RegistryTX")]
    Registry,
}

impl TxKind {
    pub fn code(self) -> u8 {
        match self {
            TxKind::Submission => 0,
            TxKind::Trace => 1,
            TxKind::Query => 2,
            TxKind::Request => 3,
            TxKind::Alarm => 4,
            TxKind::Registry => 5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TxKind::Submission => "ST",
            TxKind::Trace => "TT",
            TxKind::Query => "QT",
            TxKind::Request => "RT",
            TxKind::Alarm => "AT",
            TxKind::Registry => "RegistryTX",
        }
    }
}

impl fmt::Display for TxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One contact in a trace transaction: the peer's public id and the tick of
/// the last immediate-distance encounter. Nothing else is disclosed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TraceContact {
    pub peer: NodeId,
    pub tick: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracePayload {
    pub contacts: Vec<TraceContact>,
}

impl TracePayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(4 + self.contacts.len() * 40);
        enc.put_u32(self.contacts.len() as u32);
        for c in &self.contacts {
            enc.put_raw(&c.peer.0).put_u64(c.tick);
        }
        enc.finish()
    }

    /// Strict decode: exactly `count` (id, tick) pairs and nothing more.
    pub fn decode(bytes: &[u8]) -> Result<Self, LedgerError> {
        let bad = |_| LedgerError::MalformedPayload;
        let mut dec = Decoder::new(bytes);
        let n = dec.u32().map_err(bad)? as usize;
        let mut contacts = Vec::with_capacity(n.min(bytes.len() / 40));
        for _ in 0..n {
            let peer = NodeId(dec.array::<32>().map_err(bad)?);
            let tick = dec.u64().map_err(bad)?;
            contacts.push(TraceContact { peer, tick });
        }
        dec.finish().map_err(bad)?;
        Ok(TracePayload { contacts })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub kind: TxKind,
    pub sender: NodeId,
    pub sender_key: PublicKey,
    #[serde(with = "crate::hexser::bytes")]
    pub payload: Vec<u8>,
    pub timestamp: u64,
    pub signature: Signature,
}

impl Transaction {
    pub fn signing_bytes(kind: TxKind, sender: &NodeId, payload: &[u8], timestamp: u64) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(TX_DOMAIN.len() + 49 + payload.len());
        enc.put_bytes(TX_DOMAIN).put_u8(kind.code()).put_raw(&sender.0).put_bytes(payload).put_u64(timestamp);
        enc.finish()
    }

    pub fn new_signed(
        sender: &NodeIdentity,
        kind: TxKind,
        payload: Vec<u8>,
        timestamp: u64,
    ) -> Result<Self, IdentityError> {
        let sender_id = sender.node_id();
        let signature = sender.sign(&Self::signing_bytes(kind, &sender_id, &payload, timestamp))?;
        Ok(Transaction {
            kind,
            sender: sender_id,
            sender_key: sender.public_key().clone(),
            payload,
            timestamp,
            signature,
        })
    }

    /// Sender key matches the sender id and the signature verifies. Trace
    /// payloads must additionally decode as a pure id list, and registry
    /// payloads must carry a registry signed by the sender.
    pub fn verify(&self) -> bool {
        if self.sender_key.node_id() != self.sender {
            return false;
        }
        let msg = Self::signing_bytes(self.kind, &self.sender, &self.payload, self.timestamp);
        if !self.sender_key.verify(&msg, &self.signature) {
            return false;
        }
        match self.kind {
            TxKind::Trace => TracePayload::decode(&self.payload).is_ok(),
            TxKind::Registry => crate::identity::AuthorizedRegistry::decode(&self.payload)
                .and_then(|r| r.verify(&self.sender_key))
                .is_ok(),
            _ => true,
        }
    }

    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.put_u8(self.kind.code())
            .put_raw(&self.sender.0)
            .put_raw(self.sender_key.as_bytes())
            .put_bytes(&self.payload)
            .put_u64(self.timestamp)
            .put_raw(&self.signature.0);
    }

    pub fn encoded_len(&self) -> usize {
        1 + 32 + 33 + 4 + self.payload.len() + 8 + 64
    }
}

/// A block before its nonce is found.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockTemplate {
    pub index: u64,
    pub prev_hash: Digest,
    pub whash_window: u8,
    pub transactions: Vec<Transaction>,
    pub miner: NodeId,
    pub timestamp: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub index: u64,
    pub prev_hash: Digest,
    pub whash_window: u8,
    pub nonce: u64,
    pub transactions: Vec<Transaction>,
    pub miner: NodeId,
    pub timestamp: u64,
    pub block_hash: Digest,
}

#[allow(clippy::too_many_arguments)]
fn encode_candidate(
    enc: &mut Encoder,
    index: u64,
    prev_hash: &Digest,
    whash_window: u8,
    transactions: &[Transaction],
    miner: &NodeId,
    timestamp: u64,
) {
    enc.put_u64(index)
        .put_raw(&prev_hash.0)
        .put_u8(whash_window)
        .put_raw(&miner.0)
        .put_u64(timestamp)
        .put_u32(transactions.len() as u32);
    for tx in transactions {
        tx.encode_into(enc);
    }
}

// index, prev_hash, window, miner, timestamp, tx count
const CANDIDATE_FIXED_LEN: usize = 8 + 32 + 1 + 32 + 8 + 4;

impl BlockTemplate {
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(self.encoded_len());
        encode_candidate(
            &mut enc,
            self.index,
            &self.prev_hash,
            self.whash_window,
            &self.transactions,
            &self.miner,
            self.timestamp,
        );
        enc.finish()
    }

    pub fn encoded_len(&self) -> usize {
        CANDIDATE_FIXED_LEN + self.transactions.iter().map(Transaction::encoded_len).sum::<usize>()
    }

    pub fn seal(self, nonce: u64, block_hash: Digest) -> Block {
        Block {
            index: self.index,
            prev_hash: self.prev_hash,
            whash_window: self.whash_window,
            nonce,
            transactions: self.transactions,
            miner: self.miner,
            timestamp: self.timestamp,
            block_hash,
        }
    }
}

impl Block {
    /// Candidate encoding (everything except nonce and hash).
    pub fn encode_candidate(&self) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(self.encoded_len());
        self.encode_candidate_into(&mut enc);
        enc.finish()
    }

    fn encode_candidate_into(&self, enc: &mut Encoder) {
        encode_candidate(
            enc,
            self.index,
            &self.prev_hash,
            self.whash_window,
            &self.transactions,
            &self.miner,
            self.timestamp,
        );
    }

    /// Full canonical encoding, as concatenated into successors' windows.
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(self.encoded_len());
        self.encode_candidate_into(&mut enc);
        enc.put_u64(self.nonce).put_raw(&self.block_hash.0);
        enc.finish()
    }

    pub fn encoded_len(&self) -> usize {
        CANDIDATE_FIXED_LEN + self.transactions.iter().map(Transaction::encoded_len).sum::<usize>() + 8 + 32
    }

    pub fn to_template(&self) -> BlockTemplate {
        BlockTemplate {
            index: self.index,
            prev_hash: self.prev_hash,
            whash_window: self.whash_window,
            transactions: self.transactions.clone(),
            miner: self.miner,
            timestamp: self.timestamp,
        }
    }

    /// Fixed block 0: no transactions, window 0, nonce 0.
    pub fn genesis() -> Block {
        let template = BlockTemplate {
            index: 0,
            prev_hash: Digest::ZERO,
            whash_window: 0,
            transactions: Vec::new(),
            miner: NodeId::default(),
            timestamp: 0,
        };
        let hash = whash_digest(&[], &template, 0).expect("genesis window is empty");
        template.seal(0, hash)
    }
}

/// Variable block size: overhead plus per-item data and encryption bytes.
pub fn block_size(
    overhead_bytes: u64,
    data_bytes: u64,
    encryption_overhead_bytes: u64,
    n_data: u64,
) -> Result<u64, LedgerError> {
    let size = data_bytes
        .checked_add(encryption_overhead_bytes)
        .and_then(|per| per.checked_mul(n_data))
        .and_then(|body| body.checked_add(overhead_bytes))
        .unwrap_or(u64::MAX);
    if size > MAX_BLOCK_BYTES {
        return Err(LedgerError::BlockOverflow { size });
    }
    Ok(size)
}

/// Applies the bootstrap rule: a draw larger than the chain resets to 0.
pub fn whash_window_for(chain_length: u64, rng_draw: u64) -> Result<u8, LedgerError> {
    if rng_draw > u64::from(MAX_WHASH_WINDOW) {
        return Err(LedgerError::WindowOutOfRange(rng_draw));
    }
    Ok(if rng_draw <= chain_length { rng_draw as u8 } else { 0 })
}

/// Predecessors included in a window of size `window`.
pub fn window_predecessors(window: u8) -> usize {
    usize::from(window).saturating_sub(1)
}

fn check_window(history_len: usize, window: u8) -> Result<(), LedgerError> {
    if window > MAX_WHASH_WINDOW {
        return Err(LedgerError::WindowOutOfRange(u64::from(window)));
    }
    let needed = window_predecessors(window);
    if needed > history_len {
        return Err(LedgerError::WindowExceedsHistory { window, needed, available: history_len });
    }
    Ok(())
}

/// SHA-256 state with the window and candidate already absorbed; each nonce
/// trial clones the state and appends eight bytes.
#[derive(Clone)]
pub struct WindowHasher {
    prefix: Sha256,
}

impl WindowHasher {
    /// `history` holds every block before the candidate; the last element is
    /// `B_{c-1}`.
    pub fn new(history: &[Block], candidate: &BlockTemplate) -> Result<Self, LedgerError> {
        Self::from_parts(history, candidate.whash_window, &candidate.encode())
    }

    fn from_parts(history: &[Block], window: u8, candidate_bytes: &[u8]) -> Result<Self, LedgerError> {
        check_window(history.len(), window)?;
        let mut prefix = Sha256::new();
        let n = window_predecessors(window);
        for block in history.iter().rev().take(n) {
            prefix.update(block.encode());
        }
        prefix.update(candidate_bytes);
        Ok(Self { prefix })
    }

    pub fn digest(&self, nonce: u64) -> Digest {
        let mut h = self.prefix.clone();
        h.update(nonce.to_le_bytes());
        Digest(h.finalize().into())
    }
}

/// Digest of `candidate` sealed with `nonce` on top of `history`.
pub fn whash_digest(history: &[Block], candidate: &BlockTemplate, nonce: u64) -> Result<Digest, LedgerError> {
    Ok(WindowHasher::new(history, candidate)?.digest(nonce))
}

/// Recomputes a sealed block's digest against the blocks before it.
pub fn recompute_block_hash(history: &[Block], block: &Block) -> Result<Digest, LedgerError> {
    Ok(WindowHasher::from_parts(history, block.whash_window, &block.encode_candidate())?.digest(block.nonce))
}

/// Append-only chain rooted at [`Block::genesis`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chain {
    blocks: Vec<Block>,
}

impl Default for Chain {
    fn default() -> Self {
        Self::new()
    }
}

impl Chain {
    pub fn new() -> Self {
        Chain { blocks: alloc::vec![Block::genesis()] }
    }

    /// Wraps already-persisted blocks without validating them; see
    /// [`consensus::verify_chain`].
    pub fn from_blocks_unchecked(blocks: Vec<Block>) -> Self {
        Chain { blocks }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chain always holds genesis")
    }

    /// Template for the next block, linked to the current tip.
    pub fn next_template(
        &self,
        whash_window: u8,
        transactions: Vec<Transaction>,
        miner: NodeId,
        timestamp: u64,
    ) -> BlockTemplate {
        BlockTemplate {
            index: self.blocks.len() as u64,
            prev_hash: self.tip().block_hash,
            whash_window,
            transactions,
            miner,
            timestamp,
        }
    }

    /// Validates against the miner's entitled difficulty and appends.
    pub fn append_block(&mut self, block: Block, entitlement: &Entitlement<'_>) -> Result<(), Rejection> {
        let level = entitlement.level_for(&block.miner);
        self.append_at_level(block, level, Some(entitlement))
    }

    /// Validates at an explicit level and appends.
    pub fn append_at_level(
        &mut self,
        block: Block,
        level: DifficultyLevel,
        entitlement: Option<&Entitlement<'_>>,
    ) -> Result<(), Rejection> {
        consensus::validate_block(&self.blocks, &block, level, entitlement)?;
        self.blocks.push(block);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IupEntry {
    pub node_id: NodeId,
    pub tick: u64,
}

/// Infected Users Pool: diagnosed node ids with their diagnosis tick, as
/// replicated among authorized nodes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InfectedUsersPool {
    entries: BTreeMap<NodeId, u64>,
    retention_ticks: u64,
}

impl InfectedUsersPool {
    pub fn new(retention_ticks: u64) -> Self {
        Self { entries: BTreeMap::new(), retention_ticks }
    }

    pub fn retention_ticks(&self) -> u64 {
        self.retention_ticks
    }

    /// Records a diagnosis. An existing entry keeps its original tick.
    pub fn record(&mut self, node: NodeId, tick: u64) -> bool {
        if self.entries.contains_key(&node) {
            return false;
        }
        self.entries.insert(node, tick);
        true
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.entries.contains_key(node)
    }

    pub fn diagnosis_tick(&self, node: &NodeId) -> Option<u64> {
        self.entries.get(node).copied()
    }

    /// Drops entries older than the retention horizon; returns how many.
    pub fn prune(&mut self, now: u64) -> usize {
        let before = self.entries.len();
        let cutoff = now.saturating_sub(self.retention_ticks);
        self.entries.retain(|_, tick| *tick >= cutoff);
        before - self.entries.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries ordered by node id.
    pub fn entries(&self) -> Vec<IupEntry> {
        self.entries.iter().map(|(&node_id, &tick)| IupEntry { node_id, tick }).collect()
    }

    pub fn from_entries(retention_ticks: u64, entries: &[IupEntry]) -> Self {
        let mut pool = Self::new(retention_ticks);
        for e in entries {
            pool.record(e.node_id, e.tick);
        }
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::Role;
    use alloc::vec;

    fn tx(seed: u64, kind: TxKind, payload: &[u8], ts: u64) -> Transaction {
        Transaction::new_signed(&NodeIdentity::from_seed(Role::Light, seed), kind, payload.to_vec(), ts).unwrap()
    }

    #[test]
    fn block_size_examples() {
        assert_eq!(block_size(100, 0, 0, 0), Ok(100));
        assert_eq!(block_size(100, 50, 14, 200), Ok(12_900));
        assert_eq!(block_size(0, 0, 0, 0), Ok(0));
        assert_eq!(block_size(MAX_BLOCK_BYTES, 0, 0, 0), Ok(MAX_BLOCK_BYTES));
        assert!(matches!(block_size(100, 1000, 24, 1024), Err(LedgerError::BlockOverflow { .. })));
        assert!(matches!(block_size(0, u64::MAX, 1, 2), Err(LedgerError::BlockOverflow { size: u64::MAX })));
    }

    #[test]
    fn window_bootstrap_rule() {
        assert_eq!(whash_window_for(5, 14), Ok(0));
        assert_eq!(whash_window_for(100, 14), Ok(14));
        assert_eq!(whash_window_for(0, 0), Ok(0));
        assert_eq!(whash_window_for(13, 14), Ok(0));
        assert_eq!(whash_window_for(14, 14), Ok(14));
        assert_eq!(whash_window_for(500, 101), Err(LedgerError::WindowOutOfRange(101)));
    }

    fn chain_of(len: usize) -> Vec<Block> {
        let mut blocks = vec![Block::genesis()];
        for i in 1..len as u64 {
            let prev = blocks.last().unwrap().block_hash;
            let t = BlockTemplate {
                index: i,
                prev_hash: prev,
                whash_window: 0,
                transactions: vec![tx(i, TxKind::Submission, &i.to_le_bytes(), i)],
                miner: NodeId::default(),
                timestamp: i,
            };
            let h = whash_digest(&blocks, &t, 0).unwrap();
            blocks.push(t.seal(0, h));
        }
        blocks
    }

    #[test]
    fn small_windows_ignore_history() {
        let blocks = chain_of(6);
        let t = BlockTemplate {
            index: 6,
            prev_hash: Digest::ZERO,
            whash_window: 1,
            transactions: vec![],
            miner: NodeId::default(),
            timestamp: 6,
        };
        let with_history = whash_digest(&blocks, &t, 42).unwrap();
        let without = whash_digest(&[], &t, 42).unwrap();
        assert_eq!(with_history, without);
        let mut t0 = t.clone();
        t0.whash_window = 0;
        let mut t0b = t0.clone();
        t0b.whash_window = 0;
        assert_eq!(whash_digest(&blocks, &t0, 7).unwrap(), whash_digest(&blocks[..1], &t0b, 7).unwrap());
        // Direct oracle: sha256 over candidate bytes then nonce.
        let mut raw = t.encode();
        raw.extend_from_slice(&42u64.to_le_bytes());
        assert_eq!(without, Digest::of(&raw));
    }

    #[test]
    fn window_fourteen_at_block_hundred_covers_87_to_99() {
        let blocks = chain_of(100);
        let t = BlockTemplate {
            index: 100,
            prev_hash: blocks[99].block_hash,
            whash_window: 14,
            transactions: vec![],
            miner: NodeId::default(),
            timestamp: 100,
        };
        let base = whash_digest(&blocks, &t, 5).unwrap();
        assert_eq!(base, whash_digest(&blocks, &t, 5).unwrap());

        // Independent oracle: concatenate 99, 98, ..., 87 then candidate then nonce.
        let mut raw = Vec::new();
        for i in (87..=99).rev() {
            raw.extend(blocks[i].encode());
        }
        raw.extend(t.encode());
        raw.extend_from_slice(&5u64.to_le_bytes());
        assert_eq!(base, Digest::of(&raw));

        for i in 87..=99 {
            let mut mutated = blocks.clone();
            mutated[i].timestamp ^= 1;
            assert_ne!(whash_digest(&mutated, &t, 5).unwrap(), base, "block {i} should be inside the window");
        }
        let mut outside = blocks.clone();
        outside[86].timestamp ^= 1;
        assert_eq!(whash_digest(&outside, &t, 5).unwrap(), base);
    }

    #[test]
    fn window_beyond_history_is_rejected() {
        let blocks = chain_of(5);
        let t = BlockTemplate {
            index: 5,
            prev_hash: Digest::ZERO,
            whash_window: 14,
            transactions: vec![],
            miner: NodeId::default(),
            timestamp: 0,
        };
        assert_eq!(
            whash_digest(&blocks, &t, 0),
            Err(LedgerError::WindowExceedsHistory { window: 14, needed: 13, available: 5 })
        );
        let mut full = t.clone();
        full.whash_window = 6;
        assert!(whash_digest(&blocks, &full, 0).is_ok());
        full.whash_window = 101;
        assert_eq!(whash_digest(&blocks, &full, 0), Err(LedgerError::WindowOutOfRange(101)));
    }

    #[test]
    fn genesis_is_fixed() {
        assert_eq!(Block::genesis(), Block::genesis());
        let g = Block::genesis();
        assert_eq!((g.index, g.whash_window, g.nonce), (0, 0, 0));
        assert_eq!(recompute_block_hash(&[], &g).unwrap(), g.block_hash);
        assert_eq!(Chain::new().len(), 1);
    }

    #[test]
    fn encoded_len_matches_encoding() {
        let blocks = chain_of(3);
        for b in &blocks {
            assert_eq!(b.encode().len(), b.encoded_len());
            assert_eq!(b.to_template().encode().len(), b.to_template().encoded_len());
        }
    }

    #[test]
    fn transaction_signature_and_trace_payload() {
        let id = NodeIdentity::from_seed(Role::Light, 1);
        let payload = TracePayload {
            contacts: vec![TraceContact { peer: NodeIdentity::from_seed(Role::Light, 2).node_id(), tick: 9 }],
        };
        let t = Transaction::new_signed(&id, TxKind::Trace, payload.encode(), 10).unwrap();
        assert!(t.verify());
        assert_eq!(TracePayload::decode(&t.payload).unwrap(), payload);

        let mut forged = t.clone();
        forged.timestamp = 11;
        assert!(!forged.verify());

        // A trace carrying anything beyond id/tick pairs is invalid even if signed.
        let mut bytes = payload.encode();
        bytes.extend_from_slice(b"name");
        let bad = Transaction::new_signed(&id, TxKind::Trace, bytes, 10).unwrap();
        assert!(!bad.verify());

        let mut wrong_sender = t.clone();
        wrong_sender.sender = NodeIdentity::from_seed(Role::Light, 2).node_id();
        assert!(!wrong_sender.verify());
    }

    #[test]
    fn registry_transaction_verifies_only_under_manager() {
        let m = NodeIdentity::from_seed(Role::Manager, 1);
        let reg = crate::identity::publish_registry(
            &m,
            vec![NodeIdentity::from_seed(Role::Authorized, 2).public_key().clone()],
        )
        .unwrap();
        assert!(Transaction::new_signed(&m, TxKind::Registry, reg.encode(), 0).unwrap().verify());
        let other = NodeIdentity::from_seed(Role::Light, 3);
        assert!(!Transaction::new_signed(&other, TxKind::Registry, reg.encode(), 0).unwrap().verify());
    }

    #[test]
    fn iup_retention() {
        let a = NodeIdentity::from_seed(Role::Light, 1).node_id();
        let b = NodeIdentity::from_seed(Role::Light, 2).node_id();
        let mut pool = InfectedUsersPool::new(14);
        assert!(pool.record(a, 0));
        assert!(!pool.record(a, 5));
        assert_eq!(pool.diagnosis_tick(&a), Some(0));
        pool.record(b, 10);
        assert_eq!(pool.prune(14), 0);
        assert_eq!(pool.prune(15), 1);
        assert!(!pool.contains(&a));
        assert!(pool.contains(&b));
        let round = InfectedUsersPool::from_entries(14, &pool.entries());
        assert_eq!(round, pool);
    }
}
