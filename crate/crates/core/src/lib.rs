//! Core of a trustworthy indoor contact-tracing stack.
//!
//! The crate is `no_std` (with `alloc`) and contains only deterministic
//! algorithms; file formats, wall-clock timing, threads and the CLI live in
//! the companion `tbict` crate.
//!
//! - [`identity`]: ECDSA node identities and the manager-signed registry of
//!   authorized nodes.
//! - [`ledger`]: transactions, blocks, the chain and randomized hash-window
//!   (W-Hash) digests.
//! - [`consensus`]: credit-gated two-level proof of work, mining, validation
//!   and the analytic difficulty metrics.
//! - [`credit`]: proximity and penalty credit scoring.
//! - [`signal`]: BLE array snapshots, MUSIC spectra, angle images and
//!   bearing triangulation.
//! - [`simulation`]: random-walk venue simulation that drives credits,
//!   transactions and mining.
#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod consensus;
pub mod credit;
pub mod encoding;
pub mod identity;
pub mod ledger;
pub mod signal;
pub mod simulation;

mod hexser;

pub use consensus::{DifficultyLevel, MiningOutcome, Rejection};
pub use credit::{CreditPolicy, CreditState, PenaltyKind};
pub use encoding::Digest;
pub use identity::{AuthorizedRegistry, NodeId, NodeIdentity, PublicKey, Role, Signature};
pub use ledger::{Block, BlockTemplate, Chain, Transaction, TxKind};
