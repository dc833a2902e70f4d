//! Experiment runner and file formats for the contact-tracing ledger.
//!
//! The algorithms live in `tbict-core`; this crate adds JSON specs, CSV and
//! JSON Lines artifacts, threaded nonce search and the `tbict` command.

pub mod bench;
pub mod cli;
pub mod ct;
pub mod error;
pub mod io;
pub mod loc;
pub mod spec;

pub use error::{Error, Result};
pub use spec::{ExperimentSpec, Overrides};
