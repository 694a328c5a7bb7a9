//! Deterministic simulation of smart-contract-backed security protocols.
//!
//! The crate provides a robust simulated ledger with persistence/liveness
//! audits, a replicated contract state machine, two protocol instantiations
//! on top of it (certificate revocation transparency and a transparent
//! key-curator registration scheme), and an adversarial game harness for
//! the non-equivocation, non-repudiation, and non-frameability properties.
//!
//! Everything is `no_std + alloc`; IO, file formats, and the CLI live in
//! the companion `covenant-cli` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cbe;
pub mod codec;
pub mod contract;
pub mod games;
pub mod ledger;
pub mod primitives;
pub mod rbe;
pub mod scenario;
