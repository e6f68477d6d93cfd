//! Proof of Trusted Execution: a consensus library and deterministic
//! simulation harness.
//!
//! Blocks are produced by a uniquely elected enclave, carry a vendor-signed
//! attestation quote binding the canonical code measurement to the block's
//! commitment, and finalize irrevocably once quotes from `k` distinct
//! hardware vendors corroborate the same transition. There is no fork
//! choice and no probabilistic confirmation.
//!
//! Module map:
//!
//! - [`codec`]: canonical byte encoding and hashing; the single source of
//!   truth for every commitment and signature preimage
//! - [`crypto`]: seeded Ed25519 keys and signatures
//! - [`attestation`]: vendor registry, quote issuance, quote verification
//! - [`chain`]: the deterministic account ledger, block assembly, sealing
//! - [`genesis`]: the genesis document and deterministic key derivation
//! - [`selection`]: round seeds and two-level proposer election
//! - [`validation`]: the acceptance pipeline and finality tracking
//! - [`simnet`]: discrete-event simulation of validator networks under
//!   configurable delays, partitions, and adversaries

pub mod attestation;
pub mod chain;
pub mod codec;
pub mod crypto;
pub mod genesis;
pub mod selection;
pub mod simnet;
pub mod validation;

pub use codec::{Digest32, HashAlg};
