//! Deterministic proposer election from public randomness.
//!
//! Every node derives the same round seed from the previous block hash and
//! the height, samples a vendor class uniformly, then picks an enclave
//! within that class. No communication, no stake, no slots: whoever holds
//! the same finalized chain computes the same proposer.
//!
//! The intra-vendor index comes from a re-hash of the seed rather than a
//! reuse of the vendor draw's bytes, keeping the two choices independent.

use thiserror::Error;

use crate::attestation::{EnclaveIdentity, VendorId, VendorRegistry, VendorStatus};
use crate::codec::{hash, Digest32, Encoder, HashAlg};

/// Domain tag for round-seed derivation.
pub const SEED_DOMAIN_TAG: &[u8] = b"POTE_SEED_V1";

/// Public, recomputable randomness for one height. Doubles as the round
/// freshness nonce bound into attestation quotes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundSeed {
    pub value: Digest32,
    pub height: u64,
}

/// Per-vendor ordered enclave lists, the election's sample space.
#[derive(Debug, Clone, Default)]
pub struct EnclaveRoster {
    entries: Vec<(VendorId, Vec<EnclaveIdentity>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SelectionError {
    #[error("no eligible vendor: every vendor is revoked or has no enclaves")]
    EmptyRoster,
}

impl EnclaveRoster {
    pub fn new() -> EnclaveRoster {
        EnclaveRoster::default()
    }

    /// Insert an enclave under its vendor, keeping vendors sorted by id and
    /// enclaves in insertion (roster) order.
    pub fn add(&mut self, enclave: EnclaveIdentity) {
        match self.entries.binary_search_by_key(&enclave.vendor_id, |(v, _)| *v) {
            Ok(i) => self.entries[i].1.push(enclave),
            Err(i) => self.entries.insert(i, (enclave.vendor_id, vec![enclave])),
        }
    }

    pub fn from_enclaves(enclaves: impl IntoIterator<Item = EnclaveIdentity>) -> EnclaveRoster {
        let mut roster = EnclaveRoster::new();
        for e in enclaves {
            roster.add(e);
        }
        roster
    }

    pub fn vendor_enclaves(&self, vendor: VendorId) -> &[EnclaveIdentity] {
        self.entries
            .binary_search_by_key(&vendor, |(v, _)| *v)
            .map(|i| self.entries[i].1.as_slice())
            .unwrap_or(&[])
    }

    pub fn all_enclaves(&self) -> impl Iterator<Item = &EnclaveIdentity> {
        self.entries.iter().flat_map(|(_, list)| list.iter())
    }

    pub fn enclave_count(&self) -> usize {
        self.entries.iter().map(|(_, l)| l.len()).sum()
    }

    /// Vendors that can be sampled: not revoked in the registry and holding
    /// at least one enclave. Sorted by vendor id.
    fn eligible_vendors(&self, registry: &VendorRegistry) -> Vec<VendorId> {
        self.entries
            .iter()
            .filter(|(vendor, list)| {
                !list.is_empty()
                    && registry
                        .vendor(*vendor)
                        .map(|r| r.status != VendorStatus::Revoked)
                        .unwrap_or(false)
            })
            .map(|(vendor, _)| *vendor)
            .collect()
    }
}

/// Seed for `height`, derived from the parent block hash:
/// `hash(tag || parent_hash || height)`.
pub fn derive_seed(alg: HashAlg, parent_block_hash: Digest32, height: u64) -> RoundSeed {
    let mut enc = Encoder::with_capacity(SEED_DOMAIN_TAG.len() + 40);
    enc.put_fixed(SEED_DOMAIN_TAG);
    enc.put_digest(&parent_block_hash);
    enc.put_u64(height);
    RoundSeed {
        value: hash(alg, &enc.finish()),
        height,
    }
}

/// Uniformly sample a vendor class from the eligible set.
pub fn sample_vendor(
    seed: &RoundSeed,
    roster: &EnclaveRoster,
    registry: &VendorRegistry,
) -> Result<VendorId, SelectionError> {
    let eligible = roster.eligible_vendors(registry);
    if eligible.is_empty() {
        return Err(SelectionError::EmptyRoster);
    }
    let idx = seed.value.prefix_u64() % eligible.len() as u64;
    Ok(eligible[idx as usize])
}

/// Elect the proposer for this round: vendor class first, then an enclave
/// within it via an independent re-hash.
pub fn select_proposer<'a>(
    alg: HashAlg,
    seed: &RoundSeed,
    roster: &'a EnclaveRoster,
    registry: &VendorRegistry,
) -> Result<&'a EnclaveIdentity, SelectionError> {
    let vendor = sample_vendor(seed, roster, registry)?;
    let list = roster.vendor_enclaves(vendor);
    debug_assert!(!list.is_empty(), "eligible vendor has enclaves");
    let mut enc = Encoder::with_capacity(33);
    enc.put_digest(&seed.value);
    enc.put_u8(vendor.0);
    let draw = hash(alg, &enc.finish()).prefix_u64();
    Ok(&list[(draw % list.len() as u64) as usize])
}
