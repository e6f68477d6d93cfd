//! Genesis document: the human-readable anchor a chain boots from.
//!
//! A genesis file names the chain id, hash algorithm, program descriptor,
//! diversity threshold, vendor roster with enclave counts, initial account
//! balances, and one master seed. Every vendor attestation key and enclave
//! block key derives deterministically from that seed, so two loads of the
//! same document produce byte-identical registries and rosters.
//!
//! ```toml
//! chain_id = 7
//! hash_algorithm = "sha256"
//! diversity_threshold_k = 3
//! master_seed_hex = "<64 hex chars>"
//!
//! [program]
//! name = "pote-ledger"
//! version = 1
//! rule_flags = 0
//!
//! [[vendors]]
//! name = "sev"
//! enclaves = 2
//!
//! [[accounts]]
//! id_hex = "<64 hex chars>"
//! balance = 1000
//! ```

use serde::Deserialize;
use thiserror::Error;

use crate::attestation::{EnclaveIdentity, VendorAuthority, VendorId, VendorRegistry};
use crate::chain::{
    measure_program, state_commitment, Account, AccountId, ChainParams, ChainState, GenesisInfo,
    ProgramDescriptor,
};
use crate::codec::{hash, Digest32, Encoder, HashAlg};
use crate::crypto::keygen;
use crate::selection::EnclaveRoster;

#[derive(Debug, Error)]
pub enum GenesisError {
    #[error("genesis parse error: {0}")]
    Parse(String),
    #[error("invalid genesis: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenesisDoc {
    chain_id: u64,
    hash_algorithm: String,
    diversity_threshold_k: u8,
    master_seed_hex: String,
    program: ProgramDoc,
    vendors: Vec<VendorDoc>,
    #[serde(default)]
    accounts: Vec<AccountDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProgramDoc {
    name: String,
    version: u32,
    rule_flags: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VendorDoc {
    name: String,
    enclaves: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AccountDoc {
    id_hex: String,
    balance: u64,
}

/// Deterministic inputs for building a chain's initial objects.
#[derive(Debug, Clone)]
pub struct GenesisSpec {
    pub chain_id: u64,
    pub hash_alg: HashAlg,
    pub diversity_threshold_k: u8,
    pub master_seed: Digest32,
    pub program: ProgramDescriptor,
    /// Vendor display names paired with their enclave counts; ids are
    /// assigned sequentially from 1 in list order.
    pub vendors: Vec<(String, u32)>,
    pub accounts: Vec<(AccountId, u64)>,
}

/// Fully derived genesis state: registry, signers, roster, and ledger.
pub struct Genesis {
    pub spec: GenesisSpec,
    pub params: ChainParams,
    pub measurement: Digest32,
    pub registry: VendorRegistry,
    pub authorities: Vec<VendorAuthority>,
    pub roster: EnclaveRoster,
    pub state: ChainState,
    pub info: GenesisInfo,
}

/// Seed for a vendor's attestation key.
pub fn vendor_key_seed(alg: HashAlg, master: &Digest32, vendor_ordinal: u8) -> Digest32 {
    let mut enc = Encoder::with_capacity(48);
    enc.put_fixed(b"POTE_VENDOR_KEY");
    enc.put_digest(master);
    enc.put_u8(vendor_ordinal);
    hash(alg, &enc.finish())
}

/// Seed for an enclave's block key.
pub fn enclave_key_seed(alg: HashAlg, master: &Digest32, vendor: VendorId, index: u32) -> Digest32 {
    let mut enc = Encoder::with_capacity(56);
    enc.put_fixed(b"POTE_ENCLAVE_KEY");
    enc.put_digest(master);
    enc.put_u8(vendor.0);
    enc.put_u32(index);
    hash(alg, &enc.finish())
}

impl GenesisSpec {
    pub fn from_toml_str(text: &str) -> Result<GenesisSpec, GenesisError> {
        let doc: GenesisDoc = toml::from_str(text).map_err(|e| GenesisError::Parse(e.to_string()))?;
        let hash_alg = HashAlg::from_name(&doc.hash_algorithm).ok_or_else(|| {
            GenesisError::Invalid(format!("unknown hash_algorithm `{}`", doc.hash_algorithm))
        })?;
        let master_seed = Digest32::from_hex(&doc.master_seed_hex).ok_or_else(|| {
            GenesisError::Invalid("master_seed_hex must be 64 hex characters".into())
        })?;
        let mut accounts = Vec::with_capacity(doc.accounts.len());
        for a in &doc.accounts {
            let id = AccountId::from_hex(&a.id_hex).ok_or_else(|| {
                GenesisError::Invalid(format!("account id `{}` must be 64 hex characters", a.id_hex))
            })?;
            accounts.push((id, a.balance));
        }
        GenesisSpec {
            chain_id: doc.chain_id,
            hash_alg,
            diversity_threshold_k: doc.diversity_threshold_k,
            master_seed,
            program: ProgramDescriptor {
                name: doc.program.name,
                version: doc.program.version,
                rule_flags: doc.program.rule_flags,
            },
            vendors: doc.vendors.into_iter().map(|v| (v.name, v.enclaves)).collect(),
            accounts,
        }
        .validated()
    }

    fn validated(self) -> Result<GenesisSpec, GenesisError> {
        if self.vendors.is_empty() || self.vendors.len() > 255 {
            return Err(GenesisError::Invalid(format!(
                "vendor count {} outside 1..=255",
                self.vendors.len()
            )));
        }
        if self.diversity_threshold_k == 0 {
            return Err(GenesisError::Invalid("diversity_threshold_k must be >= 1".into()));
        }
        if (self.diversity_threshold_k as usize) > self.vendors.len() {
            return Err(GenesisError::Invalid(format!(
                "diversity_threshold_k = {} exceeds the {} registered vendors",
                self.diversity_threshold_k,
                self.vendors.len()
            )));
        }
        if self.vendors.iter().any(|(_, count)| *count == 0) {
            return Err(GenesisError::Invalid(
                "every vendor needs at least one enclave".into(),
            ));
        }
        let mut ids: Vec<_> = self.accounts.iter().map(|(id, _)| *id).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != self.accounts.len() {
            return Err(GenesisError::Invalid("duplicate account id in genesis".into()));
        }
        Ok(self)
    }

    /// Derive the registry, signing authorities, enclave roster, and initial
    /// ledger state.
    pub fn build(&self) -> Result<Genesis, GenesisError> {
        let params = ChainParams {
            chain_id: self.chain_id,
            hash_alg: self.hash_alg,
        };
        let measurement = measure_program(self.hash_alg, &self.program)
            .map_err(|e| GenesisError::Invalid(format!("program descriptor: {e}")))?;
        let mut registry = VendorRegistry::with_hash_alg(
            measurement,
            self.diversity_threshold_k,
            self.chain_id,
            self.hash_alg,
        );
        let mut authorities = Vec::with_capacity(self.vendors.len());
        let mut roster = EnclaveRoster::new();
        for (ordinal, (_, enclave_count)) in self.vendors.iter().enumerate() {
            let seed = vendor_key_seed(self.hash_alg, &self.master_seed, ordinal as u8 + 1);
            let keypair = keygen(&seed);
            let id = registry
                .register_vendor(keypair.public_key())
                .map_err(|e| GenesisError::Invalid(e.to_string()))?;
            authorities.push(VendorAuthority::new(id, keypair));
            for index in 0..*enclave_count {
                let enclave_seed = enclave_key_seed(self.hash_alg, &self.master_seed, id, index);
                roster.add(EnclaveIdentity {
                    vendor_id: id,
                    enclave_index: index,
                    block_keypair: keygen(&enclave_seed),
                });
            }
        }
        let state = ChainState::with_accounts(
            self.accounts
                .iter()
                .map(|(id, balance)| (*id, Account { balance: *balance, next_nonce: 0 })),
        );
        let info = GenesisInfo {
            chain_id: self.chain_id,
            program_measurement: measurement,
            initial_state_commitment: state_commitment(self.hash_alg, &state),
            diversity_threshold_k: self.diversity_threshold_k,
        };
        Ok(Genesis {
            spec: self.clone(),
            params,
            measurement,
            registry,
            authorities,
            roster,
            state,
            info,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
chain_id = 7
hash_algorithm = "sha256"
diversity_threshold_k = 3
master_seed_hex = "6060606060606060606060606060606060606060606060606060606060606060"

[program]
name = "pote-ledger"
version = 1
rule_flags = 0

[[vendors]]
name = "sev"
enclaves = 2

[[vendors]]
name = "tdx"
enclaves = 2

[[vendors]]
name = "nitro"
enclaves = 1

[[accounts]]
id_hex = "0101010101010101010101010101010101010101010101010101010101010101"
balance = 500

[[accounts]]
id_hex = "0202020202020202020202020202020202020202020202020202020202020202"
balance = 250
"#;

    #[test]
    fn loads_and_builds() {
        let spec = GenesisSpec::from_toml_str(SAMPLE).unwrap();
        let genesis = spec.build().unwrap();
        assert_eq!(genesis.registry.vendors().len(), 3);
        assert_eq!(genesis.roster.enclave_count(), 5);
        assert_eq!(genesis.state.total_balance(), 750);
        assert!(!genesis.info.genesis_hash(HashAlg::Sha256).is_zero());
    }

    #[test]
    fn same_document_same_keys() {
        let a = GenesisSpec::from_toml_str(SAMPLE).unwrap().build().unwrap();
        let b = GenesisSpec::from_toml_str(SAMPLE).unwrap().build().unwrap();
        assert_eq!(
            a.registry.vendors()[0].attestation_key,
            b.registry.vendors()[0].attestation_key
        );
        let first = |g: &Genesis| g.roster.all_enclaves().next().unwrap().public_key();
        assert_eq!(first(&a), first(&b));
        assert_eq!(a.info.genesis_hash(a.params.hash_alg), b.info.genesis_hash(b.params.hash_alg));
    }

    #[test]
    fn k_above_vendor_count_rejected() {
        let text = SAMPLE.replace("diversity_threshold_k = 3", "diversity_threshold_k = 4");
        let err = GenesisSpec::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("exceeds"));
    }

    #[test]
    fn duplicate_accounts_rejected() {
        let text = SAMPLE.replace(
            "0202020202020202020202020202020202020202020202020202020202020202",
            "0101010101010101010101010101010101010101010101010101010101010101",
        );
        assert!(GenesisSpec::from_toml_str(&text).is_err());
    }
}
