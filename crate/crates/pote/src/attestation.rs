//! Software model of heterogeneous TEE vendor attestation authorities.
//!
//! A [`VendorRegistry`] holds the trust anchors: one attestation public key
//! per registered vendor, the canonical code measurement, and the diversity
//! threshold `k`. A [`VendorAuthority`] is the in-process signer standing in
//! for a vendor's attestation service. An honest authority refuses to attest
//! any measurement other than the canonical one; an authority whose vendor
//! is flagged compromised signs whatever it is asked to.
//!
//! The `compromised` status is simulation ground truth. Verifiers cannot see
//! it: a compromised vendor's quotes verify exactly like an active vendor's,
//! which is what makes the `f < k` safety experiments meaningful. Only
//! `revoked` disqualifies a vendor at verification time.
//!
//! Quote wire layout:
//!
//! ```text
//! vendor_id (1B) || measurement (32B) || pk_block (32B) || commitment (32B)
//!   || height (8B LE) || chain_id (8B LE) || nonce (32B)
//!   || sig_len (4B LE) || vendor_signature
//! ```
//!
//! The vendor signature covers `measurement || user_data || vendor_id`, so
//! every byte of the quote except the signature itself is authenticated.

use thiserror::Error;

use crate::codec::{
    Decodable, Decoder, Digest32, Encodable, Encoder, CodecError, HashAlg, MAX_QUOTE_BYTES,
    MAX_SIGNATURE_BYTES,
};
use crate::crypto::{self, KeyPair, PublicKey, Signature};

/// One-byte vendor identifier. Zero is reserved as invalid so that
/// zero-initialized headers can never name a vendor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VendorId(pub u8);

impl VendorId {
    pub fn is_valid(&self) -> bool {
        self.0 != 0
    }
}

impl std::fmt::Display for VendorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "vendor-{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VendorStatus {
    Active,
    Revoked,
    /// The vendor's attestation key is adversary-controlled. Invisible to
    /// verifiers; drives authority behavior and metrics only.
    Compromised,
}

impl VendorStatus {
    pub fn id(self) -> u8 {
        match self {
            VendorStatus::Active => 1,
            VendorStatus::Revoked => 2,
            VendorStatus::Compromised => 3,
        }
    }

    pub fn from_id(id: u8) -> Option<VendorStatus> {
        match id {
            1 => Some(VendorStatus::Active),
            2 => Some(VendorStatus::Revoked),
            3 => Some(VendorStatus::Compromised),
            _ => None,
        }
    }
}

/// Registry entry for one vendor.
#[derive(Debug, Clone)]
pub struct VendorRecord {
    pub id: VendorId,
    pub attestation_key: PublicKey,
    pub status: VendorStatus,
}

/// Trust anchors shared by every validator: vendor keys and statuses, the
/// canonical code measurement, the diversity threshold, and the chain id.
#[derive(Debug, Clone)]
pub struct VendorRegistry {
    vendors: Vec<VendorRecord>,
    pub canonical_measurement: Digest32,
    pub diversity_threshold_k: u8,
    pub chain_id: u64,
    /// Digest algorithm for every commitment on this chain, recorded once.
    pub hash_alg: HashAlg,
    status_history: Vec<(VendorId, VendorStatus)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AttestationError {
    #[error("vendor registry full: all 255 ids assigned")]
    RegistryFull,
    #[error("unknown vendor id {0}")]
    UnknownVendor(u8),
    #[error("honest authority refuses to attest measurement differing from the canonical one")]
    MeasurementRejected,
}

/// Outcome of verifying a quote against the registry. Checks run in this
/// order and the first failure wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerifyOutcome {
    Ok,
    UnknownVendor,
    RevokedVendor,
    BadSignature,
    WrongMeasurement,
}

impl VerifyOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, VerifyOutcome::Ok)
    }
}

impl std::fmt::Display for VerifyOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            VerifyOutcome::Ok => "ok",
            VerifyOutcome::UnknownVendor => "unknown_vendor",
            VerifyOutcome::RevokedVendor => "revoked_vendor",
            VerifyOutcome::BadSignature => "bad_signature",
            VerifyOutcome::WrongMeasurement => "wrong_measurement",
        };
        f.write_str(s)
    }
}

impl VendorRegistry {
    /// A registry must anchor a nonzero canonical measurement.
    pub fn new(canonical_measurement: Digest32, diversity_threshold_k: u8, chain_id: u64) -> VendorRegistry {
        Self::with_hash_alg(canonical_measurement, diversity_threshold_k, chain_id, HashAlg::Sha256)
    }

    pub fn with_hash_alg(
        canonical_measurement: Digest32,
        diversity_threshold_k: u8,
        chain_id: u64,
        hash_alg: HashAlg,
    ) -> VendorRegistry {
        assert!(
            !canonical_measurement.is_zero(),
            "canonical measurement must be nonzero"
        );
        assert!(diversity_threshold_k >= 1, "k must be positive");
        VendorRegistry {
            vendors: Vec::new(),
            canonical_measurement,
            diversity_threshold_k,
            chain_id,
            hash_alg,
            status_history: Vec::new(),
        }
    }

    /// Register a new vendor key. Ids are assigned sequentially from 1.
    pub fn register_vendor(&mut self, attestation_key: PublicKey) -> Result<VendorId, AttestationError> {
        if self.vendors.len() >= 255 {
            return Err(AttestationError::RegistryFull);
        }
        let id = VendorId(self.vendors.len() as u8 + 1);
        self.vendors.push(VendorRecord {
            id,
            attestation_key,
            status: VendorStatus::Active,
        });
        self.status_history.push((id, VendorStatus::Active));
        Ok(id)
    }

    pub fn set_vendor_status(
        &mut self,
        id: VendorId,
        status: VendorStatus,
    ) -> Result<(), AttestationError> {
        let record = self
            .vendors
            .iter_mut()
            .find(|v| v.id == id)
            .ok_or(AttestationError::UnknownVendor(id.0))?;
        record.status = status;
        self.status_history.push((id, status));
        Ok(())
    }

    pub fn vendor(&self, id: VendorId) -> Option<&VendorRecord> {
        if !id.is_valid() {
            return None;
        }
        self.vendors.iter().find(|v| v.id == id)
    }

    pub fn vendors(&self) -> &[VendorRecord] {
        &self.vendors
    }

    /// Vendors a verifier treats as trustworthy: everything not revoked.
    /// Compromise is not observable.
    pub fn unrevoked_vendors(&self) -> impl Iterator<Item = &VendorRecord> {
        self.vendors
            .iter()
            .filter(|v| v.status != VendorStatus::Revoked)
    }

    pub fn status_history(&self) -> &[(VendorId, VendorStatus)] {
        &self.status_history
    }

    /// Full verification pipeline for a quote: registration, revocation,
    /// vendor signature, then measurement. First failure wins.
    pub fn verify_quote(&self, quote: &AttestationQuote) -> VerifyOutcome {
        let Some(record) = self.vendor(quote.vendor_id) else {
            return VerifyOutcome::UnknownVendor;
        };
        if record.status == VendorStatus::Revoked {
            return VerifyOutcome::RevokedVendor;
        }
        let message = quote.signed_bytes();
        if !crypto::verify_raw(&record.attestation_key, &message, &quote.vendor_signature) {
            return VerifyOutcome::BadSignature;
        }
        if quote.measurement != self.canonical_measurement {
            return VerifyOutcome::WrongMeasurement;
        }
        VerifyOutcome::Ok
    }
}

impl Encodable for VendorRegistry {
    fn encode_into(&self, enc: &mut Encoder) -> Result<(), CodecError> {
        enc.put_u64(self.chain_id);
        enc.put_u8(self.hash_alg.id());
        enc.put_digest(&self.canonical_measurement);
        enc.put_u8(self.diversity_threshold_k);
        enc.put_u32(self.vendors.len() as u32);
        for v in &self.vendors {
            enc.put_u8(v.id.0);
            enc.put_fixed(v.attestation_key.as_bytes());
            enc.put_u8(v.status.id());
        }
        Ok(())
    }
}

impl Decodable for VendorRegistry {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let chain_id = dec.u64()?;
        let alg_id = dec.u8()?;
        let hash_alg = HashAlg::from_id(alg_id).ok_or(CodecError::InvalidValue {
            field: "hash_alg",
            value: alg_id as u64,
        })?;
        let canonical_measurement = dec.digest()?;
        let diversity_threshold_k = dec.u8()?;
        let count = dec.u32()?;
        if count > 255 {
            return Err(CodecError::LengthOutOfBounds {
                field: "vendor_count",
                len: count as usize,
                max: 255,
            });
        }
        let mut vendors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let id = VendorId(dec.u8()?);
            if !id.is_valid() {
                return Err(CodecError::InvalidValue {
                    field: "vendor_id",
                    value: 0,
                });
            }
            let key = PublicKey(dec.fixed::<32>()?);
            let status_byte = dec.u8()?;
            let status = VendorStatus::from_id(status_byte).ok_or(CodecError::InvalidValue {
                field: "vendor_status",
                value: status_byte as u64,
            })?;
            vendors.push(VendorRecord {
                id,
                attestation_key: key,
                status,
            });
        }
        Ok(VendorRegistry {
            vendors,
            canonical_measurement,
            diversity_threshold_k,
            chain_id,
            hash_alg,
            status_history: Vec::new(),
        })
    }
}

/// The attested user data: everything the enclave binds into its quote.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuoteUserData {
    pub pk_block: PublicKey,
    pub commitment: Digest32,
    pub height: u64,
    pub chain_id: u64,
    pub nonce: Digest32,
}

impl QuoteUserData {
    fn encode_into_raw(&self, enc: &mut Encoder) {
        enc.put_fixed(self.pk_block.as_bytes());
        enc.put_digest(&self.commitment);
        enc.put_u64(self.height);
        enc.put_u64(self.chain_id);
        enc.put_digest(&self.nonce);
    }
}

/// A vendor-signed binding of code measurement, block commitment, and round
/// metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttestationQuote {
    pub vendor_id: VendorId,
    pub measurement: Digest32,
    pub user_data: QuoteUserData,
    pub vendor_signature: Vec<u8>,
}

impl AttestationQuote {
    /// The bytes covered by the vendor signature:
    /// `measurement || user_data || vendor_id`.
    pub fn signed_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(145);
        enc.put_digest(&self.measurement);
        self.user_data.encode_into_raw(&mut enc);
        enc.put_u8(self.vendor_id.0);
        enc.finish()
    }
}

impl Encodable for AttestationQuote {
    fn encode_into(&self, enc: &mut Encoder) -> Result<(), CodecError> {
        enc.put_u8(self.vendor_id.0);
        enc.put_digest(&self.measurement);
        self.user_data.encode_into_raw(enc);
        enc.put_var_bytes("vendor_signature", &self.vendor_signature, MAX_SIGNATURE_BYTES)
    }
}

impl Decodable for AttestationQuote {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let vendor_id = VendorId(dec.u8()?);
        let measurement = dec.digest()?;
        let pk_block = PublicKey(dec.fixed::<32>()?);
        let commitment = dec.digest()?;
        let height = dec.u64()?;
        let chain_id = dec.u64()?;
        let nonce = dec.digest()?;
        let vendor_signature = dec.var_bytes("vendor_signature", MAX_SIGNATURE_BYTES)?;
        Ok(AttestationQuote {
            vendor_id,
            measurement,
            user_data: QuoteUserData {
                pk_block,
                commitment,
                height,
                chain_id,
                nonce,
            },
            vendor_signature,
        })
    }
}

/// An enclave instance: which vendor's hardware it runs on, its position in
/// that vendor's roster, and its ephemeral block-signing keypair.
#[derive(Debug, Clone)]
pub struct EnclaveIdentity {
    pub vendor_id: VendorId,
    pub enclave_index: u32,
    pub block_keypair: KeyPair,
}

impl EnclaveIdentity {
    pub fn public_key(&self) -> PublicKey {
        self.block_keypair.public_key()
    }
}

/// In-process signer standing in for one vendor's attestation service.
#[derive(Debug, Clone)]
pub struct VendorAuthority {
    pub vendor_id: VendorId,
    keypair: KeyPair,
}

impl VendorAuthority {
    pub fn new(vendor_id: VendorId, keypair: KeyPair) -> VendorAuthority {
        VendorAuthority { vendor_id, keypair }
    }

    pub fn attestation_key(&self) -> PublicKey {
        self.keypair.public_key()
    }

    /// Issue a quote binding `measurement` and `user_data`.
    ///
    /// Honest authorities refuse any measurement other than the registry's
    /// canonical one. An authority whose vendor is flagged compromised
    /// signs regardless: that is precisely the forgery capability the
    /// threat model grants.
    pub fn issue_quote(
        &self,
        registry: &VendorRegistry,
        measurement: Digest32,
        user_data: QuoteUserData,
    ) -> Result<AttestationQuote, AttestationError> {
        let record = registry
            .vendor(self.vendor_id)
            .ok_or(AttestationError::UnknownVendor(self.vendor_id.0))?;
        let honest = record.status != VendorStatus::Compromised;
        if honest && measurement != registry.canonical_measurement {
            return Err(AttestationError::MeasurementRejected);
        }
        let quote = self.sign_quote(measurement, user_data);
        debug_assert!(
            quote.encode().map(|b| b.len() <= MAX_QUOTE_BYTES).unwrap_or(false),
            "issued quote exceeds size bound"
        );
        Ok(quote)
    }

    /// Raw signing path without the honesty policy. The adversary model
    /// uses this to mint forged evidence when a mode grants it; honest
    /// flows never call it directly.
    pub fn sign_quote(&self, measurement: Digest32, user_data: QuoteUserData) -> AttestationQuote {
        let mut quote = AttestationQuote {
            vendor_id: self.vendor_id,
            measurement,
            user_data,
            vendor_signature: Vec::new(),
        };
        let sig: Signature = self.keypair.sign(&quote.signed_bytes());
        quote.vendor_signature = sig.to_vec();
        quote
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::sha256;
    use crate::crypto::keygen;

    fn measurement() -> Digest32 {
        sha256(b"canonical program")
    }

    fn setup() -> (VendorRegistry, Vec<VendorAuthority>) {
        let mut registry = VendorRegistry::new(measurement(), 3, 7);
        let mut authorities = Vec::new();
        for name in ["sev", "tdx", "nitro", "cca"] {
            let kp = keygen(&sha256(name.as_bytes()));
            let id = registry.register_vendor(kp.public_key()).unwrap();
            authorities.push(VendorAuthority::new(id, kp));
        }
        (registry, authorities)
    }

    fn user_data(commitment: Digest32) -> QuoteUserData {
        QuoteUserData {
            pk_block: keygen(&sha256(b"enclave")).public_key(),
            commitment,
            height: 4,
            chain_id: 7,
            nonce: sha256(b"round nonce"),
        }
    }

    #[test]
    fn sequential_ids_from_one() {
        let (registry, _) = setup();
        let ids: Vec<u8> = registry.vendors().iter().map(|v| v.id.0).collect();
        assert_eq!(ids, vec![1, 2, 3, 4]);
    }

    #[test]
    fn registry_full_at_255() {
        let mut registry = VendorRegistry::new(measurement(), 1, 1);
        for i in 0..255u32 {
            registry
                .register_vendor(keygen(&sha256(&i.to_le_bytes())).public_key())
                .unwrap();
        }
        let err = registry.register_vendor(keygen(&sha256(b"extra")).public_key());
        assert_eq!(err, Err(AttestationError::RegistryFull));
    }

    #[test]
    fn honest_authority_happy_path() {
        let (registry, auths) = setup();
        let quote = auths[0]
            .issue_quote(&registry, measurement(), user_data(sha256(b"block")))
            .unwrap();
        assert_eq!(registry.verify_quote(&quote), VerifyOutcome::Ok);
    }

    #[test]
    fn honest_authority_rejects_foreign_measurement() {
        let (registry, auths) = setup();
        let err = auths[0].issue_quote(&registry, sha256(b"patched program"), user_data(sha256(b"b")));
        assert_eq!(err, Err(AttestationError::MeasurementRejected));
    }

    #[test]
    fn compromised_authority_signs_anything() {
        let (mut registry, auths) = setup();
        registry
            .set_vendor_status(VendorId(2), VendorStatus::Compromised)
            .unwrap();
        let quote = auths[1]
            .issue_quote(&registry, sha256(b"patched program"), user_data(sha256(b"b")))
            .unwrap();
        // The forged measurement is caught at verification, not issuance.
        assert_eq!(registry.verify_quote(&quote), VerifyOutcome::WrongMeasurement);
    }

    #[test]
    fn compromised_vendor_quotes_still_verify() {
        // Compromise is invisible to verifiers; only revocation disqualifies.
        let (mut registry, auths) = setup();
        registry
            .set_vendor_status(VendorId(2), VendorStatus::Compromised)
            .unwrap();
        let quote = auths[1].sign_quote(measurement(), user_data(sha256(b"forged state")));
        assert_eq!(registry.verify_quote(&quote), VerifyOutcome::Ok);
    }

    #[test]
    fn unknown_vendor_detected() {
        let (registry, auths) = setup();
        let mut quote = auths[0]
            .issue_quote(&registry, measurement(), user_data(sha256(b"b")))
            .unwrap();
        quote.vendor_id = VendorId(77);
        assert_eq!(registry.verify_quote(&quote), VerifyOutcome::UnknownVendor);
        quote.vendor_id = VendorId(0);
        assert_eq!(registry.verify_quote(&quote), VerifyOutcome::UnknownVendor);
    }

    #[test]
    fn revoked_vendor_detected() {
        let (mut registry, auths) = setup();
        let quote = auths[2]
            .issue_quote(&registry, measurement(), user_data(sha256(b"b")))
            .unwrap();
        assert_eq!(registry.verify_quote(&quote), VerifyOutcome::Ok);
        registry
            .set_vendor_status(VendorId(3), VendorStatus::Revoked)
            .unwrap();
        assert_eq!(registry.verify_quote(&quote), VerifyOutcome::RevokedVendor);
    }

    #[test]
    fn tampered_signature_detected() {
        let (registry, auths) = setup();
        let mut quote = auths[0]
            .issue_quote(&registry, measurement(), user_data(sha256(b"b")))
            .unwrap();
        quote.vendor_signature[5] ^= 0x01;
        assert_eq!(registry.verify_quote(&quote), VerifyOutcome::BadSignature);
    }

    #[test]
    fn status_change_unknown_vendor() {
        let (mut registry, _) = setup();
        let err = registry.set_vendor_status(VendorId(99), VendorStatus::Revoked);
        assert_eq!(err, Err(AttestationError::UnknownVendor(99)));
    }

    #[test]
    fn quote_codec_round_trip() {
        let (registry, auths) = setup();
        let quote = auths[3]
            .issue_quote(&registry, measurement(), user_data(sha256(b"rt")))
            .unwrap();
        let bytes = quote.encode().unwrap();
        // 1 + 32 + 32 + 32 + 8 + 8 + 32 + 4 + 64
        assert_eq!(bytes.len(), 213);
        assert_eq!(AttestationQuote::decode(&bytes).unwrap(), quote);
    }

    #[test]
    fn every_single_byte_flip_breaks_verification() {
        let (registry, auths) = setup();
        let quote = auths[0]
            .issue_quote(&registry, measurement(), user_data(sha256(b"flip")))
            .unwrap();
        let bytes = quote.encode().unwrap();
        for i in 0..bytes.len() {
            let mut mutated = bytes.clone();
            mutated[i] ^= 0x01;
            let ok = match AttestationQuote::decode(&mutated) {
                Ok(q) => registry.verify_quote(&q).is_ok(),
                Err(_) => false,
            };
            assert!(!ok, "byte flip at offset {i} went undetected");
        }
    }

    #[test]
    fn registry_codec_round_trip() {
        let (mut registry, _) = setup();
        registry
            .set_vendor_status(VendorId(4), VendorStatus::Revoked)
            .unwrap();
        let bytes = registry.encode().unwrap();
        let decoded = VendorRegistry::decode(&bytes).unwrap();
        assert_eq!(decoded.chain_id, registry.chain_id);
        assert_eq!(decoded.canonical_measurement, registry.canonical_measurement);
        assert_eq!(decoded.diversity_threshold_k, registry.diversity_threshold_k);
        assert_eq!(decoded.vendors().len(), 4);
        assert_eq!(decoded.vendor(VendorId(4)).unwrap().status, VendorStatus::Revoked);
    }
}
