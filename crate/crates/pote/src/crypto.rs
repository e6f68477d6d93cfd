//! Keys and signatures for vendor attestation authorities and per-enclave
//! block keys.
//!
//! The scheme is Ed25519: 32-byte public keys, 64-byte deterministic
//! signatures. Key generation is seeded rather than drawn from OS
//! randomness so that a simulation run is reproducible bit for bit. The
//! signature field in wire formats reserves 96 bytes, leaving room to swap
//! in a larger scheme without changing any layout.

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};

use crate::codec::Digest32;

pub const PUBLIC_KEY_BYTES: usize = 32;
pub const SIGNATURE_BYTES: usize = 64;

/// A 32-byte Ed25519 public key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_BYTES]);

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_BYTES] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl std::fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PublicKey({})", self.to_hex())
    }
}

/// A 64-byte signature.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; SIGNATURE_BYTES]);

impl Signature {
    pub fn as_bytes(&self) -> &[u8; SIGNATURE_BYTES] {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<u8> {
        self.0.to_vec()
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Signature> {
        let arr: [u8; SIGNATURE_BYTES] = bytes.try_into().ok()?;
        Some(Signature(arr))
    }
}

impl std::fmt::Debug for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Signature({})", hex::encode(self.0))
    }
}

/// A signing identity. The secret half never leaves the process.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
    public: PublicKey,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Secret material stays out of debug output.
        write!(f, "KeyPair(pk={})", self.public.to_hex())
    }
}

impl KeyPair {
    pub fn public_key(&self) -> PublicKey {
        self.public
    }

    /// Deterministic signature over `message`.
    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }
}

/// Derive a keypair from a 32-byte seed. The same seed always yields the
/// same keypair.
pub fn keygen(seed: &Digest32) -> KeyPair {
    let signing = SigningKey::from_bytes(seed.as_bytes());
    let public = PublicKey(signing.verifying_key().to_bytes());
    KeyPair { signing, public }
}

/// True iff `signature` is valid for `(public_key, message)`. Malformed
/// keys or signatures yield `false`, never a panic.
pub fn verify(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(&public_key.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
    vk.verify(message, &sig).is_ok()
}

/// Variant of [`verify`] for raw (possibly wrong-length) signature bytes,
/// as they arrive off the wire.
pub fn verify_raw(public_key: &PublicKey, message: &[u8], signature: &[u8]) -> bool {
    match Signature::from_slice(signature) {
        Some(sig) => verify(public_key, message, &sig),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::sha256;

    fn seed(label: &str) -> Digest32 {
        sha256(label.as_bytes())
    }

    #[test]
    fn keygen_is_deterministic() {
        let a = keygen(&seed("one"));
        let b = keygen(&seed("one"));
        assert_eq!(a.public_key(), b.public_key());
        assert_eq!(a.sign(b"m"), b.sign(b"m"));
    }

    #[test]
    fn distinct_seeds_distinct_keys() {
        let a = keygen(&seed("one"));
        let b = keygen(&seed("two"));
        assert_ne!(a.public_key(), b.public_key());
    }

    #[test]
    fn sign_verify_round_trip() {
        let kp = keygen(&seed("rt"));
        let sig = kp.sign(b"message");
        assert!(verify(&kp.public_key(), b"message", &sig));
        assert!(!verify(&kp.public_key(), b"other message", &sig));
    }

    #[test]
    fn wrong_key_rejects() {
        let kp = keygen(&seed("a"));
        let other = keygen(&seed("b"));
        let sig = kp.sign(b"m");
        assert!(!verify(&other.public_key(), b"m", &sig));
    }

    #[test]
    fn malformed_signatures_reject() {
        let kp = keygen(&seed("mal"));
        assert!(!verify(&kp.public_key(), b"m", &Signature([0u8; 64])));
        assert!(!verify_raw(&kp.public_key(), b"m", &[1, 2, 3]));
        assert!(!verify_raw(&kp.public_key(), b"m", &[]));
    }

    // RFC 8032 test vectors 1-3 (seed, public key, message, signature).
    const RFC8032_VECTORS: [(&str, &str, &str, &str); 3] = [
        (
            "9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60",
            "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a",
            "",
            "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b",
        ),
        (
            "4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb",
            "3d4017c3e843895a92b70aa74d1b7ebc9c982ccf2ec4968cc0cd55f12af4660c",
            "72",
            "92a009a9f0d4cab8720e820b5f642540a2b27b5416503f8fb3762223ebdb69da085ac1e43e15996e458f3613d0f11d8c387b2eaeb4302aeeb00d291612bb0c00",
        ),
        (
            "c5aa8df43f9f837bedb7442f31dcb7b166d38535076f094b85ce3a2e0b4458f7",
            "fc51cd8e6218a1a38da47ed00230f0580816ed13ba3303ac5deb911548908025",
            "af82",
            "6291d657deec24024827e69c3abe01a30ce548a284743a445e3680d7db5ac3ac18ff9b538d16f290ae67f760984dc6594a7c15e9716ed28dc027beceea1ec40a",
        ),
    ];

    #[test]
    fn rfc8032_vectors() {
        for (seed_hex, pk_hex, msg_hex, sig_hex) in RFC8032_VECTORS {
            let kp = keygen(&Digest32::from_hex(seed_hex).unwrap());
            assert_eq!(kp.public_key().to_hex(), pk_hex);
            let msg = hex::decode(msg_hex).unwrap();
            let sig = kp.sign(&msg);
            assert_eq!(hex::encode(sig.0), sig_hex);
            assert!(verify(&kp.public_key(), &msg, &sig));
        }
    }

    #[test]
    fn no_public_key_collisions_over_many_seeds() {
        let mut seen = std::collections::HashSet::new();
        for i in 0u32..10_000 {
            let kp = keygen(&sha256(&i.to_le_bytes()));
            assert!(seen.insert(kp.public_key()), "collision at seed {i}");
        }
    }
}
