//! Canonical binary codec and hashing for all protocol objects.
//!
//! Every byte that is hashed, signed, or shipped between nodes is produced
//! here. The format is deliberately small:
//!
//! - integers are fixed-width **little-endian**
//! - fields are emitted in **declaration order**, no padding
//! - variable-length byte fields carry a 32-bit little-endian length prefix
//! - nested types are encoded recursively
//! - decoding is **strict**: trailing bytes, truncation, and out-of-bounds
//!   length prefixes are all rejected
//!
//! Strictness is not optional; the commitment check compares digests of
//! these encodings, so any malleability at the framing level would let two
//! distinct objects share a commitment.
//!
//! Length-limited fields and their bounds:
//!
//! | field                | max bytes |
//! |----------------------|-----------|
//! | attestation quote    | 8192      |
//! | enclave signature    | 96        |
//! | vendor signature     | 96        |
//! | program name         | 64        |

use sha2::{Digest, Sha256, Sha512_256};
use thiserror::Error;

/// Maximum encoded size of an attestation quote embedded in a header.
pub const MAX_QUOTE_BYTES: usize = 8192;
/// Maximum size of a signature field (reserves room for schemes beyond the
/// default 64-byte one).
pub const MAX_SIGNATURE_BYTES: usize = 96;
/// Maximum length of a program descriptor name.
pub const MAX_PROGRAM_NAME_BYTES: usize = 64;
/// Hard cap on transactions in a single decoded block.
pub const MAX_BLOCK_TRANSACTIONS: u32 = 1 << 20;
/// Hard cap on accounts in a decoded state snapshot.
pub const MAX_STATE_ACCOUNTS: u32 = 1 << 24;
/// Hard cap on quotes carried by one finality certificate.
pub const MAX_CERTIFICATE_QUOTES: u32 = 4096;

/// Errors from encoding or decoding canonical bytes.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    /// A length-limited field exceeds its maximum (encode side).
    #[error("field `{field}` too long: {len} bytes exceeds maximum {max}")]
    FieldTooLong {
        field: &'static str,
        len: usize,
        max: usize,
    },
    /// Input ended before the expected field (decode side).
    #[error("malformed encoding: needed {needed} more bytes, {remaining} remain")]
    Truncated { needed: usize, remaining: usize },
    /// A length prefix points past its bound (decode side).
    #[error("malformed encoding: `{field}` declares {len} bytes, maximum {max}")]
    LengthOutOfBounds {
        field: &'static str,
        len: usize,
        max: usize,
    },
    /// Input was longer than the encoded object.
    #[error("malformed encoding: {remaining} trailing bytes")]
    TrailingBytes { remaining: usize },
    /// A discriminant byte holds no known value.
    #[error("malformed encoding: invalid value {value} for `{field}`")]
    InvalidValue { field: &'static str, value: u64 },
}

/// A 32-byte digest. Value equality is byte equality.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest32(pub [u8; 32]);

impl Digest32 {
    pub const ZERO: Digest32 = Digest32([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0u8; 32]
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Digest32> {
        let raw = hex::decode(s).ok()?;
        let arr: [u8; 32] = raw.try_into().ok()?;
        Some(Digest32(arr))
    }

    /// First eight bytes interpreted as a little-endian integer. Used by
    /// proposer selection to turn a digest into an index.
    pub fn prefix_u64(&self) -> u64 {
        u64::from_le_bytes(self.0[..8].try_into().expect("slice is 8 bytes"))
    }
}

impl std::fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest32({})", self.to_hex())
    }
}

impl std::fmt::Display for Digest32 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Hash algorithm identifier carried in chain configuration. The default is
/// SHA-256; the second entry exists so test oracles can swap the algorithm
/// and prove nothing is hard-wired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HashAlg {
    Sha256,
    Sha512_256,
}

impl HashAlg {
    pub fn id(self) -> u8 {
        match self {
            HashAlg::Sha256 => 1,
            HashAlg::Sha512_256 => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<HashAlg> {
        match id {
            1 => Some(HashAlg::Sha256),
            2 => Some(HashAlg::Sha512_256),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HashAlg::Sha256 => "sha256",
            HashAlg::Sha512_256 => "sha512_256",
        }
    }

    pub fn from_name(name: &str) -> Option<HashAlg> {
        match name {
            "sha256" => Some(HashAlg::Sha256),
            "sha512_256" => Some(HashAlg::Sha512_256),
            _ => None,
        }
    }
}

impl Default for HashAlg {
    fn default() -> Self {
        HashAlg::Sha256
    }
}

/// Hash a byte string under the given algorithm.
pub fn hash(alg: HashAlg, bytes: &[u8]) -> Digest32 {
    match alg {
        HashAlg::Sha256 => {
            let mut h = Sha256::new();
            h.update(bytes);
            Digest32(h.finalize().into())
        }
        HashAlg::Sha512_256 => {
            let mut h = Sha512_256::new();
            h.update(bytes);
            Digest32(h.finalize().into())
        }
    }
}

/// Hash under the default algorithm (SHA-256).
pub fn sha256(bytes: &[u8]) -> Digest32 {
    hash(HashAlg::Sha256, bytes)
}

/// Append-only writer for canonical bytes.
#[derive(Debug, Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Encoder {
        Encoder { buf: Vec::new() }
    }

    pub fn with_capacity(cap: usize) -> Encoder {
        Encoder {
            buf: Vec::with_capacity(cap),
        }
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_digest(&mut self, d: &Digest32) {
        self.buf.extend_from_slice(&d.0);
    }

    pub fn put_fixed(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Length-prefixed variable field, checked against its maximum.
    pub fn put_var_bytes(
        &mut self,
        field: &'static str,
        bytes: &[u8],
        max: usize,
    ) -> Result<(), CodecError> {
        if bytes.len() > max {
            return Err(CodecError::FieldTooLong {
                field,
                len: bytes.len(),
                max,
            });
        }
        self.put_u32(bytes.len() as u32);
        self.put_fixed(bytes);
        Ok(())
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

/// Strict reader over canonical bytes.
#[derive(Debug)]
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Decoder<'a> {
        Decoder { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::Truncated {
                needed: n,
                remaining: self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn digest(&mut self) -> Result<Digest32, CodecError> {
        Ok(Digest32(self.take(32)?.try_into().unwrap()))
    }

    pub fn fixed<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    /// Length-prefixed variable field, rejecting prefixes beyond `max`.
    pub fn var_bytes(&mut self, field: &'static str, max: usize) -> Result<Vec<u8>, CodecError> {
        let len = self.u32()? as usize;
        if len > max {
            return Err(CodecError::LengthOutOfBounds { field, len, max });
        }
        Ok(self.take(len)?.to_vec())
    }

    /// Asserts the input is fully consumed.
    pub fn finish(self) -> Result<(), CodecError> {
        if self.remaining() != 0 {
            return Err(CodecError::TrailingBytes {
                remaining: self.remaining(),
            });
        }
        Ok(())
    }
}

/// Types with a canonical byte encoding.
pub trait Encodable {
    fn encode_into(&self, enc: &mut Encoder) -> Result<(), CodecError>;

    /// Canonical bytes of this value.
    fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let mut enc = Encoder::new();
        self.encode_into(&mut enc)?;
        Ok(enc.finish())
    }
}

/// Types decodable from canonical bytes. `decode` enforces strict framing.
pub trait Decodable: Sized {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError>;

    fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut dec = Decoder::new(bytes);
        let value = Self::decode_from(&mut dec)?;
        dec.finish()?;
        Ok(value)
    }
}

/// Encode, then hash under `alg`. The commitment primitive.
pub fn hash_encoded<T: Encodable>(alg: HashAlg, value: &T) -> Result<Digest32, CodecError> {
    Ok(hash(alg, &value.encode()?))
}
