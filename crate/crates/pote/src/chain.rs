//! The canonical deterministic program: a flat account ledger, its
//! measurement, block assembly, and hash chaining.
//!
//! The ledger is deliberately simple. Accounts are 32-byte ids mapping to a
//! balance and a nonce; a transaction moves `amount` from one account to
//! another. Invalid transactions are skipped, not errors: the skip decision
//! is part of the deterministic execution and is recorded in a bitmap so
//! every honest replica produces the same post-state *and* the same skips.
//!
//! Block wire layout (header then body):
//!
//! ```text
//! parent_hash (32B) || state_root (32B) || tx_root (32B)
//!   || timestamp_ms (8B LE) || height (8B LE) || chain_id (8B LE)
//!   || proposer_pubkey (32B) || tee_vendor_id (1B)
//!   || quote_len (4B LE) || attestation_quote (<= 8192B)
//!   || sig_len (4B LE) || enclave_signature (<= 96B)
//! body: tx_count (4B LE) || transactions || post_state_commitment (32B)
//! ```
//!
//! Three byte ranges matter downstream:
//!
//! - **commitment bytes**: the block with quote and signature blanked. The
//!   quote embeds this digest, so it cannot cover itself.
//! - **signing bytes**: the block with the quote embedded and the signature
//!   blanked. The enclave signature covers the quote it shipped with.
//! - **block hash**: the full sealed block, chaining into the next header.

use std::collections::BTreeMap;

use crate::attestation::{
    AttestationError, AttestationQuote, EnclaveIdentity, QuoteUserData, VendorAuthority, VendorId,
    VendorRegistry,
};
use crate::codec::{
    hash, Decodable, Decoder, Digest32, Encodable, Encoder, CodecError, HashAlg,
    MAX_BLOCK_TRANSACTIONS, MAX_PROGRAM_NAME_BYTES, MAX_QUOTE_BYTES, MAX_SIGNATURE_BYTES,
    MAX_STATE_ACCOUNTS,
};
use crate::crypto::PublicKey;

/// Fixed encoded size of one transaction.
pub const TRANSACTION_BYTES: usize = 80;

/// Chain-wide parameters every operation needs: the chain id and which hash
/// algorithm commits state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainParams {
    pub chain_id: u64,
    pub hash_alg: HashAlg,
}

/// 32-byte account identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccountId(pub [u8; 32]);

impl AccountId {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<AccountId> {
        let raw = hex::decode(s).ok()?;
        Some(AccountId(raw.try_into().ok()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Account {
    pub balance: u64,
    pub next_nonce: u64,
}

/// A value transfer. `tx_nonce` must equal the sender's `next_nonce` for the
/// transfer to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transaction {
    pub from: AccountId,
    pub to: AccountId,
    pub amount: u64,
    pub tx_nonce: u64,
}

impl Encodable for Transaction {
    fn encode_into(&self, enc: &mut Encoder) -> Result<(), CodecError> {
        enc.put_fixed(&self.from.0);
        enc.put_fixed(&self.to.0);
        enc.put_u64(self.amount);
        enc.put_u64(self.tx_nonce);
        Ok(())
    }
}

impl Decodable for Transaction {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Transaction {
            from: AccountId(dec.fixed::<32>()?),
            to: AccountId(dec.fixed::<32>()?),
            amount: dec.u64()?,
            tx_nonce: dec.u64()?,
        })
    }
}

/// The deterministic ledger state. A `BTreeMap` keeps iteration sorted by
/// account id, so the canonical encoding needs no extra normalization.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChainState {
    accounts: BTreeMap<AccountId, Account>,
}

impl ChainState {
    pub fn new() -> ChainState {
        ChainState::default()
    }

    pub fn with_accounts(entries: impl IntoIterator<Item = (AccountId, Account)>) -> ChainState {
        ChainState {
            accounts: entries.into_iter().collect(),
        }
    }

    pub fn account(&self, id: &AccountId) -> Option<&Account> {
        self.accounts.get(id)
    }

    pub fn balance(&self, id: &AccountId) -> u64 {
        self.accounts.get(id).map(|a| a.balance).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.accounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accounts.is_empty()
    }

    pub fn total_balance(&self) -> u128 {
        self.accounts.values().map(|a| a.balance as u128).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AccountId, &Account)> {
        self.accounts.iter()
    }
}

impl Encodable for ChainState {
    fn encode_into(&self, enc: &mut Encoder) -> Result<(), CodecError> {
        enc.put_u32(self.accounts.len() as u32);
        for (id, account) in &self.accounts {
            enc.put_fixed(&id.0);
            enc.put_u64(account.balance);
            enc.put_u64(account.next_nonce);
        }
        Ok(())
    }
}

impl Decodable for ChainState {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let count = dec.u32()?;
        if count > MAX_STATE_ACCOUNTS {
            return Err(CodecError::LengthOutOfBounds {
                field: "account_count",
                len: count as usize,
                max: MAX_STATE_ACCOUNTS as usize,
            });
        }
        let mut accounts = BTreeMap::new();
        for _ in 0..count {
            let id = AccountId(dec.fixed::<32>()?);
            let balance = dec.u64()?;
            let next_nonce = dec.u64()?;
            accounts.insert(id, Account { balance, next_nonce });
        }
        Ok(ChainState { accounts })
    }
}

/// Commitment to a state: hash of the canonical (id-sorted) encoding.
pub fn state_commitment(alg: HashAlg, state: &ChainState) -> Digest32 {
    hash(alg, &state.encode().expect("state encoding is infallible"))
}

/// Apply a batch strictly in order. A transaction applies iff the sender
/// exists, its nonce matches, the balance covers the amount, and the credit
/// does not overflow the recipient; otherwise it is skipped. The returned
/// bitmap holds `true` at skipped positions.
pub fn apply_batch(state: &ChainState, txs: &[Transaction]) -> (ChainState, Vec<bool>) {
    let mut next = state.clone();
    let mut skipped = Vec::with_capacity(txs.len());
    for tx in txs {
        skipped.push(!apply_one(&mut next, tx));
    }
    (next, skipped)
}

fn apply_one(state: &mut ChainState, tx: &Transaction) -> bool {
    let Some(sender) = state.accounts.get(&tx.from) else {
        return false;
    };
    if sender.next_nonce != tx.tx_nonce || sender.balance < tx.amount {
        return false;
    }
    let debited = sender.balance - tx.amount;
    // Credit overflow would mint or burn depending on how it wrapped, so
    // such a transfer is skipped outright.
    let recipient_balance = if tx.to == tx.from {
        debited
    } else {
        state.balance(&tx.to)
    };
    let Some(credited) = recipient_balance.checked_add(tx.amount) else {
        return false;
    };
    {
        let sender = state.accounts.get_mut(&tx.from).expect("checked above");
        sender.balance = debited;
        sender.next_nonce += 1;
    }
    let recipient = state.accounts.entry(tx.to).or_default();
    recipient.balance = credited;
    true
}

/// Root over the ordered transaction list: hash of `count || txs`.
pub fn transactions_root(alg: HashAlg, txs: &[Transaction]) -> Digest32 {
    let mut enc = Encoder::with_capacity(4 + txs.len() * TRANSACTION_BYTES);
    enc.put_u32(txs.len() as u32);
    for tx in txs {
        tx.encode_into(&mut enc).expect("transaction encoding is infallible");
    }
    hash(alg, &enc.finish())
}

/// Identifies the canonical program. Its encoded hash is the code
/// measurement the registry anchors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramDescriptor {
    pub name: String,
    pub version: u32,
    pub rule_flags: u64,
}

impl Encodable for ProgramDescriptor {
    fn encode_into(&self, enc: &mut Encoder) -> Result<(), CodecError> {
        if !self.name.is_ascii() {
            return Err(CodecError::InvalidValue {
                field: "program_name",
                value: 0,
            });
        }
        enc.put_var_bytes("program_name", self.name.as_bytes(), MAX_PROGRAM_NAME_BYTES)?;
        enc.put_u32(self.version);
        enc.put_u64(self.rule_flags);
        Ok(())
    }
}

impl Decodable for ProgramDescriptor {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let raw = dec.var_bytes("program_name", MAX_PROGRAM_NAME_BYTES)?;
        let name = String::from_utf8(raw.clone()).ok().filter(|s| s.is_ascii()).ok_or(
            CodecError::InvalidValue {
                field: "program_name",
                value: 0,
            },
        )?;
        Ok(ProgramDescriptor {
            name,
            version: dec.u32()?,
            rule_flags: dec.u64()?,
        })
    }
}

/// The code measurement: hash of the encoded descriptor.
pub fn measure_program(alg: HashAlg, descriptor: &ProgramDescriptor) -> Result<Digest32, CodecError> {
    Ok(hash(alg, &descriptor.encode()?))
}

/// Block header. `attestation_quote` and `enclave_signature` are empty until
/// the block is sealed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockHeader {
    pub parent_hash: Digest32,
    pub state_root: Digest32,
    pub tx_root: Digest32,
    pub timestamp_ms: u64,
    pub height: u64,
    pub chain_id: u64,
    pub proposer_pubkey: PublicKey,
    pub tee_vendor_id: VendorId,
    pub attestation_quote: Vec<u8>,
    pub enclave_signature: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockBody {
    pub transactions: Vec<Transaction>,
    pub post_state_commitment: Digest32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub body: BlockBody,
}

impl Block {
    fn encode_parts(&self, quote: &[u8], signature: &[u8]) -> Result<Vec<u8>, CodecError> {
        let mut enc = Encoder::with_capacity(
            161 + quote.len() + signature.len() + self.body.transactions.len() * TRANSACTION_BYTES + 36,
        );
        enc.put_digest(&self.header.parent_hash);
        enc.put_digest(&self.header.state_root);
        enc.put_digest(&self.header.tx_root);
        enc.put_u64(self.header.timestamp_ms);
        enc.put_u64(self.header.height);
        enc.put_u64(self.header.chain_id);
        enc.put_fixed(self.header.proposer_pubkey.as_bytes());
        enc.put_u8(self.header.tee_vendor_id.0);
        enc.put_var_bytes("attestation_quote", quote, MAX_QUOTE_BYTES)?;
        enc.put_var_bytes("enclave_signature", signature, MAX_SIGNATURE_BYTES)?;
        enc.put_u32(self.body.transactions.len() as u32);
        for tx in &self.body.transactions {
            tx.encode_into(&mut enc)?;
        }
        enc.put_digest(&self.body.post_state_commitment);
        Ok(enc.finish())
    }

    /// Bytes covered by the quote's commitment: quote and signature blanked.
    pub fn commitment_bytes(&self) -> Result<Vec<u8>, CodecError> {
        self.encode_parts(&[], &[])
    }

    /// Bytes covered by the enclave signature: quote embedded, signature
    /// blanked.
    pub fn signing_bytes(&self) -> Result<Vec<u8>, CodecError> {
        self.encode_parts(&self.header.attestation_quote, &[])
    }

    /// The commitment the sealing quote must carry.
    pub fn commitment(&self, alg: HashAlg) -> Result<Digest32, CodecError> {
        Ok(hash(alg, &self.commitment_bytes()?))
    }

    pub fn is_sealed(&self) -> bool {
        !self.header.attestation_quote.is_empty() && !self.header.enclave_signature.is_empty()
    }

    /// Decoded embedded quote, if the block is sealed.
    pub fn quote(&self) -> Result<AttestationQuote, CodecError> {
        AttestationQuote::decode(&self.header.attestation_quote)
    }
}

impl Encodable for Block {
    fn encode_into(&self, enc: &mut Encoder) -> Result<(), CodecError> {
        let bytes = self.encode_parts(
            &self.header.attestation_quote,
            &self.header.enclave_signature,
        )?;
        enc.put_fixed(&bytes);
        Ok(())
    }
}

impl Decodable for Block {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let parent_hash = dec.digest()?;
        let state_root = dec.digest()?;
        let tx_root = dec.digest()?;
        let timestamp_ms = dec.u64()?;
        let height = dec.u64()?;
        let chain_id = dec.u64()?;
        let proposer_pubkey = PublicKey(dec.fixed::<32>()?);
        let tee_vendor_id = VendorId(dec.u8()?);
        let attestation_quote = dec.var_bytes("attestation_quote", MAX_QUOTE_BYTES)?;
        let enclave_signature = dec.var_bytes("enclave_signature", MAX_SIGNATURE_BYTES)?;
        let tx_count = dec.u32()?;
        if tx_count > MAX_BLOCK_TRANSACTIONS {
            return Err(CodecError::LengthOutOfBounds {
                field: "tx_count",
                len: tx_count as usize,
                max: MAX_BLOCK_TRANSACTIONS as usize,
            });
        }
        let mut transactions = Vec::with_capacity(tx_count.min(1 << 16) as usize);
        for _ in 0..tx_count {
            transactions.push(Transaction::decode_from(dec)?);
        }
        let post_state_commitment = dec.digest()?;
        Ok(Block {
            header: BlockHeader {
                parent_hash,
                state_root,
                tx_root,
                timestamp_ms,
                height,
                chain_id,
                proposer_pubkey,
                tee_vendor_id,
                attestation_quote,
                enclave_signature,
            },
            body: BlockBody {
                transactions,
                post_state_commitment,
            },
        })
    }
}

/// Hash of the full sealed block; the successor's `parent_hash` and the
/// public input to the next round seed.
pub fn block_hash(alg: HashAlg, block: &Block) -> Result<Digest32, CodecError> {
    Ok(hash(alg, &block.encode()?))
}

/// What a new block chains from: either the genesis anchor or a sealed
/// predecessor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParentRef {
    pub hash: Digest32,
    pub height: u64,
}

impl ParentRef {
    pub fn from_block(alg: HashAlg, parent: &Block) -> Result<ParentRef, CodecError> {
        Ok(ParentRef {
            hash: block_hash(alg, parent)?,
            height: parent.header.height,
        })
    }
}

/// Result of deterministic block construction.
#[derive(Debug, Clone)]
pub struct BuiltBlock {
    pub block: Block,
    pub post_state: ChainState,
    pub skipped: Vec<bool>,
}

/// Execute the batch against `state` and assemble an unsealed block.
pub fn build_block(
    params: &ChainParams,
    parent: ParentRef,
    state: &ChainState,
    txs: Vec<Transaction>,
    timestamp_ms: u64,
    proposer: &EnclaveIdentity,
) -> BuiltBlock {
    let (post_state, skipped) = apply_batch(state, &txs);
    let post_commitment = state_commitment(params.hash_alg, &post_state);
    let tx_root = transactions_root(params.hash_alg, &txs);
    let block = Block {
        header: BlockHeader {
            parent_hash: parent.hash,
            state_root: post_commitment,
            tx_root,
            timestamp_ms,
            height: parent.height + 1,
            chain_id: params.chain_id,
            proposer_pubkey: proposer.public_key(),
            tee_vendor_id: proposer.vendor_id,
            attestation_quote: Vec::new(),
            enclave_signature: Vec::new(),
        },
        body: BlockBody {
            transactions: txs,
            post_state_commitment: post_commitment,
        },
    };
    BuiltBlock {
        block,
        post_state,
        skipped,
    }
}

/// Seal an unsealed block: obtain the vendor quote over its commitment,
/// then sign the quote-embedded block with the enclave key.
pub fn seal_block(
    params: &ChainParams,
    block: Block,
    proposer: &EnclaveIdentity,
    authority: &VendorAuthority,
    registry: &VendorRegistry,
    round_nonce: Digest32,
) -> Result<Block, SealError> {
    seal_block_with_measurement(
        params,
        block,
        proposer,
        authority,
        registry,
        registry.canonical_measurement,
        round_nonce,
    )
}

/// Sealing variant with an explicit measurement claim. Honest proposers
/// claim the canonical measurement; tests and adversary models may not.
pub fn seal_block_with_measurement(
    params: &ChainParams,
    mut block: Block,
    proposer: &EnclaveIdentity,
    authority: &VendorAuthority,
    registry: &VendorRegistry,
    measurement: Digest32,
    round_nonce: Digest32,
) -> Result<Block, SealError> {
    let commitment = block.commitment(params.hash_alg)?;
    let user_data = QuoteUserData {
        pk_block: proposer.public_key(),
        commitment,
        height: block.header.height,
        chain_id: block.header.chain_id,
        nonce: round_nonce,
    };
    let quote = authority.issue_quote(registry, measurement, user_data)?;
    block.header.attestation_quote = quote.encode()?;
    let signature = proposer.block_keypair.sign(&block.signing_bytes()?);
    block.header.enclave_signature = signature.to_vec();
    Ok(block)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SealError {
    #[error(transparent)]
    Attestation(#[from] AttestationError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// The public anchor a chain starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenesisInfo {
    pub chain_id: u64,
    pub program_measurement: Digest32,
    pub initial_state_commitment: Digest32,
    pub diversity_threshold_k: u8,
}

impl GenesisInfo {
    /// Hash anchoring the chain: parent of block 1 and input to the first
    /// round seed.
    pub fn genesis_hash(&self, alg: HashAlg) -> Digest32 {
        let mut enc = Encoder::with_capacity(16 + 8 + 32 + 32 + 1);
        enc.put_fixed(b"POTE_GENESIS_V1");
        enc.put_u64(self.chain_id);
        enc.put_digest(&self.program_measurement);
        enc.put_digest(&self.initial_state_commitment);
        enc.put_u8(self.diversity_threshold_k);
        hash(alg, &enc.finish())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::sha256;
    use crate::crypto::keygen;

    fn acct(label: u8) -> AccountId {
        AccountId([label; 32])
    }

    fn params() -> ChainParams {
        ChainParams {
            chain_id: 7,
            hash_alg: HashAlg::Sha256,
        }
    }

    fn two_account_state() -> ChainState {
        ChainState::with_accounts([
            (acct(0xaa), Account { balance: 10, next_nonce: 0 }),
            (acct(0xbb), Account { balance: 0, next_nonce: 0 }),
        ])
    }

    #[test]
    fn transaction_is_80_bytes() {
        let tx = Transaction {
            from: acct(1),
            to: acct(2),
            amount: 5,
            tx_nonce: 0,
        };
        assert_eq!(tx.encode().unwrap().len(), TRANSACTION_BYTES);
    }

    #[test]
    fn empty_batch_is_identity() {
        let state = two_account_state();
        let (next, skipped) = apply_batch(&state, &[]);
        assert_eq!(next, state);
        assert!(skipped.is_empty());
    }

    #[test]
    fn sequential_transfers_apply_in_order() {
        let state = two_account_state();
        let txs = [
            Transaction { from: acct(0xaa), to: acct(0xbb), amount: 4, tx_nonce: 0 },
            Transaction { from: acct(0xaa), to: acct(0xbb), amount: 4, tx_nonce: 1 },
        ];
        let (next, skipped) = apply_batch(&state, &txs);
        assert_eq!(skipped, vec![false, false]);
        assert_eq!(next.balance(&acct(0xaa)), 2);
        assert_eq!(next.balance(&acct(0xbb)), 8);
        assert_eq!(next.account(&acct(0xaa)).unwrap().next_nonce, 2);
    }

    #[test]
    fn insufficient_balance_is_skipped() {
        let state = two_account_state();
        let txs = [Transaction { from: acct(0xaa), to: acct(0xbb), amount: 11, tx_nonce: 0 }];
        let (next, skipped) = apply_batch(&state, &txs);
        assert_eq!(skipped, vec![true]);
        assert_eq!(next, state);
    }

    #[test]
    fn wrong_nonce_and_missing_sender_are_skipped() {
        let state = two_account_state();
        let txs = [
            Transaction { from: acct(0xaa), to: acct(0xbb), amount: 1, tx_nonce: 5 },
            Transaction { from: acct(0xcc), to: acct(0xbb), amount: 1, tx_nonce: 0 },
        ];
        let (next, skipped) = apply_batch(&state, &txs);
        assert_eq!(skipped, vec![true, true]);
        assert_eq!(next, state);
    }

    #[test]
    fn recipient_overflow_is_skipped() {
        let state = ChainState::with_accounts([
            (acct(1), Account { balance: 5, next_nonce: 0 }),
            (acct(2), Account { balance: u64::MAX, next_nonce: 0 }),
        ]);
        let txs = [Transaction { from: acct(1), to: acct(2), amount: 1, tx_nonce: 0 }];
        let (next, skipped) = apply_batch(&state, &txs);
        assert_eq!(skipped, vec![true]);
        assert_eq!(next, state);
    }

    #[test]
    fn self_transfer_keeps_balance_and_bumps_nonce() {
        let state = two_account_state();
        let txs = [Transaction { from: acct(0xaa), to: acct(0xaa), amount: 7, tx_nonce: 0 }];
        let (next, skipped) = apply_batch(&state, &txs);
        assert_eq!(skipped, vec![false]);
        assert_eq!(next.balance(&acct(0xaa)), 10);
        assert_eq!(next.account(&acct(0xaa)).unwrap().next_nonce, 1);
    }

    #[test]
    fn conservation_over_batch() {
        let state = two_account_state();
        let txs = [
            Transaction { from: acct(0xaa), to: acct(0xbb), amount: 3, tx_nonce: 0 },
            Transaction { from: acct(0xbb), to: acct(0xcc), amount: 2, tx_nonce: 0 },
            Transaction { from: acct(0xaa), to: acct(0xdd), amount: 99, tx_nonce: 1 },
        ];
        let (next, _) = apply_batch(&state, &txs);
        assert_eq!(next.total_balance(), state.total_balance());
    }

    #[test]
    fn empty_state_commitment_is_hash_of_zero_count() {
        assert_eq!(
            state_commitment(HashAlg::Sha256, &ChainState::new()),
            sha256(&[0, 0, 0, 0])
        );
    }

    #[test]
    fn state_commitment_ignores_insertion_order() {
        let forward = ChainState::with_accounts([
            (acct(1), Account { balance: 1, next_nonce: 0 }),
            (acct(2), Account { balance: 2, next_nonce: 0 }),
        ]);
        let backward = ChainState::with_accounts([
            (acct(2), Account { balance: 2, next_nonce: 0 }),
            (acct(1), Account { balance: 1, next_nonce: 0 }),
        ]);
        assert_eq!(
            state_commitment(HashAlg::Sha256, &forward),
            state_commitment(HashAlg::Sha256, &backward)
        );
    }

    #[test]
    fn empty_tx_root_is_hash_of_zero_count() {
        assert_eq!(
            transactions_root(HashAlg::Sha256, &[]),
            sha256(&[0, 0, 0, 0])
        );
    }

    #[test]
    fn measure_program_is_deterministic_and_version_sensitive() {
        let d1 = ProgramDescriptor { name: "pote-ledger".into(), version: 1, rule_flags: 0 };
        let d2 = ProgramDescriptor { name: "pote-ledger".into(), version: 2, rule_flags: 0 };
        assert_eq!(
            measure_program(HashAlg::Sha256, &d1).unwrap(),
            measure_program(HashAlg::Sha256, &d1).unwrap()
        );
        assert_ne!(
            measure_program(HashAlg::Sha256, &d1).unwrap(),
            measure_program(HashAlg::Sha256, &d2).unwrap()
        );
    }

    #[test]
    fn non_ascii_program_name_rejected() {
        let d = ProgramDescriptor { name: "pöte".into(), version: 1, rule_flags: 0 };
        assert!(measure_program(HashAlg::Sha256, &d).is_err());
    }

    fn test_enclave() -> EnclaveIdentity {
        EnclaveIdentity {
            vendor_id: VendorId(1),
            enclave_index: 0,
            block_keypair: keygen(&sha256(b"test enclave")),
        }
    }

    #[test]
    fn unsealed_header_with_zero_fields_encodes_to_zeroes() {
        // 32*3 digests + 8*3 integers + 32 pubkey + 1 vendor + 4 quote_len
        // + 4 sig_len = 161 header bytes, then 4 tx_count + 32 commitment.
        let block = Block {
            header: BlockHeader {
                parent_hash: Digest32::ZERO,
                state_root: Digest32::ZERO,
                tx_root: Digest32::ZERO,
                timestamp_ms: 0,
                height: 0,
                chain_id: 0,
                proposer_pubkey: PublicKey([0; 32]),
                tee_vendor_id: VendorId(0),
                attestation_quote: Vec::new(),
                enclave_signature: Vec::new(),
            },
            body: BlockBody {
                transactions: Vec::new(),
                post_state_commitment: Digest32::ZERO,
            },
        };
        let bytes = block.encode().unwrap();
        assert_eq!(bytes.len(), 161 + 4 + 32);
        assert!(bytes.iter().all(|&b| b == 0));
    }

    #[test]
    fn build_block_populates_roots() {
        let p = params();
        let state = two_account_state();
        let genesis = GenesisInfo {
            chain_id: p.chain_id,
            program_measurement: sha256(b"prog"),
            initial_state_commitment: state_commitment(p.hash_alg, &state),
            diversity_threshold_k: 3,
        };
        let parent = ParentRef { hash: genesis.genesis_hash(p.hash_alg), height: 0 };
        let built = build_block(&p, parent, &state, Vec::new(), 1234, &test_enclave());
        assert_eq!(built.block.header.height, 1);
        assert_eq!(built.block.header.state_root, state_commitment(p.hash_alg, &state));
        assert_eq!(built.block.header.tx_root, sha256(&[0, 0, 0, 0]));
        assert_eq!(built.block.header.state_root, built.block.body.post_state_commitment);
        assert!(!built.block.is_sealed());
    }

    #[test]
    fn block_codec_round_trip_and_strict_framing() {
        let p = params();
        let state = two_account_state();
        let parent = ParentRef { hash: sha256(b"parent"), height: 3 };
        let txs = vec![
            Transaction { from: acct(0xaa), to: acct(0xbb), amount: 1, tx_nonce: 0 },
            Transaction { from: acct(0xaa), to: acct(0xbb), amount: 2, tx_nonce: 1 },
        ];
        let built = build_block(&p, parent, &state, txs, 99, &test_enclave());
        let bytes = built.block.encode().unwrap();
        assert_eq!(Block::decode(&bytes).unwrap(), built.block);

        let mut extended = bytes.clone();
        extended.push(0);
        assert!(matches!(
            Block::decode(&extended),
            Err(CodecError::TrailingBytes { .. })
        ));
        assert!(Block::decode(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn timestamp_changes_block_hash() {
        let p = params();
        let state = two_account_state();
        let parent = ParentRef { hash: sha256(b"parent"), height: 0 };
        let a = build_block(&p, parent, &state, Vec::new(), 1, &test_enclave()).block;
        let b = build_block(&p, parent, &state, Vec::new(), 2, &test_enclave()).block;
        assert_ne!(block_hash(p.hash_alg, &a).unwrap(), block_hash(p.hash_alg, &b).unwrap());
    }
}
