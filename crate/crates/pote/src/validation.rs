//! Block acceptance pipeline and multi-vendor finality tracking.
//!
//! There is no fork choice. A proposal either survives the fixed check
//! sequence or is rejected with the reason of the first check that failed:
//!
//! 1. `malformed`            - bytes do not decode, or the embedded quote
//!    does not parse
//! 2. `bad_parent`           - parent hash or height off the local chain
//! 3. `wrong_proposer`       - proposer key or vendor is not the elected one
//! 4. `attestation_invalid`  - quote fails registry verification
//! 5. `commitment_mismatch`  - recomputed commitment differs from the quote
//! 6. `signature_invalid`    - enclave signature does not cover these bytes
//! 7. `freshness_violation`  - quoted height, chain id, or nonce is stale
//!
//! Fixing the order makes rejection reasons deterministic, which the
//! adversary experiments rely on.
//!
//! A surviving candidate then accumulates re-attestations in a
//! [`FinalityTracker`]; the block finalizes irrevocably once quotes from
//! `k` distinct vendors bind its commitment.

use thiserror::Error;

use crate::attestation::{
    AttestationError, AttestationQuote, EnclaveIdentity, QuoteUserData, VendorAuthority, VendorId,
    VendorRegistry, VerifyOutcome,
};
use crate::chain::{
    apply_batch, block_hash, state_commitment, transactions_root, Block, ChainParams, ChainState,
    GenesisInfo,
};
use crate::codec::{
    Decodable, Decoder, Digest32, Encodable, Encoder, CodecError, MAX_CERTIFICATE_QUOTES,
};
use crate::crypto::{self, PublicKey};
use crate::selection::{derive_seed, select_proposer, EnclaveRoster, SelectionError};

/// Everything a validator expects of the next block, derived purely from
/// its finalized chain. Honest nodes at the same height hold equal contexts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundContext {
    pub expected_height: u64,
    pub chain_id: u64,
    /// The round seed value; doubles as the attestation freshness nonce.
    pub expected_nonce: Digest32,
    pub expected_parent_hash: Digest32,
    pub expected_proposer_pubkey: PublicKey,
    pub expected_proposer_vendor: VendorId,
}

impl Encodable for RoundContext {
    fn encode_into(&self, enc: &mut Encoder) -> Result<(), CodecError> {
        enc.put_u64(self.expected_height);
        enc.put_u64(self.chain_id);
        enc.put_digest(&self.expected_nonce);
        enc.put_digest(&self.expected_parent_hash);
        enc.put_fixed(self.expected_proposer_pubkey.as_bytes());
        enc.put_u8(self.expected_proposer_vendor.0);
        Ok(())
    }
}

impl Decodable for RoundContext {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(RoundContext {
            expected_height: dec.u64()?,
            chain_id: dec.u64()?,
            expected_nonce: dec.digest()?,
            expected_parent_hash: dec.digest()?,
            expected_proposer_pubkey: PublicKey(dec.fixed::<32>()?),
            expected_proposer_vendor: VendorId(dec.u8()?),
        })
    }
}

/// Why a block was rejected. Exactly one reason per rejection; the check
/// order above decides which.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RejectReason {
    Malformed,
    BadParent,
    WrongProposer,
    AttestationInvalid,
    CommitmentMismatch,
    SignatureInvalid,
    FreshnessViolation,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::Malformed => "malformed",
            RejectReason::BadParent => "bad_parent",
            RejectReason::WrongProposer => "wrong_proposer",
            RejectReason::AttestationInvalid => "attestation_invalid",
            RejectReason::CommitmentMismatch => "commitment_mismatch",
            RejectReason::SignatureInvalid => "signature_invalid",
            RejectReason::FreshnessViolation => "freshness_violation",
        }
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Accept => f.write_str("accept"),
            Verdict::Reject(reason) => write!(f, "reject({reason})"),
        }
    }
}

/// Run the fixed check sequence against an already-decoded block.
pub fn validate_block(
    params: &ChainParams,
    block: &Block,
    registry: &VendorRegistry,
    ctx: &RoundContext,
) -> Verdict {
    // 1. The embedded quote must parse. Byte-level framing of the block
    //    itself is checked by `validate_block_bytes`.
    let Ok(quote) = block.quote() else {
        return Verdict::Reject(RejectReason::Malformed);
    };

    // 2. Chain position.
    if block.header.parent_hash != ctx.expected_parent_hash
        || block.header.height != ctx.expected_height
    {
        return Verdict::Reject(RejectReason::BadParent);
    }

    // 3. Elected proposer only.
    if block.header.proposer_pubkey != ctx.expected_proposer_pubkey
        || block.header.tee_vendor_id != ctx.expected_proposer_vendor
    {
        return Verdict::Reject(RejectReason::WrongProposer);
    }

    // 4. Vendor attestation.
    if !registry.verify_quote(&quote).is_ok() {
        return Verdict::Reject(RejectReason::AttestationInvalid);
    }

    // 5. The quote must commit to exactly these bytes.
    let Ok(recomputed) = block.commitment(params.hash_alg) else {
        return Verdict::Reject(RejectReason::Malformed);
    };
    if recomputed != quote.user_data.commitment {
        return Verdict::Reject(RejectReason::CommitmentMismatch);
    }

    // 6. The attested enclave must have signed exactly this block.
    let Ok(signing_bytes) = block.signing_bytes() else {
        return Verdict::Reject(RejectReason::Malformed);
    };
    if !crypto::verify_raw(
        &quote.user_data.pk_block,
        &signing_bytes,
        &block.header.enclave_signature,
    ) {
        return Verdict::Reject(RejectReason::SignatureInvalid);
    }

    // 7. Round freshness of the attested metadata.
    if quote.user_data.height != ctx.expected_height
        || quote.user_data.chain_id != ctx.chain_id
        || quote.user_data.nonce != ctx.expected_nonce
    {
        return Verdict::Reject(RejectReason::FreshnessViolation);
    }

    Verdict::Accept
}

/// Entry point for blocks off the wire: strict decode, then the pipeline.
pub fn validate_block_bytes(
    params: &ChainParams,
    bytes: &[u8],
    registry: &VendorRegistry,
    ctx: &RoundContext,
) -> (Option<Block>, Verdict) {
    match Block::decode(bytes) {
        Ok(block) => {
            let verdict = validate_block(params, &block, registry, ctx);
            (Some(block), verdict)
        }
        Err(_) => (None, Verdict::Reject(RejectReason::Malformed)),
    }
}

/// A validator enclave's own quote over an already-proposed block's
/// commitment, contributing its vendor toward the diversity threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReAttestation {
    pub vendor_id: VendorId,
    pub validator_index: u32,
    pub quote: AttestationQuote,
}

impl Encodable for ReAttestation {
    fn encode_into(&self, enc: &mut Encoder) -> Result<(), CodecError> {
        enc.put_u8(self.vendor_id.0);
        enc.put_u32(self.validator_index);
        self.quote.encode_into(enc)
    }
}

impl Decodable for ReAttestation {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(ReAttestation {
            vendor_id: VendorId(dec.u8()?),
            validator_index: dec.u32()?,
            quote: AttestationQuote::decode_from(dec)?,
        })
    }
}

/// Issue this validator's re-attestation for an accepted candidate. The
/// caller must have validated (and re-executed) the block first.
pub fn produce_reattestation(
    block_commitment: Digest32,
    validator: &EnclaveIdentity,
    authority: &VendorAuthority,
    registry: &VendorRegistry,
    ctx: &RoundContext,
    validator_index: u32,
) -> Result<ReAttestation, AttestationError> {
    let user_data = QuoteUserData {
        pk_block: validator.public_key(),
        commitment: block_commitment,
        height: ctx.expected_height,
        chain_id: ctx.chain_id,
        nonce: ctx.expected_nonce,
    };
    let quote = authority.issue_quote(registry, registry.canonical_measurement, user_data)?;
    Ok(ReAttestation {
        vendor_id: validator.vendor_id,
        validator_index,
        quote,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TrackerError {
    #[error("attestation quote failed verification: {0}")]
    InvalidQuote(VerifyOutcome),
    #[error("attestation commits to a different candidate")]
    CommitmentMismatch,
}

/// Accumulates vendor-distinct attestations for one candidate at one height.
#[derive(Debug, Clone)]
pub struct FinalityTracker {
    pub candidate: Digest32,
    pub height: u64,
    collected: Vec<(VendorId, AttestationQuote)>,
    distinct: std::collections::BTreeSet<VendorId>,
    finalized: bool,
}

impl FinalityTracker {
    /// Start tracking a candidate commitment. The proposer's own in-block
    /// quote is the first contribution, so it counts as one vendor.
    pub fn new(candidate: Digest32, height: u64) -> FinalityTracker {
        FinalityTracker {
            candidate,
            height,
            collected: Vec::new(),
            distinct: std::collections::BTreeSet::new(),
            finalized: false,
        }
    }

    pub fn distinct_vendors(&self) -> usize {
        self.distinct.len()
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    pub fn collected(&self) -> &[(VendorId, AttestationQuote)] {
        &self.collected
    }

    /// Record a verified quote binding the candidate. Duplicate vendors
    /// count once toward the distinct total. Returns whether the threshold
    /// is now met.
    pub fn record_quote(
        &mut self,
        quote: &AttestationQuote,
        registry: &VendorRegistry,
    ) -> Result<bool, TrackerError> {
        let outcome = registry.verify_quote(quote);
        if !outcome.is_ok() {
            return Err(TrackerError::InvalidQuote(outcome));
        }
        if quote.user_data.commitment != self.candidate {
            return Err(TrackerError::CommitmentMismatch);
        }
        self.collected.push((quote.vendor_id, quote.clone()));
        self.distinct.insert(quote.vendor_id);
        if self.distinct.len() >= registry.diversity_threshold_k as usize {
            self.finalized = true;
        }
        Ok(self.finalized)
    }

    pub fn record_attestation(
        &mut self,
        att: &ReAttestation,
        registry: &VendorRegistry,
    ) -> Result<bool, TrackerError> {
        self.record_quote(&att.quote, registry)
    }

    /// The justification that travels with a finalized block.
    pub fn certificate(&self) -> FinalityCertificate {
        FinalityCertificate {
            commitment: self.candidate,
            quotes: self.collected.iter().map(|(_, q)| q.clone()).collect(),
        }
    }
}

/// The collected set of quotes from distinct vendors justifying a
/// finalization. Travels alongside the block, outside the header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalityCertificate {
    pub commitment: Digest32,
    pub quotes: Vec<AttestationQuote>,
}

impl FinalityCertificate {
    pub fn distinct_vendors(&self) -> usize {
        self.quotes
            .iter()
            .map(|q| q.vendor_id)
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    }
}

impl Encodable for FinalityCertificate {
    fn encode_into(&self, enc: &mut Encoder) -> Result<(), CodecError> {
        enc.put_digest(&self.commitment);
        enc.put_u32(self.quotes.len() as u32);
        for quote in &self.quotes {
            quote.encode_into(enc)?;
        }
        Ok(())
    }
}

impl Decodable for FinalityCertificate {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let commitment = dec.digest()?;
        let count = dec.u32()?;
        if count > MAX_CERTIFICATE_QUOTES {
            return Err(CodecError::LengthOutOfBounds {
                field: "certificate_quotes",
                len: count as usize,
                max: MAX_CERTIFICATE_QUOTES as usize,
            });
        }
        let mut quotes = Vec::with_capacity(count as usize);
        for _ in 0..count {
            quotes.push(AttestationQuote::decode_from(dec)?);
        }
        Ok(FinalityCertificate { commitment, quotes })
    }
}

/// How a replica advances its state at finalization.
///
/// Both modes verify execution before re-attesting; the flag selects which
/// value is installed as the committed state digest. Their agreement is
/// itself asserted per round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateMode {
    /// Install the commitment of the locally replayed state.
    Reexecute,
    /// Adopt the quote-certified commitment carried by the block.
    AdoptCommitment,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("no finalized candidate at the current height")]
    NotFinalized,
    #[error("height {0} already finalized")]
    AlreadyFinalized(u64),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Outcome of handing a proposal to a replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalOutcome {
    /// Passed every check including execution; candidate adopted.
    Accepted { commitment: Digest32 },
    /// Pipeline rejection with its reason.
    Rejected(RejectReason),
    /// Checks passed but the replayed state does not match the claimed
    /// transition; an honest replica will not re-attest this.
    ExecutionMismatch,
    /// A candidate for this height already exists; proposal ignored.
    Ignored,
}

/// Per-round dual-path state record: the commitment obtained by replaying
/// the batch and the one adopted from the attested block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FinalizedRound {
    pub height: u64,
    pub block_hash: Digest32,
    pub replayed_commitment: Digest32,
    pub adopted_commitment: Digest32,
}

struct PendingCandidate {
    block: Block,
    commitment: Digest32,
    post_state: ChainState,
    skipped: Vec<bool>,
    tracker: FinalityTracker,
}

/// A validator's view of the finalized chain: blocks, certificates, ledger
/// state, and the context the next block must satisfy.
///
/// One replica is owned by one logical validator; nothing here is shared.
pub struct Replica {
    params: ChainParams,
    mode: StateMode,
    state: ChainState,
    committed_state_root: Digest32,
    blocks: Vec<(Block, FinalityCertificate)>,
    ctx: RoundContext,
    pending: Option<PendingCandidate>,
    finalized_rounds: Vec<FinalizedRound>,
}

impl Replica {
    /// Build a replica at genesis and derive the context for height 1.
    pub fn new(
        params: ChainParams,
        genesis: GenesisInfo,
        initial_state: ChainState,
        mode: StateMode,
        roster: &EnclaveRoster,
        registry: &VendorRegistry,
    ) -> Result<Replica, SelectionError> {
        let genesis_hash = genesis.genesis_hash(params.hash_alg);
        let ctx = next_context(&params, genesis_hash, 1, roster, registry)?;
        let committed = state_commitment(params.hash_alg, &initial_state);
        Ok(Replica {
            params,
            mode,
            state: initial_state,
            committed_state_root: committed,
            blocks: Vec::new(),
            ctx,
            pending: None,
            finalized_rounds: Vec::new(),
        })
    }

    pub fn context(&self) -> &RoundContext {
        &self.ctx
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn committed_state_root(&self) -> Digest32 {
        self.committed_state_root
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn blocks(&self) -> &[(Block, FinalityCertificate)] {
        &self.blocks
    }

    pub fn finalized_rounds(&self) -> &[FinalizedRound] {
        &self.finalized_rounds
    }

    pub fn pending_candidate_commitment(&self) -> Option<Digest32> {
        self.pending.as_ref().map(|p| p.commitment)
    }

    pub fn pending_skipped(&self) -> Option<&[bool]> {
        self.pending.as_ref().map(|p| p.skipped.as_slice())
    }

    /// Validate a proposal, re-execute its batch, and adopt it as the
    /// height's candidate when everything matches.
    pub fn consider_proposal(&mut self, block: Block, registry: &VendorRegistry) -> ProposalOutcome {
        if self.pending.is_some() {
            return ProposalOutcome::Ignored;
        }
        let verdict = validate_block(&self.params, &block, registry, &self.ctx);
        if let Verdict::Reject(reason) = verdict {
            return ProposalOutcome::Rejected(reason);
        }

        // Execution re-verification: replay the batch and require the
        // claimed roots to match. A lying but self-consistent block passes
        // the byte checks above; this is where it stops.
        let (post_state, skipped) = apply_batch(&self.state, &block.body.transactions);
        let replayed = state_commitment(self.params.hash_alg, &post_state);
        let tx_root = transactions_root(self.params.hash_alg, &block.body.transactions);
        if replayed != block.body.post_state_commitment
            || replayed != block.header.state_root
            || tx_root != block.header.tx_root
        {
            return ProposalOutcome::ExecutionMismatch;
        }

        let commitment = block
            .commitment(self.params.hash_alg)
            .expect("validated block re-encodes");
        let mut tracker = FinalityTracker::new(commitment, block.header.height);
        let proposer_quote = block.quote().expect("validated block carries a quote");
        tracker
            .record_quote(&proposer_quote, registry)
            .expect("validated proposer quote records");
        self.pending = Some(PendingCandidate {
            block,
            commitment,
            post_state,
            skipped,
            tracker,
        });
        ProposalOutcome::Accepted { commitment }
    }

    /// Feed a re-attestation into the pending tracker. Returns whether the
    /// candidate is now finalizable.
    pub fn record_attestation(
        &mut self,
        att: &ReAttestation,
        registry: &VendorRegistry,
    ) -> Result<bool, TrackerError> {
        let Some(pending) = self.pending.as_mut() else {
            // No candidate yet: nothing to bind against.
            return Err(TrackerError::CommitmentMismatch);
        };
        pending.tracker.record_attestation(att, registry)
    }

    pub fn is_finalizable(&self) -> bool {
        self.pending
            .as_ref()
            .map(|p| p.tracker.is_finalized())
            .unwrap_or(false)
    }

    /// Irrevocably append the finalized candidate, advance state per the
    /// configured mode, and derive the next round context.
    pub fn finalize(
        &mut self,
        roster: &EnclaveRoster,
        registry: &VendorRegistry,
    ) -> Result<FinalizedRound, ChainError> {
        if !self.is_finalizable() {
            return Err(ChainError::NotFinalized);
        }
        let pending = self.pending.take().expect("checked finalizable");
        let certificate = pending.tracker.certificate();
        let hash = block_hash(self.params.hash_alg, &pending.block)?;
        let replayed = state_commitment(self.params.hash_alg, &pending.post_state);
        let adopted = pending.block.body.post_state_commitment;
        let height = pending.block.header.height;

        self.state = pending.post_state;
        self.committed_state_root = match self.mode {
            StateMode::Reexecute => replayed,
            StateMode::AdoptCommitment => adopted,
        };
        self.blocks.push((pending.block, certificate));
        self.ctx = next_context(&self.params, hash, height + 1, roster, registry)?;

        let round = FinalizedRound {
            height,
            block_hash: hash,
            replayed_commitment: replayed,
            adopted_commitment: adopted,
        };
        self.finalized_rounds.push(round);
        Ok(round)
    }
}

/// Context every honest node derives for `height` after finalizing the
/// block hashed `parent_hash`.
pub fn next_context(
    params: &ChainParams,
    parent_hash: Digest32,
    height: u64,
    roster: &EnclaveRoster,
    registry: &VendorRegistry,
) -> Result<RoundContext, SelectionError> {
    let seed = derive_seed(params.hash_alg, parent_hash, height);
    let proposer = select_proposer(params.hash_alg, &seed, roster, registry)?;
    Ok(RoundContext {
        expected_height: height,
        chain_id: params.chain_id,
        expected_nonce: seed.value,
        expected_parent_hash: parent_hash,
        expected_proposer_pubkey: proposer.public_key(),
        expected_proposer_vendor: proposer.vendor_id,
    })
}
