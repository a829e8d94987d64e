//! Long-term identities: mined and attested enrollment, the mock attestation
//! service, and age bookkeeping.

use std::collections::BTreeSet;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::BranchState;
use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::crypto::{hash_parts, verify, Digest, Domain, KeyPair, PublicKey, Signature};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityKind {
    Mined,
    Attested,
}

/// Platform-stable token reported by the attestation service.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pseudonym(pub Digest);

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityRecord {
    pub pk: PublicKey,
    pub enroll_round: u64,
    pub enroll_block: Digest,
    pub enroll_index: u32,
    pub kind: IdentityKind,
    pub pseudonym: Option<Pseudonym>,
    pub last_creation_round: u64,
}

/// Rounds since enrollment or the last block this identity created.
pub fn age(record: &IdentityRecord, current_round: u64) -> u64 {
    debug_assert!(current_round >= record.last_creation_round);
    current_round.saturating_sub(record.last_creation_round)
}

/// Enrollment paid for with `N_r` identity rewards of one creator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MinedEnrollMsg {
    pub reward_blocks: Vec<Digest>,
    pub new_pk: PublicKey,
    pub sig: Signature,
}

impl MinedEnrollMsg {
    /// `sponsor` is the identity that created every block in `reward_blocks`.
    /// The new key may belong to someone else, which is how rewards are sold.
    pub fn new(sponsor: &KeyPair, reward_blocks: Vec<Digest>, new_pk: PublicKey) -> Self {
        let sig = sponsor.sign(Domain::Enroll, &Self::signing_bytes(&reward_blocks, &new_pk));
        MinedEnrollMsg {
            reward_blocks,
            new_pk,
            sig,
        }
    }

    fn signing_bytes(reward_blocks: &[Digest], new_pk: &PublicKey) -> Vec<u8> {
        let mut e = Encoder::new();
        e.list(reward_blocks).pk(new_pk);
        e.finish()
    }

    pub fn verify_sig(&self, sponsor: &PublicKey) -> bool {
        verify(
            sponsor,
            Domain::Enroll,
            &Self::signing_bytes(&self.reward_blocks, &self.new_pk),
            &self.sig,
        )
    }
}

impl Canonical for MinedEnrollMsg {
    fn encode(&self, enc: &mut Encoder) {
        enc.list(&self.reward_blocks).pk(&self.new_pk).sig(&self.sig);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(MinedEnrollMsg {
            reward_blocks: dec.list()?,
            new_pk: dec.pk()?,
            sig: dec.sig()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AttestationQuote {
    pub pseudonym: Pseudonym,
    pub userdata: Digest,
    pub enclave_hash: Digest,
    pub provider_sig: Signature,
}

impl AttestationQuote {
    fn signing_bytes(pseudonym: &Pseudonym, userdata: &Digest, enclave_hash: &Digest) -> Vec<u8> {
        let mut e = Encoder::new();
        e.digest(&pseudonym.0).digest(userdata).digest(enclave_hash);
        e.finish()
    }
}

impl Canonical for AttestationQuote {
    fn encode(&self, enc: &mut Encoder) {
        enc.digest(&self.pseudonym.0)
            .digest(&self.userdata)
            .digest(&self.enclave_hash)
            .sig(&self.provider_sig);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(AttestationQuote {
            pseudonym: Pseudonym(dec.digest()?),
            userdata: dec.digest()?,
            enclave_hash: dec.digest()?,
            provider_sig: dec.sig()?,
        })
    }
}

pub fn verify_quote(provider_pk: &PublicKey, quote: &AttestationQuote) -> bool {
    let msg = AttestationQuote::signing_bytes(&quote.pseudonym, &quote.userdata, &quote.enclave_hash);
    verify(provider_pk, Domain::Quote, &msg, &quote.provider_sig)
}

/// Enrollment of a key generated inside an attested enclave.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AttestedEnrollMsg {
    pub quote: AttestationQuote,
    pub pk: PublicKey,
    pub round: u64,
    pub branch_hash: Digest,
    pub reenroll: bool,
}

/// The USERDATA value an enclave must bind into its quote.
pub fn attested_userdata(chain_id: &Digest, pk: &PublicKey, round: u64, branch_hash: &Digest) -> Digest {
    hash_parts(&[&chain_id.0, &pk.0, &round.to_be_bytes(), &branch_hash.0])
}

impl Canonical for AttestedEnrollMsg {
    fn encode(&self, enc: &mut Encoder) {
        self.quote.encode(enc);
        enc.pk(&self.pk).u64(self.round).digest(&self.branch_hash).bool(self.reenroll);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(AttestedEnrollMsg {
            quote: AttestationQuote::decode(dec)?,
            pk: dec.pk()?,
            round: dec.u64()?,
            branch_hash: dec.digest()?,
            reenroll: dec.bool()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EnrollMsg {
    Mined(MinedEnrollMsg),
    Attested(AttestedEnrollMsg),
}

impl EnrollMsg {
    /// Key being enrolled.
    pub fn new_pk(&self) -> PublicKey {
        match self {
            EnrollMsg::Mined(m) => m.new_pk,
            EnrollMsg::Attested(a) => a.pk,
        }
    }

    pub fn digest(&self) -> Digest {
        crate::crypto::hash(&self.to_bytes())
    }
}

impl Canonical for EnrollMsg {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            EnrollMsg::Mined(m) => {
                enc.u8(1);
                m.encode(enc);
            }
            EnrollMsg::Attested(a) => {
                enc.u8(2);
                a.encode(enc);
            }
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let offset = dec.position();
        match dec.u8()? {
            1 => Ok(EnrollMsg::Mined(MinedEnrollMsg::decode(dec)?)),
            2 => Ok(EnrollMsg::Attested(AttestedEnrollMsg::decode(dec)?)),
            tag => Err(DecodeError::BadTag { tag, offset }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnrollReject {
    #[error("reward digest does not name a block on this branch")]
    UnknownBlock,
    #[error("reward block already spent on an earlier enrollment")]
    ReusedReward,
    #[error("reward blocks were created by different identities")]
    MixedCreators,
    #[error("sponsor signature does not verify")]
    BadSignature,
    #[error("expected {expected} distinct reward digests, got {got}")]
    RewardCount { expected: u32, got: u32 },
    #[error("key is already enrolled")]
    DuplicateKey,
    #[error("attestation provider signature does not verify")]
    BadProviderSig,
    #[error("quote userdata does not bind this chain, key, round and branch")]
    BindingMismatch,
    #[error("enclave hash differs from the genesis enclave")]
    WrongEnclave,
    #[error("platform pseudonym already enrolled")]
    DuplicatePseudonym,
    #[error("re-enrollment does not match an existing record")]
    ReenrollMismatch,
    #[error("chain has no attestation provider")]
    NoProvider,
}

/// Checks a mined enrollment against a verified branch.
pub fn validate_mined_enrollment(
    branch: &BranchState,
    msg: &MinedEnrollMsg,
    reward_cost: u32,
) -> Result<(), EnrollReject> {
    let distinct: BTreeSet<_> = msg.reward_blocks.iter().collect();
    if msg.reward_blocks.len() != reward_cost as usize || distinct.len() != msg.reward_blocks.len() {
        return Err(EnrollReject::RewardCount {
            expected: reward_cost,
            got: distinct.len() as u32,
        });
    }
    let mut creator = None;
    for h in &msg.reward_blocks {
        let meta = branch.block_meta(h).ok_or(EnrollReject::UnknownBlock)?;
        if meta.reward_spent {
            return Err(EnrollReject::ReusedReward);
        }
        match creator {
            None => creator = Some(meta.creator),
            Some(c) if c != meta.creator => return Err(EnrollReject::MixedCreators),
            Some(_) => {}
        }
    }
    let sponsor = branch.identity(creator.expect("reward_cost >= 1")).record.pk;
    if !msg.verify_sig(&sponsor) {
        return Err(EnrollReject::BadSignature);
    }
    if branch.id_of(&msg.new_pk).is_some() {
        return Err(EnrollReject::DuplicateKey);
    }
    Ok(())
}

/// Checks an attested enrollment against a verified branch.
pub fn validate_attested_enrollment(
    branch: &BranchState,
    msg: &AttestedEnrollMsg,
    provider_pk: Option<&PublicKey>,
) -> Result<(), EnrollReject> {
    let provider_pk = provider_pk.ok_or(EnrollReject::NoProvider)?;
    if !verify_quote(provider_pk, &msg.quote) {
        return Err(EnrollReject::BadProviderSig);
    }
    let expected = attested_userdata(&branch.chain_id, &msg.pk, msg.round, &msg.branch_hash);
    if msg.quote.userdata != expected || !branch.contains_block(&msg.branch_hash) {
        return Err(EnrollReject::BindingMismatch);
    }
    if msg.quote.enclave_hash != branch.genesis().enclave_hash {
        return Err(EnrollReject::WrongEnclave);
    }
    let existing = branch.id_of(&msg.pk);
    let holder = branch.pseudonym_holder(&msg.quote.pseudonym);
    if msg.reenroll {
        match (existing, holder) {
            (Some(id), Some(h)) if id == h => Ok(()),
            _ => Err(EnrollReject::ReenrollMismatch),
        }
    } else if holder.is_some() {
        Err(EnrollReject::DuplicatePseudonym)
    } else if existing.is_some() {
        Err(EnrollReject::DuplicateKey)
    } else {
        Ok(())
    }
}

pub type PlatformId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IasError {
    #[error("platform {0} is not registered")]
    UnknownPlatform(PlatformId),
}

/// Stand-in for a remote attestation service with linkable quotes.
#[derive(Clone, Debug)]
pub struct MockIas {
    keys: KeyPair,
    pseudonym_key: [u8; 32],
    platforms: BTreeSet<PlatformId>,
}

impl MockIas {
    pub fn new(seed: [u8; 32]) -> Self {
        let keys = KeyPair::from_seed(seed);
        let pseudonym_key = hash_parts(&[b"pseudonym-key", &seed]).0;
        MockIas {
            keys,
            pseudonym_key,
            platforms: BTreeSet::new(),
        }
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.public()
    }

    pub fn register_platform(&mut self, platform: PlatformId) {
        self.platforms.insert(platform);
    }

    pub fn pseudonym(&self, platform: PlatformId) -> Pseudonym {
        Pseudonym(hash_parts(&[
            &[Domain::Pseudonym as u8],
            &self.pseudonym_key,
            &platform.to_be_bytes(),
        ]))
    }

    pub fn issue_quote(
        &self,
        platform: PlatformId,
        userdata: Digest,
        enclave_hash: Digest,
    ) -> Result<AttestationQuote, IasError> {
        if !self.platforms.contains(&platform) {
            return Err(IasError::UnknownPlatform(platform));
        }
        let pseudonym = self.pseudonym(platform);
        let provider_sig = self.keys.sign(
            Domain::Quote,
            &AttestationQuote::signing_bytes(&pseudonym, &userdata, &enclave_hash),
        );
        Ok(AttestationQuote {
            pseudonym,
            userdata,
            enclave_hash,
            provider_sig,
        })
    }
}

/// A solved identity puzzle from the preliminary PoW phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitBlock {
    pub pk: PublicKey,
    pub nonce: u64,
    /// Hashes evaluated to find `nonce`.
    pub attempts: u64,
}

pub fn pow_hash(pk: &PublicKey, nonce: u64) -> Digest {
    hash_parts(&[&[Domain::Pow as u8], &pk.0, &nonce.to_be_bytes()])
}

/// Searches nonces from a random start until `pow_hash(pk, nonce) <= target`.
pub fn mine_initial_identity<R: RngCore + ?Sized>(target: &Digest, pk: PublicKey, rng: &mut R) -> InitBlock {
    let mut nonce = rng.next_u64();
    let mut attempts = 1;
    while pow_hash(&pk, nonce) > *target {
        nonce = nonce.wrapping_add(1);
        attempts += 1;
    }
    InitBlock { pk, nonce, attempts }
}
