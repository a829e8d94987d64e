use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::chain::{Block, BranchState, ConfirmMsg, GenesisConfig, IdentityId, SealedBlock};
use crate::crypto::{Digest, PublicKey};
use crate::identity::EnrollReject;
use crate::params::ProtocolParams;
use crate::selection::{round_selection, RoundSelection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvalidReason {
    #[error("does not extend the branch tip in a later round")]
    Linkage,
    #[error("leader was not a candidate for the round")]
    NotCandidate,
    #[error("transactions do not match the intent")]
    TxMismatch,
    #[error("invalid or duplicate endorsement")]
    BadEndorsement,
    #[error("confirmation weight below quorum")]
    QuorumShort,
    #[error("seed proof does not verify")]
    BadVrf,
    #[error("invalid enrollment: {0}")]
    BadEnroll(EnrollReject),
    #[error("intent or block signature does not verify")]
    BadSignature,
}

/// Why a branch failed verification, and at which height.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize)]
#[error("block at height {height} invalid: {reason}")]
pub struct BranchInvalid {
    pub reason: InvalidReason,
    pub height: u64,
}

/// Alg. 6 for one confirmation: same chain, sampled endorser, bound to this
/// block's intent and leader, valid signature.
pub fn verify_endorsement(confirm: &ConfirmMsg, block: &Block, sel: &RoundSelection, chain_id: &Digest) -> bool {
    let Ok(committee) = &sel.committee else {
        return false;
    };
    let Some((_, pk, _)) = committee.member(&confirm.endorser_pk_hash) else {
        return false;
    };
    confirm.chain_id == *chain_id
        && confirm.intent_hash == block.intent.digest()
        && confirm.leader_pk_hash == block.intent.candidate_pk.key_hash()
        && confirm.verify_sig(&pk)
}

/// Checks every confirmation of `block` and returns the distinct endorsers
/// with their slot weights.
pub(crate) fn check_endorsements(
    parent: &BranchState,
    block: &Block,
    sel: &RoundSelection,
) -> Result<Vec<(IdentityId, u32)>, InvalidReason> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(block.confirms.len());
    let intent_hash = block.intent.digest();
    let leader_hash = block.intent.candidate_pk.key_hash();
    for c in &block.confirms {
        if !seen.insert(c.endorser_pk_hash) {
            return Err(InvalidReason::BadEndorsement);
        }
        let Ok(committee) = &sel.committee else {
            return Err(InvalidReason::BadEndorsement);
        };
        let Some((id, pk, w)) = committee.member(&c.endorser_pk_hash) else {
            return Err(InvalidReason::BadEndorsement);
        };
        let ok = c.chain_id == parent.chain_id
            && c.intent_hash == intent_hash
            && c.leader_pk_hash == leader_hash
            && c.verify_sig(&pk);
        if !ok {
            return Err(InvalidReason::BadEndorsement);
        }
        out.push((id, w));
    }
    Ok(out)
}

/// Replays `blocks` from genesis, returning the tip state or the first
/// failure.
pub fn verify_branch(
    genesis: Arc<GenesisConfig>,
    params: &ProtocolParams,
    blocks: &[Block],
) -> Result<BranchState, BranchInvalid> {
    let mut st = BranchState::from_genesis(genesis, params).map_err(|_| BranchInvalid {
        reason: InvalidReason::Linkage,
        height: 0,
    })?;
    for (i, b) in blocks.iter().enumerate() {
        let height = i as u64 + 1;
        let fail = |reason| BranchInvalid { reason, height };
        if b.intent.prev_hash != st.tip || b.intent.round <= st.round {
            return Err(fail(InvalidReason::Linkage));
        }
        let sel = round_selection(&st, params, b.intent.round);
        let sealed = SealedBlock::new(b.clone());
        st = st.apply_block(params, &sealed, &sel).map_err(fail)?;
    }
    Ok(st)
}

/// Two conflicting confirmations by one endorser in one round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivocationEvidence {
    pub round: u64,
    pub endorser: PublicKey,
    pub first: ConfirmMsg,
    pub second: ConfirmMsg,
}

/// Every pair of validly signed confirmations from the same endorser in the
/// same round that name different intents. `resolve` maps an endorser key
/// hash to its public key; unresolvable confirmations are ignored.
pub fn detect_equivocation<F>(observed: &[(u64, ConfirmMsg)], resolve: F) -> Vec<EquivocationEvidence>
where
    F: Fn(&Digest) -> Option<PublicKey>,
{
    let mut groups: BTreeMap<(u64, Digest), BTreeMap<Digest, &ConfirmMsg>> = BTreeMap::new();
    for (round, c) in observed {
        let Some(pk) = resolve(&c.endorser_pk_hash) else {
            continue;
        };
        if !c.verify_sig(&pk) {
            continue;
        }
        groups
            .entry((*round, c.endorser_pk_hash))
            .or_default()
            .entry(c.intent_hash)
            .or_insert(c);
    }
    let mut out = Vec::new();
    for ((round, h), by_intent) in groups {
        let msgs: Vec<_> = by_intent.into_values().collect();
        let endorser = resolve(&h).unwrap();
        for i in 0..msgs.len() {
            for j in i + 1..msgs.len() {
                out.push(EquivocationEvidence {
                    round,
                    endorser,
                    first: msgs[i].clone(),
                    second: msgs[j].clone(),
                });
            }
        }
    }
    out
}
