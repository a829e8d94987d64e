//! Per-branch derived state: identity registry, queue order, skip marks,
//! reward bookkeeping and the endorser sampling window.

use std::sync::Arc;

use im::{OrdMap, Vector};
use serde::Serialize;

use crate::chain::genesis::{GenesisConfig, GenesisError};
use crate::chain::verify::InvalidReason;
use crate::chain::SealedBlock;
use crate::crypto::{Digest, PublicKey, Seed};
use crate::identity::{
    validate_attested_enrollment, validate_mined_enrollment, EnrollMsg, IdentityKind, IdentityRecord, Pseudonym,
};
use crate::params::ProtocolParams;
use crate::selection::RoundSelection;

/// Index of an identity in enrollment order; stable along a branch.
pub type IdentityId = u32;

/// Queue position: smaller is older. `slot` is 0 for a block creator and
/// `1 + i` for the i-th enrollment of a block (genesis uses the list index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct QueueKey {
    pub round: u64,
    pub slot: u32,
}

#[derive(Clone, Debug)]
pub struct IdentityState {
    pub record: IdentityRecord,
    pub key_hash: Digest,
    pub queue_key: QueueKey,
    pub genesis: bool,
    /// Height of the block that enrolled (or re-enrolled) this identity.
    pub enroll_height: u64,
    pub last_confirm_height: Option<u64>,
    /// Set by the inactivity rule; cleared by the next recorded confirm.
    pub skipped: bool,
    pub blocks_created: u64,
}

impl IdentityState {
    /// Active at `height` if it confirmed, or was enrolled, within the newest
    /// `activity_threshold` blocks.
    pub fn is_active(&self, height: u64, activity_threshold: u64) -> bool {
        let start = window_start(height, activity_threshold);
        self.enroll_height >= start || self.confirmed_since(start)
    }

    pub fn confirmed_since(&self, start: u64) -> bool {
        self.last_confirm_height.is_some_and(|h| h >= start)
    }
}

/// First height inside the activity window of a branch whose tip is `height`.
pub fn window_start(height: u64, activity_threshold: u64) -> u64 {
    (height + 1).saturating_sub(activity_threshold)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockMeta {
    pub creator: IdentityId,
    pub height: u64,
    pub round: u64,
    pub reward_spent: bool,
}

/// The current oldest candidate and how many rounds in a row it has been
/// oldest without producing a block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HeadStreak {
    pub head: Option<IdentityId>,
    pub streak: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PopulationMember {
    pub pk: PublicKey,
    pub id: IdentityId,
    pub key_hash: Digest,
    pub enroll_round: u64,
    pub genesis: bool,
}

/// Snapshot used for endorser sampling once this height is `d` deep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndorserBasis {
    pub height: u64,
    pub seed: Seed,
    /// Active identities sorted by public key bytes.
    pub population: Vec<PopulationMember>,
}

#[derive(Clone, Debug)]
pub struct BranchState {
    genesis: Arc<GenesisConfig>,
    pub chain_id: Digest,
    pub tip: Digest,
    pub height: u64,
    pub round: u64,
    pub seed: Seed,
    identities: Vector<IdentityState>,
    by_pk: OrdMap<PublicKey, IdentityId>,
    by_key_hash: OrdMap<Digest, IdentityId>,
    pseudonyms: OrdMap<Pseudonym, IdentityId>,
    blocks: OrdMap<Digest, BlockMeta>,
    head: HeadStreak,
    bases: Vector<Arc<EndorserBasis>>,
}

impl BranchState {
    pub fn from_genesis(genesis: Arc<GenesisConfig>, params: &ProtocolParams) -> Result<Self, GenesisError> {
        genesis.validate()?;
        let chain_id = genesis.chain_id();
        let mut st = BranchState {
            chain_id,
            tip: chain_id,
            height: 0,
            round: 0,
            seed: genesis.seed,
            identities: Vector::new(),
            by_pk: OrdMap::new(),
            by_key_hash: OrdMap::new(),
            pseudonyms: OrdMap::new(),
            blocks: OrdMap::new(),
            head: HeadStreak::default(),
            bases: Vector::new(),
            genesis: genesis.clone(),
        };
        for (i, gi) in genesis.identities.iter().enumerate() {
            let record = IdentityRecord {
                pk: gi.pk,
                enroll_round: 0,
                enroll_block: chain_id,
                enroll_index: i as u32,
                kind: gi.kind,
                pseudonym: gi.pseudonym,
                last_creation_round: 0,
            };
            st.register(record, QueueKey { round: 0, slot: i as u32 }, true);
        }
        st.push_basis(params);
        Ok(st)
    }

    fn register(&mut self, record: IdentityRecord, queue_key: QueueKey, genesis: bool) -> IdentityId {
        let id = self.identities.len() as IdentityId;
        let key_hash = record.pk.key_hash();
        self.by_pk.insert(record.pk, id);
        self.by_key_hash.insert(key_hash, id);
        if let Some(p) = record.pseudonym {
            self.pseudonyms.insert(p, id);
        }
        self.identities.push_back(IdentityState {
            record,
            key_hash,
            queue_key,
            genesis,
            enroll_height: self.height,
            last_confirm_height: None,
            skipped: false,
            blocks_created: 0,
        });
        id
    }

    pub fn genesis(&self) -> &GenesisConfig {
        &self.genesis
    }

    pub fn genesis_arc(&self) -> &Arc<GenesisConfig> {
        &self.genesis
    }

    pub fn identity_count(&self) -> usize {
        self.identities.len()
    }

    pub fn identity(&self, id: IdentityId) -> &IdentityState {
        &self.identities[id as usize]
    }

    pub fn identities(&self) -> impl Iterator<Item = (IdentityId, &IdentityState)> {
        self.identities.iter().enumerate().map(|(i, s)| (i as IdentityId, s))
    }

    pub fn id_of(&self, pk: &PublicKey) -> Option<IdentityId> {
        self.by_pk.get(pk).copied()
    }

    pub fn id_of_key_hash(&self, h: &Digest) -> Option<IdentityId> {
        self.by_key_hash.get(h).copied()
    }

    pub fn pseudonym_holder(&self, p: &Pseudonym) -> Option<IdentityId> {
        self.pseudonyms.get(p).copied()
    }

    pub fn block_meta(&self, h: &Digest) -> Option<&BlockMeta> {
        self.blocks.get(h)
    }

    /// True for the genesis digest and every block on this branch.
    pub fn contains_block(&self, h: &Digest) -> bool {
        *h == self.chain_id || self.blocks.contains_key(h)
    }

    pub fn head(&self) -> HeadStreak {
        self.head
    }

    /// Sampling basis for the round after the tip: the snapshot at height
    /// `tip + 1 - d`, or genesis while the branch is shorter.
    pub fn endorser_basis(&self, params: &ProtocolParams) -> &Arc<EndorserBasis> {
        let target = (self.height + 1).saturating_sub(params.confirm_depth);
        let first = self.bases.front().expect("basis window never empty").height;
        &self.bases[(target - first) as usize]
    }

    fn push_basis(&mut self, params: &ProtocolParams) {
        let mut population: Vec<PopulationMember> = self
            .identities()
            .filter(|(_, s)| s.is_active(self.height, params.activity_threshold))
            .map(|(id, s)| PopulationMember {
                pk: s.record.pk,
                id,
                key_hash: s.key_hash,
                enroll_round: s.record.enroll_round,
                genesis: s.genesis,
            })
            .collect();
        population.sort_by_key(|a| a.pk);
        self.bases.push_back(Arc::new(EndorserBasis {
            height: self.height,
            seed: self.seed,
            population,
        }));
        while self.bases.len() as u64 > params.confirm_depth {
            self.bases.pop_front();
        }
    }

    /// Validates `block` as the next block of this branch and returns the
    /// successor state. `sel` must be the selection of this state for the
    /// block's round.
    pub fn apply_block(
        &self,
        params: &ProtocolParams,
        block: &SealedBlock,
        sel: &RoundSelection,
    ) -> Result<BranchState, InvalidReason> {
        let intent = &block.intent;
        if intent.chain_id != self.chain_id || intent.prev_hash != self.tip || intent.round <= self.round {
            return Err(InvalidReason::Linkage);
        }
        assert_eq!(sel.round, intent.round, "selection computed for another round");
        let leader = sel
            .candidates
            .position(&intent.candidate_pk)
            .map(|i| sel.candidates.entries[i].id)
            .ok_or(InvalidReason::NotCandidate)?;
        if !intent.verify_sig() {
            return Err(InvalidReason::BadSignature);
        }
        if crate::chain::tx_hash(&block.txs) != intent.tx_hash {
            return Err(InvalidReason::TxMismatch);
        }
        let endorsers = crate::chain::verify::check_endorsements(self, block, sel)?;
        let weight: u32 = endorsers.iter().map(|(_, w)| w).sum();
        if weight < params.quorum {
            return Err(InvalidReason::QuorumShort);
        }
        if !crate::crypto::vrf_verify(&intent.candidate_pk, &self.seed, &block.seed, &block.proof) {
            return Err(InvalidReason::BadVrf);
        }

        let mut next = self.clone();
        next.height = self.height + 1;
        next.round = intent.round;
        next.tip = block.hash();
        next.seed = block.seed;

        for &id in &sel.newly_skipped {
            next.identities[id as usize].skipped = true;
        }
        next.head = sel.head;
        if next.head.head == Some(leader) {
            next.head = HeadStreak::default();
        } else if next.head.head.is_some() {
            next.head.streak += 1;
        }
        {
            let st = &mut next.identities[leader as usize];
            st.record.last_creation_round = intent.round;
            st.queue_key = QueueKey {
                round: intent.round,
                slot: 0,
            };
            st.blocks_created += 1;
        }
        for (id, _) in &endorsers {
            let st = &mut next.identities[*id as usize];
            st.last_confirm_height = Some(next.height);
            st.skipped = false;
        }

        for (i, msg) in block.enrolls.iter().enumerate() {
            next.apply_enroll(params, msg, i as u32, intent.round, block.hash())
                .map_err(InvalidReason::BadEnroll)?;
        }

        if !block.verify_sig() {
            return Err(InvalidReason::BadSignature);
        }

        next.blocks.insert(
            block.hash(),
            BlockMeta {
                creator: leader,
                height: next.height,
                round: intent.round,
                reward_spent: false,
            },
        );
        next.push_basis(params);
        Ok(next)
    }

    fn apply_enroll(
        &mut self,
        params: &ProtocolParams,
        msg: &EnrollMsg,
        index: u32,
        round: u64,
        block_hash: Digest,
    ) -> Result<(), crate::identity::EnrollReject> {
        let queue_key = QueueKey { round, slot: 1 + index };
        match msg {
            EnrollMsg::Mined(m) => {
                validate_mined_enrollment(self, m, params.identity_reward_cost)?;
                for h in &m.reward_blocks {
                    if let Some(meta) = self.blocks.get_mut(h) {
                        meta.reward_spent = true;
                    }
                }
                let record = IdentityRecord {
                    pk: m.new_pk,
                    enroll_round: round,
                    enroll_block: block_hash,
                    enroll_index: index,
                    kind: IdentityKind::Mined,
                    pseudonym: None,
                    last_creation_round: round,
                };
                self.register(record, queue_key, false);
            }
            EnrollMsg::Attested(a) => {
                let provider = self.genesis.provider_pk;
                validate_attested_enrollment(self, a, provider.as_ref())?;
                if a.reenroll {
                    let id = self.by_pk[&a.pk];
                    let height = self.height;
                    let st = &mut self.identities[id as usize];
                    st.record.last_creation_round = round;
                    st.queue_key = queue_key;
                    st.enroll_height = height;
                    st.skipped = false;
                } else {
                    let record = IdentityRecord {
                        pk: a.pk,
                        enroll_round: round,
                        enroll_block: block_hash,
                        enroll_index: index,
                        kind: IdentityKind::Attested,
                        pseudonym: Some(a.quote.pseudonym),
                        last_creation_round: round,
                    };
                    self.register(record, queue_key, false);
                }
            }
        }
        Ok(())
    }

    /// Checks an enrollment as if it were the `index`-th of a block at
    /// `round` on this branch, without committing it.
    pub fn check_enroll(
        &self,
        params: &ProtocolParams,
        msg: &EnrollMsg,
        index: u32,
        round: u64,
    ) -> Result<BranchState, crate::identity::EnrollReject> {
        let mut next = self.clone();
        next.apply_enroll(params, msg, index, round, Digest::ZERO)?;
        Ok(next)
    }
}
