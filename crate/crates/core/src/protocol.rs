//! Per-node round state machine: intent, confirmation and block phases.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::sync::Arc;

use serde::Serialize;

use crate::chain::{
    tx_hash, Block, BlockEntry, ChainStore, ConfirmMsg, InsertOutcome, InsertReport, IntentMsg, Ledger, SealedBlock,
    StoreConfig, Tx,
};
use crate::crypto::{hash, vrf_evaluate, Digest, KeyPair, PublicKey};
use crate::identity::EnrollMsg;

const TX_POOL_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phase {
    Intent,
    Confirm,
    Block,
}

/// What this node may do in the current round on its selected branch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Roles {
    /// Position in the candidate list, 0 = oldest.
    pub candidate_rank: Option<usize>,
    /// Endorser slot weight, 0 if not sampled.
    pub endorser_weight: u32,
}

/// Content a leader leaves out of its block.
#[derive(Clone, Debug, Default)]
pub struct ContentFilter {
    pub endorsers: BTreeSet<Digest>,
    pub enroll_keys: BTreeSet<PublicKey>,
    pub tx_prefixes: Vec<Vec<u8>>,
}

impl ContentFilter {
    pub fn is_empty(&self) -> bool {
        self.endorsers.is_empty() && self.enroll_keys.is_empty() && self.tx_prefixes.is_empty()
    }

    fn drops_tx(&self, tx: &[u8]) -> bool {
        self.tx_prefixes.iter().any(|p| tx.starts_with(p))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct NodeTelemetry {
    pub intents_sent: u64,
    pub confirms_sent: u64,
    pub blocks_sent: u64,
    pub late_intents: u64,
    pub late_confirms: u64,
    pub invalid_blocks: u64,
    pub orphaned_blocks: u64,
    pub stale_blocks: u64,
    pub max_reorg_depth: u64,
}

#[derive(Clone, Debug)]
pub struct OwnIntent {
    pub intent: Arc<IntentMsg>,
    pub intent_hash: Digest,
    pub parent: Arc<BlockEntry>,
    pub txs: Vec<Tx>,
}

/// Valid intents of the round grouped on the branch an endorser would back.
#[derive(Clone, Debug)]
pub struct EndorsementView {
    pub branch: Arc<BlockEntry>,
    /// Valid intents on `branch`, oldest candidate first, arrival order
    /// among intents of the same candidate.
    pub intents: Vec<Arc<IntentMsg>>,
    /// This node's slot weight on `branch`.
    pub weight: u32,
}

pub struct NodeState {
    keys: KeyPair,
    key_hash: Digest,
    pub store: ChainStore,
    round: u64,
    phase: Phase,
    roles: Roles,
    intents: Vec<Arc<IntentMsg>>,
    confirms: Vec<ConfirmMsg>,
    own: Option<OwnIntent>,
    tx_pool: VecDeque<(Digest, Tx)>,
    tx_ids: HashSet<Digest>,
    enroll_pool: Vec<(Digest, EnrollMsg)>,
    pub telemetry: NodeTelemetry,
}

impl NodeState {
    pub fn new(keys: KeyPair, ledger: &Ledger, cfg: StoreConfig) -> Self {
        NodeState {
            key_hash: keys.public().key_hash(),
            keys,
            store: ChainStore::new(ledger.genesis().clone(), cfg),
            round: 0,
            phase: Phase::Block,
            roles: Roles::default(),
            intents: Vec::new(),
            confirms: Vec::new(),
            own: None,
            tx_pool: VecDeque::new(),
            tx_ids: HashSet::new(),
            enroll_pool: Vec::new(),
            telemetry: NodeTelemetry::default(),
        }
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    pub fn public(&self) -> PublicKey {
        self.keys.public()
    }

    pub fn key_hash(&self) -> Digest {
        self.key_hash
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn roles(&self) -> Roles {
        self.roles
    }

    pub fn own_intent(&self) -> Option<&OwnIntent> {
        self.own.as_ref()
    }

    pub fn received_intents(&self) -> &[Arc<IntentMsg>] {
        &self.intents
    }

    pub fn received_confirms(&self) -> &[ConfirmMsg] {
        &self.confirms
    }

    pub fn pending_txs(&self) -> usize {
        self.tx_pool.len()
    }

    pub fn pending_enrolls(&self) -> usize {
        self.enroll_pool.len()
    }

    fn refresh_roles(&mut self, ledger: &mut Ledger) {
        if self.round == 0 || self.round <= self.store.best().round {
            self.roles = Roles::default();
            return;
        }
        let sel = ledger.selection(self.store.best(), self.round);
        self.roles = Roles {
            candidate_rank: sel.candidates.position(&self.public()),
            endorser_weight: sel
                .committee
                .as_ref()
                .map_or(0, |c| c.weight_of_hash(&self.key_hash)),
        };
    }

    /// Queues a transaction unless it is already pending or the pool is full.
    pub fn add_tx(&mut self, tx: Tx) {
        if self.tx_pool.len() >= TX_POOL_CAP {
            return;
        }
        let id = hash(&tx);
        if self.tx_ids.insert(id) {
            self.tx_pool.push_back((id, tx));
        }
    }

    pub fn add_enroll(&mut self, msg: EnrollMsg) {
        let d = msg.digest();
        if !self.enroll_pool.iter().any(|(h, _)| *h == d) {
            self.enroll_pool.push((d, msg));
        }
    }

    /// Starts round `r`. A candidate on the selected branch returns its
    /// intent, which is also recorded as received by itself.
    pub fn on_round_start(&mut self, r: u64, ledger: &mut Ledger, max_txs: usize) -> Option<Arc<IntentMsg>> {
        self.round = r;
        self.phase = Phase::Intent;
        self.intents.clear();
        self.confirms.clear();
        self.own = None;
        self.refresh_roles(ledger);
        self.roles.candidate_rank?;
        let own = self.make_intent(ledger, max_txs, &ContentFilter::default());
        let intent = own.intent.clone();
        self.intents.push(intent.clone());
        self.own = Some(own);
        self.telemetry.intents_sent += 1;
        Some(intent)
    }

    /// Builds (without recording) an intent on the selected branch.
    pub fn make_intent(&self, ledger: &Ledger, max_txs: usize, filter: &ContentFilter) -> OwnIntent {
        let parent = self.store.best().clone();
        let txs: Vec<Tx> = self
            .tx_pool
            .iter()
            .filter(|(_, tx)| !filter.drops_tx(tx))
            .take(max_txs)
            .map(|(_, tx)| tx.clone())
            .collect();
        let intent = Arc::new(IntentMsg::new(
            &self.keys,
            ledger.chain_id(),
            self.round,
            parent.hash,
            tx_hash(&txs),
        ));
        OwnIntent {
            intent_hash: intent.digest(),
            intent,
            parent,
            txs,
        }
    }

    /// Replaces the intent this node will try to turn into a block.
    pub fn set_own_intent(&mut self, own: Option<OwnIntent>) {
        self.own = own;
    }

    pub fn on_intent(&mut self, intent: Arc<IntentMsg>) {
        if self.phase == Phase::Intent && intent.round == self.round {
            if !self.intents.iter().any(|i| Arc::ptr_eq(i, &intent) || **i == *intent) {
                self.intents.push(intent);
            }
        } else {
            self.telemetry.late_intents += 1;
        }
    }

    /// Valid intents of this round on the branch preferred by fork choice.
    pub fn endorsement_view(&self, ledger: &mut Ledger) -> Option<EndorsementView> {
        let mut valid: Vec<(Arc<BlockEntry>, usize, usize, Arc<IntentMsg>)> = Vec::new();
        for (arrival, intent) in self.intents.iter().enumerate() {
            if intent.round != self.round || intent.chain_id != ledger.chain_id() {
                continue;
            }
            let Some(entry) = self.store.get(&intent.prev_hash).cloned() else {
                continue;
            };
            if entry.round >= self.round {
                continue;
            }
            let sel = ledger.selection(&entry, self.round);
            let Some(rank) = sel.candidates.position(&intent.candidate_pk) else {
                continue;
            };
            if !intent.verify_sig() {
                continue;
            }
            valid.push((entry, rank, arrival, intent.clone()));
        }
        let mut branch: Option<Arc<BlockEntry>> = None;
        for (e, ..) in &valid {
            match &branch {
                Some(b) if self.store.compare(e, b) != std::cmp::Ordering::Greater => {}
                _ => branch = Some(e.clone()),
            }
        }
        let branch = branch?;
        let mut on_branch: Vec<_> = valid.into_iter().filter(|(e, ..)| e.hash == branch.hash).collect();
        on_branch.sort_by_key(|(_, rank, arrival, _)| (*rank, *arrival));
        let sel = ledger.selection(&branch, self.round);
        let weight = sel
            .committee
            .as_ref()
            .map_or(0, |c| c.weight_of_hash(&self.key_hash));
        Some(EndorsementView {
            branch,
            intents: on_branch.into_iter().map(|(.., i)| i).collect(),
            weight,
        })
    }

    pub fn make_confirm(&self, intent: &IntentMsg) -> ConfirmMsg {
        ConfirmMsg::new(&self.keys, intent)
    }

    pub fn note_confirm_sent(&mut self) {
        self.telemetry.confirms_sent += 1;
    }

    /// Ends the intent phase: confirms the oldest valid candidate if this
    /// node is a sampled endorser on the chosen branch.
    pub fn on_intent_phase_end(&mut self, ledger: &mut Ledger) -> Option<(PublicKey, ConfirmMsg)> {
        self.phase = Phase::Confirm;
        let view = self.endorsement_view(ledger)?;
        if view.weight == 0 {
            return None;
        }
        let intent = view.intents.first()?;
        let c = self.make_confirm(intent);
        self.note_confirm_sent();
        Some((intent.candidate_pk, c))
    }

    /// Enters the confirmation phase without sending anything.
    pub fn close_intent_phase(&mut self) {
        self.phase = Phase::Confirm;
    }

    pub fn on_confirm(&mut self, c: ConfirmMsg) {
        let for_me = self.own.as_ref().is_some_and(|o| o.intent_hash == c.intent_hash);
        if self.phase == Phase::Confirm && for_me {
            if !self.confirms.contains(&c) {
                self.confirms.push(c);
            }
        } else {
            self.telemetry.late_confirms += 1;
        }
    }

    /// Valid confirmations for `own`, one per endorser, and their total
    /// slot weight.
    pub fn collect_confirms(
        &self,
        ledger: &mut Ledger,
        own: &OwnIntent,
        received: &[ConfirmMsg],
        filter: &ContentFilter,
    ) -> (Vec<ConfirmMsg>, u32) {
        let sel = ledger.selection(&own.parent, own.intent.round);
        let Ok(committee) = &sel.committee else {
            return (Vec::new(), 0);
        };
        let leader_hash = own.intent.candidate_pk.key_hash();
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut weight = 0;
        for c in received {
            if c.intent_hash != own.intent_hash || c.leader_pk_hash != leader_hash || c.chain_id != ledger.chain_id() {
                continue;
            }
            if filter.endorsers.contains(&c.endorser_pk_hash) || seen.contains(&c.endorser_pk_hash) {
                continue;
            }
            let Some((_, pk, w)) = committee.member(&c.endorser_pk_hash) else {
                continue;
            };
            if !c.verify_sig(&pk) {
                continue;
            }
            seen.insert(c.endorser_pk_hash);
            out.push(c.clone());
            weight += w;
        }
        (out, weight)
    }

    /// Assembles and signs a block for `own` if the confirmations reach
    /// quorum. Pending enrollments valid on the parent are packed in
    /// arrival order.
    pub fn build_block(
        &self,
        ledger: &mut Ledger,
        own: &OwnIntent,
        received: &[ConfirmMsg],
        filter: &ContentFilter,
    ) -> Option<Arc<SealedBlock>> {
        let (confirms, weight) = self.collect_confirms(ledger, own, received, filter);
        if weight < ledger.params().quorum {
            return None;
        }
        let params = ledger.params().clone();
        let mut state = (*own.parent.state).clone();
        let mut enrolls = Vec::new();
        for (_, e) in &self.enroll_pool {
            if enrolls.len() >= params.max_enrolls_per_block as usize {
                break;
            }
            if filter.enroll_keys.contains(&e.new_pk()) {
                continue;
            }
            if let Ok(next) = state.check_enroll(&params, e, enrolls.len() as u32, own.intent.round) {
                state = next;
                enrolls.push(e.clone());
            }
        }
        let update = vrf_evaluate(&self.keys, &own.parent.state.seed);
        let block = Block::build(
            &self.keys,
            (*own.intent).clone(),
            confirms,
            own.txs.clone(),
            enrolls,
            update,
        );
        Some(Arc::new(block.seal()))
    }

    /// Ends the confirmation phase. A candidate that reached quorum returns
    /// its block after adding it to its own store.
    pub fn on_confirm_phase_end(&mut self, ledger: &mut Ledger) -> Option<Arc<SealedBlock>> {
        self.phase = Phase::Block;
        let own = self.own.clone()?;
        let block = self.build_block(ledger, &own, &self.confirms, &ContentFilter::default())?;
        self.publish_own(block.clone(), ledger);
        Some(block)
    }

    /// Inserts a block this node produced and counts it as sent.
    pub fn publish_own(&mut self, block: Arc<SealedBlock>, ledger: &mut Ledger) -> InsertReport {
        let report = self.on_block(block, ledger);
        debug_assert!(
            matches!(report.outcome, InsertOutcome::Added | InsertOutcome::Duplicate),
            "own block rejected: {:?}",
            report.outcome
        );
        self.telemetry.blocks_sent += 1;
        report
    }

    /// Enters the block phase without producing anything.
    pub fn close_confirm_phase(&mut self) {
        self.phase = Phase::Block;
    }

    pub fn on_block(&mut self, block: Arc<SealedBlock>, ledger: &mut Ledger) -> InsertReport {
        let report = self.store.insert(block, ledger);
        match &report.outcome {
            InsertOutcome::Invalid(_) => self.telemetry.invalid_blocks += 1,
            InsertOutcome::Orphaned => self.telemetry.orphaned_blocks += 1,
            InsertOutcome::Stale => self.telemetry.stale_blocks += 1,
            _ => {}
        }
        if report.best_changed {
            self.telemetry.max_reorg_depth = self.telemetry.max_reorg_depth.max(report.reorg_depth);
            let mut tx_ids = HashSet::new();
            let mut enroll_ids = HashSet::new();
            for e in &report.adopted {
                let b = e.block.as_ref().unwrap();
                tx_ids.extend(b.txs.iter().map(|t| hash(t)));
                enroll_ids.extend(b.enrolls.iter().map(EnrollMsg::digest));
            }
            if !tx_ids.is_empty() {
                self.tx_pool.retain(|(id, _)| !tx_ids.contains(id));
                self.tx_ids.retain(|id| !tx_ids.contains(id));
            }
            if !enroll_ids.is_empty() {
                self.enroll_pool.retain(|(id, _)| !enroll_ids.contains(id));
            }
            self.refresh_roles(ledger);
        }
        report
    }
}
