//! The simulation driver: a global clock splits every round into the intent,
//! confirmation and block phases and routes messages between node state
//! machines, substituting adversarial behavior where configured.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrr_core::chain::{
    detect_equivocation, tx_hash, Block, ConfirmMsg, InsertOutcome, InsertReport, IntentMsg, Ledger, SealedBlock,
    StoreConfig, Tx, NOMINAL_TX_BYTES,
};
use rrr_core::crypto::{hash_parts, Digest, KeyPair, PublicKey};
use rrr_core::fixtures::{attested_genesis, default_enclave, keypair};
use rrr_core::identity::{attested_userdata, AttestedEnrollMsg, EnrollMsg, MockIas};
use rrr_core::protocol::{ContentFilter, NodeState, OwnIntent};
use rrr_core::selection::sample_slots;

use crate::adversary::{grind_seed, AdversarySet, GrindSpec, Strategy};
use crate::config::{ConfigError, NodeId, SimConfig};
use crate::network::{EventQueue, Network, Route};
use crate::report::{AdversaryEvent, EnrollmentRecord, RoundRecord, SimReport};

const PHASE: u8 = 0;
const MESSAGE: u8 = 1;

#[derive(Clone, Debug)]
enum Msg {
    Intent(Arc<IntentMsg>),
    Confirm(ConfirmMsg),
    Block(Arc<SealedBlock>),
    Enroll(Arc<EnrollMsg>),
}

#[derive(Debug)]
enum Event {
    RoundStart(u64),
    IntentEnd(u64),
    ConfirmEnd,
    Finish,
    Release { node: NodeId, block: Arc<SealedBlock> },
    Deliver { to: NodeId, from: NodeId, msg: Msg },
}

/// A second intent an adversarial candidate shows only to its peers.
struct Hidden {
    own: OwnIntent,
    confirms: Vec<ConfirmMsg>,
}

#[derive(Default)]
struct RoundLog {
    msgs: u64,
    head: Option<NodeId>,
    head_adversarial: bool,
}

pub struct Simulation {
    cfg: SimConfig,
    ledger: Ledger,
    nodes: Vec<NodeState>,
    adv: AdversarySet,
    by_pk: HashMap<PublicKey, NodeId>,
    ias: MockIas,
    net: Network,
    queue: EventQueue<Event>,
    observer: NodeId,
    genesis_nodes: u32,
    round: u64,
    round_end: u64,
    logs: Vec<RoundLog>,
    published: BTreeMap<u64, BTreeSet<Digest>>,
    parents: HashMap<Digest, Digest>,
    round_confirms: Vec<(u64, ConfirmMsg)>,
    hidden: BTreeMap<NodeId, Hidden>,
    abstain: BTreeSet<NodeId>,
    sync_requests: HashSet<(NodeId, Digest)>,
    evidence: u64,
    max_reorg: u64,
    finality_violations: u64,
    submissions: Vec<(NodeId, PublicKey, u64)>,
    events: Vec<AdversaryEvent>,
}

fn sub_rng(seed: u64, label: &[u8]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(hash_parts(&[b"rrr-sim", label, &seed.to_be_bytes()]).0)
}

/// Synthetic transaction: 4-byte origin node, round and index, zero padded.
pub fn synthetic_tx(origin: NodeId, round: u64, index: u32) -> Tx {
    let mut tx = Vec::with_capacity(NOMINAL_TX_BYTES);
    tx.extend_from_slice(&origin.to_be_bytes());
    tx.extend_from_slice(&round.to_be_bytes());
    tx.extend_from_slice(&index.to_be_bytes());
    tx.resize(NOMINAL_TX_BYTES, 0);
    tx
}

/// Runs one simulation with default workload settings.
pub fn run_simulation(
    params: rrr_core::params::ProtocolParams,
    net: crate::config::NetConfig,
    adversary: crate::adversary::AdversaryConfig,
    rounds: u64,
) -> Result<SimReport, ConfigError> {
    let cfg = SimConfig {
        params,
        net,
        adversary,
        rounds,
        ..SimConfig::default()
    };
    Simulation::new(cfg)?.run()
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let n = cfg.net.nodes;
        let extra = cfg.adversary.extra_identities();
        let total = cfg.total_nodes();
        let seed = cfg.net.seed;
        let adv = AdversarySet::choose(&cfg.adversary, n, extra, &mut sub_rng(seed, b"placement"));
        let keys: Vec<KeyPair> = (0..total as u64).map(|i| keypair(seed, i)).collect();
        let mut ias = MockIas::new(hash_parts(&[b"rrr-sim-ias", &seed.to_be_bytes()]).0);
        let genesis = attested_genesis(&keys[..n as usize], &mut ias, seed);
        for p in n..total {
            ias.register_platform(p as u64);
        }
        let ledger = Ledger::new(Arc::new(genesis), cfg.params.clone())
            .map_err(|e| ConfigError::Inconsistent(format!("genesis: {e}")))?;
        let observer = (0..n).find(|i| !adv.contains(*i)).unwrap_or(0);
        let by_pk = keys.iter().enumerate().map(|(i, k)| (k.public(), i as NodeId)).collect();
        let nodes = keys
            .into_iter()
            .enumerate()
            .map(|(i, k)| {
                let store = StoreConfig {
                    retain_depth: cfg.retain_depth,
                    keep_history: i as NodeId == observer,
                    ..StoreConfig::default()
                };
                NodeState::new(k, &ledger, store)
            })
            .collect();
        let honest: Vec<NodeId> = (0..total).filter(|i| !adv.contains(*i)).collect();
        let net = Network::new(cfg.net.clone(), sub_rng(seed, b"network"), honest, total);
        Ok(Simulation {
            ledger,
            nodes,
            by_pk,
            ias,
            net,
            queue: EventQueue::default(),
            observer,
            genesis_nodes: n,
            round: 0,
            round_end: 0,
            logs: Vec::with_capacity(cfg.rounds as usize),
            published: BTreeMap::new(),
            parents: HashMap::new(),
            round_confirms: Vec::new(),
            hidden: BTreeMap::new(),
            abstain: BTreeSet::new(),
            sync_requests: HashSet::new(),
            evidence: 0,
            max_reorg: 0,
            finality_violations: 0,
            submissions: Vec::new(),
            events: Vec::new(),
            adv,
            cfg,
        })
    }

    pub fn adversary_set(&self) -> &AdversarySet {
        &self.adv
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn node(&self, id: NodeId) -> &NodeState {
        &self.nodes[id as usize]
    }

    pub fn node_count(&self) -> u32 {
        self.nodes.len() as u32
    }

    pub fn run(mut self) -> Result<SimReport, ConfigError> {
        self.drive();
        Ok(self.finish())
    }

    /// Runs to completion and also returns the observer's selected chain.
    /// Blocks pruned from its store are missing, so callers that need the
    /// whole chain set `retain_depth` above the round count.
    pub fn run_with_chain(mut self) -> Result<(SimReport, Vec<Block>), ConfigError> {
        self.drive();
        let blocks = self.nodes[self.observer as usize]
            .store
            .best_branch_blocks()
            .iter()
            .map(|b| b.block().clone())
            .collect();
        Ok((self.finish(), blocks))
    }

    fn drive(&mut self) {
        self.queue.push(0, PHASE, 0, Event::RoundStart(1));
        while let Some((key, ev)) = self.queue.pop() {
            let now = key.time;
            match ev {
                Event::RoundStart(r) => self.round_start(r, now),
                Event::IntentEnd(r) => self.intent_end(r, now),
                Event::ConfirmEnd => self.confirm_end(now),
                Event::Release { node, block } => {
                    self.record_published(&block, node);
                    self.broadcast(node, Msg::Block(block), now, true);
                }
                Event::Deliver { to, from, msg } => self.deliver(to, from, msg, now),
                Event::Finish => break,
            }
        }
    }

    fn active(&self, id: NodeId) -> bool {
        self.adv.contains(id) && self.cfg.adversary.is_active(self.round)
    }

    fn event(&mut self, kind: &str, detail: String) {
        self.events.push(AdversaryEvent {
            round: self.round,
            kind: kind.into(),
            detail,
        });
    }

    fn count_origin(&mut self, msg: &Msg) {
        let t = &mut self.net.totals;
        t.originated += 1;
        match msg {
            Msg::Intent(_) => t.intents += 1,
            Msg::Confirm(_) => t.confirms += 1,
            Msg::Block(_) => t.blocks += 1,
            Msg::Enroll(_) => t.enrollments += 1,
        }
        if let Some(log) = self.logs.last_mut() {
            log.msgs += 1;
        }
    }

    fn send_copy(&mut self, from: NodeId, to: NodeId, msg: Msg, now: u64, round_bound: bool) {
        match self.net.route(from, to, now, round_bound) {
            Route::Deliver(at) => {
                self.queue.push(at, MESSAGE, from, Event::Deliver { to, from, msg });
            }
            Route::Unreachable => {
                // Missed blocks are caught up just before the next round.
                if let Msg::Block(_) = msg {
                    let at = self
                        .round_end
                        .saturating_sub(1 + self.cfg.net.latency.max_ms())
                        .max(now);
                    self.net.totals.sync += 1;
                    self.send_copy(from, to, msg, at, false);
                }
            }
            Route::Dropped | Route::Filtered => {}
        }
    }

    fn broadcast(&mut self, from: NodeId, msg: Msg, now: u64, round_bound: bool) {
        self.count_origin(&msg);
        for to in 0..self.nodes.len() as NodeId {
            if to != from {
                self.send_copy(from, to, msg.clone(), now, round_bound);
            }
        }
    }

    fn unicast(&mut self, from: NodeId, to: NodeId, msg: Msg, now: u64) {
        self.count_origin(&msg);
        if to == from {
            self.net.totals.copies_sent += 1;
            self.net.totals.in_flight += 1;
            self.deliver(to, from, msg, now);
        } else {
            match self.net.route_reply(from, to, now) {
                Route::Deliver(at) => {
                    self.queue.push(at, MESSAGE, from, Event::Deliver { to, from, msg });
                }
                Route::Dropped | Route::Filtered | Route::Unreachable => {}
            }
        }
    }

    fn censor_filter(&self) -> ContentFilter {
        let Strategy::Censor { targets } = &self.cfg.adversary.strategy else {
            return ContentFilter::default();
        };
        let mut f = ContentFilter::default();
        for t in targets {
            let node = &self.nodes[*t as usize];
            f.endorsers.insert(node.key_hash());
            f.enroll_keys.insert(node.public());
            f.tx_prefixes.push(t.to_be_bytes().to_vec());
        }
        f
    }

    fn attested_enroll(&self, id: NodeId, r: u64) -> EnrollMsg {
        let node = &self.nodes[id as usize];
        let tip = node.store.best().hash;
        let pk = node.public();
        let userdata = attested_userdata(&self.ledger.chain_id(), &pk, r, &tip);
        let quote = self
            .ias
            .issue_quote(id as u64, userdata, default_enclave())
            .expect("platform registered at setup");
        EnrollMsg::Attested(AttestedEnrollMsg {
            quote,
            pk,
            round: r,
            branch_hash: tip,
            reenroll: false,
        })
    }

    fn submit_enroll(&mut self, id: NodeId, r: u64, now: u64) {
        let msg = self.attested_enroll(id, r);
        let pk = msg.new_pk();
        self.nodes[id as usize].add_enroll(msg.clone());
        self.submissions.push((id, pk, r));
        self.broadcast(id, Msg::Enroll(Arc::new(msg)), now, true);
    }

    fn round_start(&mut self, r: u64, now: u64) {
        let p = self.cfg.params.clone();
        self.round = r;
        self.round_end = now + p.round_ms;
        self.net.begin_round(r);
        self.hidden.clear();
        self.abstain.clear();
        self.sync_requests.clear();

        let obs_best = self.nodes[self.observer as usize].store.best().clone();
        let sel = self.ledger.selection(&obs_best, r);
        let head = sel.candidates.entries.first().map(|c| self.by_pk[&c.pk]);
        self.logs.push(RoundLog {
            msgs: 0,
            head,
            head_adversarial: head.is_some_and(|h| self.adv.contains(h)),
        });
        if r.is_multiple_of(16) {
            let h = obs_best.height.saturating_sub(3 * self.cfg.retain_depth);
            self.ledger.prune(h, r.saturating_sub(2));
        }

        for t in 0..self.cfg.txs_per_round {
            let origin = ((r * self.cfg.txs_per_round as u64 + t as u64) % self.genesis_nodes as u64) as NodeId;
            let tx = synthetic_tx(origin, r, t);
            for node in &mut self.nodes {
                node.add_tx(tx.clone());
            }
        }

        let n = self.genesis_nodes;
        let extra = self.cfg.adversary.extra_identities();
        if extra > 0 && r == self.cfg.adversary.active_from.max(1) {
            for id in n..n + extra {
                self.submit_enroll(id, r, now);
            }
            self.event("enroll-burst", format!("{extra} enrollments broadcast"));
        }
        let joiners = self.cfg.honest_joiners.clone();
        for (i, at) in joiners.iter().enumerate() {
            if *at == r {
                self.submit_enroll(n + extra + i as NodeId, r, now);
            }
        }

        if let Strategy::Grind { .. } = self.cfg.adversary.strategy {
            if self.cfg.adversary.is_active(r) {
                self.plan_grind(r);
            }
        }

        let max_txs = p.max_txs_per_block as usize;
        for id in 0..self.nodes.len() as NodeId {
            let intent = self.nodes[id as usize].on_round_start(r, &mut self.ledger, max_txs);
            if self.net.is_offline(id) || self.abstain.contains(&id) {
                self.nodes[id as usize].set_own_intent(None);
                continue;
            }
            let Some(mut intent) = intent else {
                continue;
            };
            if self.active(id) {
                match self.cfg.adversary.strategy.clone() {
                    Strategy::Censor { .. } => {
                        let f = self.censor_filter();
                        let own = self.nodes[id as usize].make_intent(&self.ledger, max_txs, &f);
                        intent = own.intent.clone();
                        self.nodes[id as usize].set_own_intent(Some(own));
                    }
                    Strategy::DoubleIntentFork { .. } => self.prepare_hidden(id, r, now),
                    _ => {}
                }
            }
            self.broadcast(id, Msg::Intent(intent), now, true);
        }

        self.queue.push(now + p.intent_ms, PHASE, 0, Event::IntentEnd(r));
        self.queue
            .push(now + p.intent_ms + p.confirm_ms, PHASE, 0, Event::ConfirmEnd);
        let next = if r < self.cfg.rounds {
            Event::RoundStart(r + 1)
        } else {
            Event::Finish
        };
        self.queue.push(self.round_end, PHASE, 0, next);
    }

    /// When the adversary holds the oldest two or more candidates, search the
    /// seed tree and let only the first publisher on the best path proceed.
    fn plan_grind(&mut self, r: u64) {
        let Strategy::Grind {
            branching,
            depth,
            leaf_budget,
            ..
        } = self.cfg.adversary.strategy
        else {
            return;
        };
        let Some(rep) = self.adv.iter().next() else {
            return;
        };
        let best = self.nodes[rep as usize].store.best().clone();
        let sel = self.ledger.selection(&best, r);
        let run: Vec<NodeId> = sel
            .candidates
            .entries
            .iter()
            .map(|c| self.by_pk[&c.pk])
            .take_while(|id| self.adv.contains(*id))
            .collect();
        if run.len() < 2 || branching < 2 {
            return;
        }
        let keys: Vec<KeyPair> = run.iter().map(|id| self.nodes[*id as usize].keys().clone()).collect();
        let basis = best.state.endorser_basis(&self.cfg.params).clone();
        let adversarial: Vec<bool> = basis
            .population
            .iter()
            .map(|m| self.adv.contains(self.by_pk[&m.pk]))
            .collect();
        let n_e = self.cfg.params.n_endorsers;
        let target = r + depth as u64;
        let spec = GrindSpec {
            branching,
            depth,
            leaf_budget,
        };
        let score = |seed: &Digest| {
            sample_slots(seed, target, adversarial.len(), n_e)
                .into_iter()
                .filter(|i| adversarial[*i])
                .count() as u64
        };
        match grind_seed(&keys, &best.state.seed, &spec, score) {
            Ok(out) => {
                let chosen = run[out.path[0]];
                self.abstain = run.iter().copied().filter(|id| *id != chosen).collect();
                self.event(
                    "grind",
                    format!(
                        "run {} leaves {} best score {} publisher {chosen}",
                        run.len(),
                        out.leaves,
                        out.score
                    ),
                );
            }
            Err(e) => self.event("grind-error", e.to_string()),
        }
    }

    /// Builds a second intent with different content on the same parent and
    /// shows it to the other adversarial nodes only.
    fn prepare_hidden(&mut self, id: NodeId, r: u64, now: u64) {
        let node = &self.nodes[id as usize];
        let Some(own) = node.own_intent() else {
            return;
        };
        let mut txs = own.txs.clone();
        txs.push(synthetic_tx(id, r, u32::MAX));
        let intent = Arc::new(IntentMsg::new(
            node.keys(),
            self.ledger.chain_id(),
            r,
            own.parent.hash,
            tx_hash(&txs),
        ));
        let hidden = OwnIntent {
            intent_hash: intent.digest(),
            intent: intent.clone(),
            parent: own.parent.clone(),
            txs,
        };
        self.hidden.insert(
            id,
            Hidden {
                own: hidden,
                confirms: Vec::new(),
            },
        );
        let peers: Vec<NodeId> = self.adv.iter().filter(|p| *p != id).collect();
        self.count_origin(&Msg::Intent(intent.clone()));
        for p in peers {
            self.send_copy(id, p, Msg::Intent(intent.clone()), now, true);
        }
    }

    fn intent_end(&mut self, r: u64, now: u64) {
        for id in 0..self.nodes.len() as NodeId {
            let offline = self.net.is_offline(id);
            let active = self.active(id);
            let node = &mut self.nodes[id as usize];
            if offline {
                node.close_intent_phase();
                continue;
            }
            let mut out: Vec<(PublicKey, ConfirmMsg)> = Vec::new();
            if active {
                match &self.cfg.adversary.strategy {
                    Strategy::WithholdConfirm { targets } => {
                        let view = node.endorsement_view(&mut self.ledger);
                        node.close_intent_phase();
                        if let Some(v) = view.filter(|v| v.weight > 0) {
                            if let Some(first) = v.intents.first() {
                                let cand = self.by_pk[&first.candidate_pk];
                                let targeted = if targets.is_empty() {
                                    !self.adv.contains(cand)
                                } else {
                                    targets.contains(&cand)
                                };
                                if !targeted {
                                    out.push((first.candidate_pk, node.make_confirm(first)));
                                }
                            }
                        }
                    }
                    Strategy::Equivocate { max_intents } => {
                        let view = node.endorsement_view(&mut self.ledger);
                        node.close_intent_phase();
                        if let Some(v) = view.filter(|v| v.weight > 0) {
                            for i in v.intents.iter().take(*max_intents as usize) {
                                out.push((i.candidate_pk, node.make_confirm(i)));
                            }
                        }
                    }
                    Strategy::DoubleIntentFork { .. } => {
                        out.extend(node.on_intent_phase_end(&mut self.ledger));
                        let kh = node.key_hash();
                        for h in self.hidden.values() {
                            let sel = self.ledger.selection(&h.own.parent, r);
                            let w = sel.committee.as_ref().map_or(0, |c| c.weight_of_hash(&kh));
                            if w > 0 {
                                out.push((h.own.intent.candidate_pk, node.make_confirm(&h.own.intent)));
                            }
                        }
                    }
                    _ => out.extend(node.on_intent_phase_end(&mut self.ledger)),
                }
            } else {
                out.extend(node.on_intent_phase_end(&mut self.ledger));
            }
            for (pk, c) in out {
                self.round_confirms.push((r, c.clone()));
                let to = self.by_pk[&pk];
                self.unicast(id, to, Msg::Confirm(c), now);
            }
        }
    }

    fn confirm_end(&mut self, now: u64) {
        for id in 0..self.nodes.len() as NodeId {
            if self.net.is_offline(id) {
                self.nodes[id as usize].close_confirm_phase();
                continue;
            }
            let block = if self.active(id) {
                match self.cfg.adversary.strategy.clone() {
                    Strategy::Censor { .. } => self.censored_block(id),
                    Strategy::DoubleIntentFork { release_delay_ms } => {
                        if let Some(h) = self.hidden.remove(&id) {
                            let node = &self.nodes[id as usize];
                            match node.build_block(&mut self.ledger, &h.own, &h.confirms, &ContentFilter::default()) {
                                Some(b) => {
                                    let at = (now + release_delay_ms).min(self.round_end - 1);
                                    self.queue.push(at, MESSAGE, id, Event::Release { node: id, block: b });
                                    self.event("double-intent", format!("hidden block by {id} reached quorum"));
                                }
                                None => {
                                    self.event("double-intent", format!("hidden intent of {id} lacks quorum"));
                                }
                            }
                        }
                        self.nodes[id as usize].on_confirm_phase_end(&mut self.ledger)
                    }
                    _ => self.nodes[id as usize].on_confirm_phase_end(&mut self.ledger),
                }
            } else {
                self.nodes[id as usize].on_confirm_phase_end(&mut self.ledger)
            };
            if let Some(b) = block {
                self.record_published(&b, id);
                self.broadcast(id, Msg::Block(b), now, true);
            }
        }
        let confirms = std::mem::take(&mut self.round_confirms);
        if !confirms.is_empty() {
            let state = self.nodes[self.observer as usize].store.best().state.clone();
            let found = detect_equivocation(&confirms, |h| {
                state.id_of_key_hash(h).map(|id| state.identity(id).record.pk)
            });
            self.evidence += found.len() as u64;
        }
    }

    /// Leader block without the targets' confirmations, transactions and
    /// enrollments; the confirmations are kept only if quorum needs them.
    fn censored_block(&mut self, id: NodeId) -> Option<Arc<SealedBlock>> {
        let filter = self.censor_filter();
        let node = &mut self.nodes[id as usize];
        let own = node.own_intent().cloned();
        node.close_confirm_phase();
        let own = own?;
        let received = node.received_confirms().to_vec();
        let mut block = node.build_block(&mut self.ledger, &own, &received, &filter);
        if block.is_none() {
            let relaxed = ContentFilter {
                endorsers: BTreeSet::new(),
                ..filter
            };
            block = node.build_block(&mut self.ledger, &own, &received, &relaxed);
            if block.is_some() {
                self.event("censor", format!("leader {id} needed target confirmations for quorum"));
            }
        }
        let block = block?;
        let report = self.nodes[id as usize].publish_own(block.clone(), &mut self.ledger);
        self.note_reorg(id, &report);
        Some(block)
    }

    fn record_published(&mut self, b: &Arc<SealedBlock>, _creator: NodeId) {
        self.published.entry(b.round()).or_default().insert(b.hash());
        self.parents.insert(b.hash(), *b.prev_hash());
    }

    fn note_reorg(&mut self, id: NodeId, report: &InsertReport) {
        if !report.best_changed || self.adv.contains(id) {
            return;
        }
        self.max_reorg = self.max_reorg.max(report.reorg_depth);
        if report.reorg_depth > self.cfg.params.confirm_depth {
            self.finality_violations += 1;
            self.event(
                "finality-violation",
                format!("node {id} abandoned {} blocks", report.reorg_depth),
            );
        }
    }

    fn deliver(&mut self, to: NodeId, from: NodeId, msg: Msg, now: u64) {
        self.net.delivered();
        match msg {
            Msg::Intent(i) => self.nodes[to as usize].on_intent(i),
            Msg::Confirm(c) => match self.hidden.get_mut(&to) {
                Some(h) if h.own.intent_hash == c.intent_hash => {
                    if !h.confirms.contains(&c) {
                        h.confirms.push(c);
                    }
                }
                _ => self.nodes[to as usize].on_confirm(c),
            },
            Msg::Enroll(e) => self.nodes[to as usize].add_enroll((*e).clone()),
            Msg::Block(b) => {
                let parent = *b.prev_hash();
                let report = self.nodes[to as usize].on_block(b, &mut self.ledger);
                self.note_reorg(to, &report);
                if report.outcome == InsertOutcome::Orphaned {
                    self.sync(from, to, parent, now);
                }
            }
        }
    }

    /// Sends `to` the ancestors of an orphan it cannot attach, oldest first,
    /// from `from`'s store.
    fn sync(&mut self, from: NodeId, to: NodeId, missing: Digest, now: u64) {
        if !self.sync_requests.insert((to, missing)) {
            return;
        }
        let mut chain = Vec::new();
        {
            let src = &self.nodes[from as usize].store;
            let dst = &self.nodes[to as usize].store;
            let mut cur = src.get(&missing).cloned();
            while let Some(e) = cur {
                if dst.contains(&e.hash) {
                    break;
                }
                let Some(b) = e.block.clone() else {
                    break;
                };
                chain.push(b);
                cur = e.parent.and_then(|p| src.get(&p).cloned());
            }
        }
        for b in chain.into_iter().rev() {
            self.net.totals.sync += 1;
            self.send_copy(from, to, Msg::Block(b), now, false);
        }
    }

    fn finish(mut self) -> SimReport {
        self.net.end_round();
        let obs = &self.nodes[self.observer as usize];
        let chain = obs.store.canonical_chain();
        let canonical: BTreeMap<u64, _> = chain.iter().map(|l| (l.round, l)).collect();
        let on_chain: HashSet<Digest> = chain.iter().map(|l| l.hash).collect();

        let mut outcomes = Vec::with_capacity(self.logs.len());
        let mut block_counts = BTreeMap::new();
        let mut adversary_blocks = 0;
        for (i, log) in self.logs.iter().enumerate() {
            let r = i as u64 + 1;
            let link = canonical.get(&r);
            let leader = link.map(|l| self.by_pk[&l.leader]);
            if let Some(l) = leader {
                *block_counts.entry(l).or_insert(0u64) += 1;
                if self.adv.contains(l) {
                    adversary_blocks += 1;
                }
            }
            let published = self.published.get(&r).map_or(0, |s| s.len() as u32);
            outcomes.push(RoundRecord {
                round: r,
                leader,
                weight: link.map_or(0, |l| l.weight),
                forked: published >= 2,
                skipped: link.is_none(),
                msgs: log.msgs,
                head: log.head,
                head_adversarial: log.head_adversarial,
                blocks_published: published,
            });
        }

        let off_chain: Vec<Digest> = self
            .published
            .values()
            .flatten()
            .filter(|h| !on_chain.contains(*h))
            .copied()
            .collect();
        let off_parents: HashSet<Digest> = off_chain.iter().filter_map(|h| self.parents.get(h)).copied().collect();
        let mut fork_depth_histogram = BTreeMap::new();
        for leaf in off_chain.iter().filter(|h| !off_parents.contains(*h)) {
            let mut depth = 0u64;
            let mut cur = *leaf;
            while !on_chain.contains(&cur) && cur != self.ledger.chain_id() {
                depth += 1;
                match self.parents.get(&cur) {
                    Some(p) => cur = *p,
                    None => break,
                }
            }
            *fork_depth_histogram.entry(depth).or_insert(0u64) += 1;
        }
        let max_fork_depth = fork_depth_histogram.keys().next_back().copied().unwrap_or(0);

        let state = &obs.store.best().state;
        let enrollments = self
            .submissions
            .iter()
            .map(|(node, pk, r)| EnrollmentRecord {
                node: *node,
                adversarial: self.adv.contains(*node),
                submitted_round: *r,
                included_round: state.id_of(pk).map(|id| state.identity(id).record.enroll_round),
            })
            .collect();

        let mut late_intents = 0;
        let mut late_confirms = 0;
        let mut invalid_blocks = 0;
        for (i, n) in self.nodes.iter().enumerate() {
            if !self.adv.contains(i as NodeId) {
                late_intents += n.telemetry.late_intents;
                late_confirms += n.telemetry.late_confirms;
                invalid_blocks += n.telemetry.invalid_blocks;
            }
        }
        let blocks = block_counts.values().sum();
        let skips = outcomes.iter().filter(|o| o.skipped).count() as u64;
        let fork_rounds = outcomes.iter().filter(|o| o.forked).count() as u64;
        SimReport {
            adversary_nodes: self.adv.iter().collect(),
            observer: self.observer,
            outcomes,
            blocks,
            skips,
            fork_rounds,
            fork_depth_histogram,
            max_fork_depth,
            block_counts,
            adversary_blocks,
            max_reorg_depth: self.max_reorg,
            finality_violations: self.finality_violations,
            equivocation_evidence: self.evidence,
            messages: self.net.totals,
            late_intents,
            late_confirms,
            invalid_blocks,
            mean_unreachable: self.net.mean_unreachable(),
            enrollments,
            adversary_events: self.events,
            config: self.cfg,
        }
    }
}
