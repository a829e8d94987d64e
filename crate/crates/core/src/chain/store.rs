use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::Serialize;

use crate::chain::fork::compare_divergent;
use crate::chain::{BranchState, InvalidReason, Ledger, SealedBlock};
use crate::crypto::{Digest, PublicKey};

/// A validated block and the branch state it produces.
#[derive(Debug)]
pub struct BlockEntry {
    pub hash: Digest,
    pub parent: Option<Digest>,
    pub height: u64,
    pub round: u64,
    /// `None` only for genesis.
    pub block: Option<Arc<SealedBlock>>,
    /// Confirmation slot weight carried by the block.
    pub weight: u32,
    pub state: Arc<BranchState>,
}

impl BlockEntry {
    pub fn genesis(state: BranchState) -> Self {
        BlockEntry {
            hash: state.tip,
            parent: None,
            height: 0,
            round: 0,
            block: None,
            weight: 0,
            state: Arc::new(state),
        }
    }

    pub fn leader(&self) -> Option<PublicKey> {
        self.block.as_ref().map(|b| *b.leader())
    }
}

/// Compact record of a block on the selected chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChainLink {
    pub hash: Digest,
    pub height: u64,
    pub round: u64,
    pub leader: PublicKey,
    pub weight: u32,
}

impl ChainLink {
    fn of(e: &BlockEntry) -> Self {
        ChainLink {
            hash: e.hash,
            height: e.height,
            round: e.round,
            leader: e.leader().expect("not genesis"),
            weight: e.weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InsertOutcome {
    Added,
    Duplicate,
    Orphaned,
    OrphanPoolFull,
    Invalid(InvalidReason),
    /// Round at or below the finalized anchor.
    Stale,
}

#[derive(Debug, Clone)]
pub struct InsertReport {
    pub outcome: InsertOutcome,
    /// Blocks attached, including released orphans.
    pub attached: usize,
    pub best_changed: bool,
    /// Largest number of blocks removed from the selected chain.
    pub reorg_depth: u64,
    /// Blocks that joined the selected chain, oldest first.
    pub adopted: Vec<Arc<BlockEntry>>,
}

impl InsertReport {
    fn new(outcome: InsertOutcome) -> Self {
        InsertReport {
            outcome,
            attached: 0,
            best_changed: false,
            reorg_depth: 0,
            adopted: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StoreConfig {
    /// Blocks kept below the best tip before pruning to a finalized anchor.
    pub retain_depth: u64,
    pub orphan_cap: usize,
    /// Keep a compact log of pruned selected-chain blocks.
    pub keep_history: bool,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            retain_depth: 64,
            orphan_cap: 1024,
            keep_history: false,
        }
    }
}

/// Block tree of one node: validated entries, tips, orphans and the
/// currently selected branch.
#[derive(Debug)]
pub struct ChainStore {
    cfg: StoreConfig,
    genesis: Arc<BlockEntry>,
    entries: HashMap<Digest, Arc<BlockEntry>>,
    children: HashMap<Digest, Vec<Digest>>,
    tips: BTreeSet<Digest>,
    best: Arc<BlockEntry>,
    anchor: Arc<BlockEntry>,
    orphans: BTreeMap<Digest, Vec<Arc<SealedBlock>>>,
    orphan_count: usize,
    invalid: HashMap<Digest, InvalidReason>,
    history: Vec<ChainLink>,
}

impl ChainStore {
    pub fn new(genesis: Arc<BlockEntry>, cfg: StoreConfig) -> Self {
        let mut entries = HashMap::new();
        entries.insert(genesis.hash, genesis.clone());
        ChainStore {
            cfg,
            entries,
            children: HashMap::new(),
            tips: BTreeSet::from([genesis.hash]),
            best: genesis.clone(),
            anchor: genesis.clone(),
            genesis,
            orphans: BTreeMap::new(),
            orphan_count: 0,
            invalid: HashMap::new(),
            history: Vec::new(),
        }
    }

    pub fn genesis(&self) -> &Arc<BlockEntry> {
        &self.genesis
    }

    pub fn best(&self) -> &Arc<BlockEntry> {
        &self.best
    }

    pub fn anchor(&self) -> &Arc<BlockEntry> {
        &self.anchor
    }

    pub fn get(&self, h: &Digest) -> Option<&Arc<BlockEntry>> {
        self.entries.get(h)
    }

    pub fn contains(&self, h: &Digest) -> bool {
        self.entries.contains_key(h)
    }

    pub fn tips(&self) -> &BTreeSet<Digest> {
        &self.tips
    }

    pub fn children(&self, h: &Digest) -> &[Digest] {
        self.children.get(h).map_or(&[], |v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn orphan_count(&self) -> usize {
        self.orphan_count
    }

    /// Ancestor of `e` at `height` (or `e` itself).
    pub fn ancestor_at(&self, e: &Arc<BlockEntry>, height: u64) -> Option<Arc<BlockEntry>> {
        let mut cur = e.clone();
        while cur.height > height {
            cur = self.entries.get(&cur.parent?)?.clone();
        }
        (cur.height == height).then_some(cur)
    }

    fn common_ancestor(&self, x: &Arc<BlockEntry>, y: &Arc<BlockEntry>) -> Arc<BlockEntry> {
        let h = x.height.min(y.height);
        let mut a = self.ancestor_at(x, h).expect("ancestor retained");
        let mut b = self.ancestor_at(y, h).expect("ancestor retained");
        while a.hash != b.hash {
            a = self.entries[&a.parent.expect("distinct genesis")].clone();
            b = self.entries[&b.parent.expect("distinct genesis")].clone();
        }
        a
    }

    /// Total order on stored tips. `Greater` means `x` is preferred.
    pub fn compare(&self, x: &Arc<BlockEntry>, y: &Arc<BlockEntry>) -> Ordering {
        x.height.cmp(&y.height).then_with(|| {
            if x.hash == y.hash {
                return Ordering::Equal;
            }
            let anc = self.common_ancestor(x, y);
            let a = self.ancestor_at(x, anc.height + 1).expect("retained");
            let b = self.ancestor_at(y, anc.height + 1).expect("retained");
            compare_divergent(&anc.state, a.block.as_ref().unwrap(), b.block.as_ref().unwrap())
        })
    }

    /// Validates and inserts `block`, re-selecting the best tip.
    pub fn insert(&mut self, block: Arc<SealedBlock>, ledger: &mut Ledger) -> InsertReport {
        let h = block.hash();
        if self.entries.contains_key(&h) {
            return InsertReport::new(InsertOutcome::Duplicate);
        }
        if let Some(r) = self.invalid.get(&h) {
            return InsertReport::new(InsertOutcome::Invalid(*r));
        }
        if self.anchor.height > 0 && block.round() <= self.anchor.round {
            return InsertReport::new(InsertOutcome::Stale);
        }
        let Some(parent) = self.entries.get(block.prev_hash()).cloned() else {
            return self.pool_orphan(block);
        };
        let mut report = InsertReport::new(InsertOutcome::Added);
        let old_best = self.best.clone();
        match self.attach(&parent, block, ledger) {
            Ok(entry) => {
                let mut queue = vec![entry];
                while let Some(e) = queue.pop() {
                    report.attached += 1;
                    for orphan in self.orphans.remove(&e.hash).unwrap_or_default() {
                        self.orphan_count -= 1;
                        if let Ok(child) = self.attach(&e, orphan, ledger) {
                            queue.push(child);
                        }
                    }
                }
            }
            Err(r) => return InsertReport::new(InsertOutcome::Invalid(r)),
        }
        if self.best.hash != old_best.hash {
            let anc = self.common_ancestor(&old_best, &self.best);
            report.best_changed = true;
            report.reorg_depth = old_best.height - anc.height;
            let mut adopted = Vec::new();
            let mut cur = self.best.clone();
            while cur.height > anc.height {
                adopted.push(cur.clone());
                cur = self.entries[&cur.parent.unwrap()].clone();
            }
            adopted.reverse();
            report.adopted = adopted;
            self.maybe_prune();
        }
        report
    }

    fn attach(
        &mut self,
        parent: &Arc<BlockEntry>,
        block: Arc<SealedBlock>,
        ledger: &mut Ledger,
    ) -> Result<Arc<BlockEntry>, InvalidReason> {
        let h = block.hash();
        let entry = match ledger.validate(parent, &block) {
            Ok(e) => e,
            Err(r) => {
                self.invalid.insert(h, r);
                return Err(r);
            }
        };
        self.entries.insert(h, entry.clone());
        self.children.entry(parent.hash).or_default().push(h);
        self.tips.remove(&parent.hash);
        self.tips.insert(h);
        if self.compare(&entry, &self.best) == Ordering::Greater {
            self.best = entry.clone();
        }
        Ok(entry)
    }

    fn pool_orphan(&mut self, block: Arc<SealedBlock>) -> InsertReport {
        let pending = self.orphans.entry(*block.prev_hash()).or_default();
        if pending.iter().any(|b| b.hash() == block.hash()) {
            return InsertReport::new(InsertOutcome::Duplicate);
        }
        if self.orphan_count >= self.cfg.orphan_cap {
            return InsertReport::new(InsertOutcome::OrphanPoolFull);
        }
        pending.push(block);
        self.orphan_count += 1;
        InsertReport::new(InsertOutcome::Orphaned)
    }

    fn maybe_prune(&mut self) {
        let retain = self.cfg.retain_depth;
        if self.best.height < self.anchor.height + 2 * retain {
            return;
        }
        let new_anchor = self
            .ancestor_at(&self.best, self.best.height - retain)
            .expect("best chain retained");
        if self.cfg.keep_history {
            let mut links = Vec::new();
            let mut cur = new_anchor.clone();
            while cur.height > self.anchor.height {
                links.push(ChainLink::of(&cur));
                cur = self.entries[&cur.parent.unwrap()].clone();
            }
            links.reverse();
            self.history.extend(links);
        }
        let keep: Vec<Digest> = self
            .entries
            .values()
            .filter(|e| {
                e.height >= new_anchor.height
                    && self
                        .ancestor_at(e, new_anchor.height)
                        .is_some_and(|a| a.hash == new_anchor.hash)
            })
            .map(|e| e.hash)
            .collect();
        let keep: BTreeSet<Digest> = keep.into_iter().collect();
        self.entries.retain(|h, _| keep.contains(h));
        self.children.retain(|h, _| keep.contains(h));
        self.tips.retain(|h| keep.contains(h));
        let anchor_round = new_anchor.round;
        self.orphans.retain(|_, v| {
            v.retain(|b| b.round() > anchor_round);
            !v.is_empty()
        });
        self.orphan_count = self.orphans.values().map(Vec::len).sum();
        self.invalid.clear();
        self.anchor = new_anchor;
    }

    /// Selected chain from genesis to the best tip, excluding genesis. Pruned
    /// blocks appear only if `keep_history` was set.
    pub fn canonical_chain(&self) -> Vec<ChainLink> {
        let mut tail = Vec::new();
        let mut cur = self.best.clone();
        while cur.height > self.anchor.height {
            tail.push(ChainLink::of(&cur));
            cur = self.entries[&cur.parent.unwrap()].clone();
        }
        if self.anchor.height > 0 {
            tail.push(ChainLink::of(&self.anchor));
        }
        tail.reverse();
        let mut out = self.history.clone();
        out.extend(tail);
        out
    }

    /// Blocks of the selected branch still held in the store, oldest first.
    pub fn best_branch_blocks(&self) -> Vec<Arc<SealedBlock>> {
        let mut out = Vec::new();
        let mut cur = self.best.clone();
        while let Some(b) = &cur.block {
            out.push(b.clone());
            match cur.parent.and_then(|p| self.entries.get(&p)) {
                Some(p) => cur = p.clone(),
                None => break,
            }
        }
        out.reverse();
        out
    }
}
