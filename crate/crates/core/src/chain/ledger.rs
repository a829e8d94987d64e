use std::collections::HashMap;
use std::sync::Arc;

use crate::chain::{BlockEntry, BranchState, GenesisConfig, GenesisError, InvalidReason, SealedBlock};
use crate::crypto::Digest;
use crate::params::ProtocolParams;
use crate::selection::{round_selection, RoundSelection};

/// Memoizing validator. Validation and selection are pure functions of the
/// parent state, so many node stores can share one ledger and each block is
/// checked once.
#[derive(Debug)]
pub struct Ledger {
    params: ProtocolParams,
    genesis: Arc<BlockEntry>,
    validated: HashMap<Digest, Result<Arc<BlockEntry>, InvalidReason>>,
    selections: HashMap<(Digest, u64), Arc<RoundSelection>>,
    pub validations: u64,
}

impl Ledger {
    pub fn new(genesis: Arc<GenesisConfig>, params: ProtocolParams) -> Result<Self, GenesisError> {
        let state = BranchState::from_genesis(genesis, &params)?;
        Ok(Ledger {
            params,
            genesis: Arc::new(BlockEntry::genesis(state)),
            validated: HashMap::new(),
            selections: HashMap::new(),
            validations: 0,
        })
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn genesis(&self) -> &Arc<BlockEntry> {
        &self.genesis
    }

    pub fn chain_id(&self) -> Digest {
        self.genesis.hash
    }

    /// Candidates and committee for `round` on the branch ending at `entry`.
    pub fn selection(&mut self, entry: &BlockEntry, round: u64) -> Arc<RoundSelection> {
        let params = &self.params;
        self.selections
            .entry((entry.hash, round))
            .or_insert_with(|| Arc::new(round_selection(&entry.state, params, round)))
            .clone()
    }

    pub fn validate(
        &mut self,
        parent: &Arc<BlockEntry>,
        block: &Arc<SealedBlock>,
    ) -> Result<Arc<BlockEntry>, InvalidReason> {
        let h = block.hash();
        if let Some(r) = self.validated.get(&h) {
            return r.clone();
        }
        let result = self.validate_uncached(parent, block);
        self.validated.insert(h, result.clone());
        result
    }

    fn validate_uncached(
        &mut self,
        parent: &Arc<BlockEntry>,
        block: &Arc<SealedBlock>,
    ) -> Result<Arc<BlockEntry>, InvalidReason> {
        self.validations += 1;
        if *block.prev_hash() != parent.hash || block.round() <= parent.round {
            return Err(InvalidReason::Linkage);
        }
        let sel = self.selection(parent, block.round());
        let state = parent.state.apply_block(&self.params, block, &sel)?;
        let committee = sel.committee.as_ref().expect("validated block has a committee");
        let weight = block
            .confirms
            .iter()
            .map(|c| committee.weight_of_hash(&c.endorser_pk_hash))
            .sum();
        Ok(Arc::new(BlockEntry {
            hash: block.hash(),
            parent: Some(parent.hash),
            height: parent.height + 1,
            round: block.round(),
            block: Some(block.clone()),
            weight,
            state: Arc::new(state),
        }))
    }

    /// Drops memoized results for blocks below `min_height` and selections
    /// for rounds before `min_round`.
    pub fn prune(&mut self, min_height: u64, min_round: u64) {
        self.validated
            .retain(|_, r| r.as_ref().map_or(true, |e| e.height >= min_height));
        self.selections.retain(|(_, r), _| *r >= min_round);
    }

    pub fn forget_invalid(&mut self) {
        self.validated.retain(|_, r| r.is_ok());
    }
}
