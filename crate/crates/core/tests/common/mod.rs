#![allow(dead_code)]

use std::sync::Arc;

use rrr_core::chain::{Block, BranchState, ConfirmMsg, GenesisConfig, IntentMsg, InvalidReason, SealedBlock, Tx};
use rrr_core::crypto::{KeyPair, PublicKey};
use rrr_core::fixtures::{attested_genesis, keypairs, mined_genesis};
use rrr_core::identity::{EnrollMsg, MockIas};
use rrr_core::params::ProtocolParams;
use rrr_core::selection::{round_selection, RoundSelection};
use rrr_core::chain::tx_hash;
use rrr_core::vrf_evaluate;

pub mod forks;
pub mod fuzz;

/// Builds blocks directly on branch states, valid or deliberately broken.
pub struct Forge {
    pub params: ProtocolParams,
    pub genesis: Arc<GenesisConfig>,
    pub keys: Vec<KeyPair>,
}

impl Forge {
    pub fn mined(n: usize, params: ProtocolParams, tag: u64) -> Self {
        let keys = keypairs(tag, n);
        let genesis = Arc::new(mined_genesis(&keys, tag));
        Forge { params, genesis, keys }
    }

    pub fn attested(n: usize, params: ProtocolParams, tag: u64) -> (Self, MockIas) {
        let keys = keypairs(tag, n);
        let mut ias = MockIas::new([tag as u8; 32]);
        let genesis = Arc::new(attested_genesis(&keys, &mut ias, tag));
        (Forge { params, genesis, keys }, ias)
    }

    pub fn start(&self) -> BranchState {
        BranchState::from_genesis(self.genesis.clone(), &self.params).unwrap()
    }

    pub fn key(&self, pk: &PublicKey) -> &KeyPair {
        self.keys.iter().find(|k| k.public() == *pk).expect("known key")
    }

    pub fn selection(&self, st: &BranchState, round: u64) -> RoundSelection {
        round_selection(st, &self.params, round)
    }

    pub fn intent(&self, st: &BranchState, round: u64, leader: &KeyPair, txs: &[Tx]) -> IntentMsg {
        IntentMsg::new(leader, st.chain_id, round, st.tip, tx_hash(txs))
    }

    /// Block by `leader` endorsed by `endorsers`, without any checks.
    pub fn block_by(
        &self,
        st: &BranchState,
        round: u64,
        leader: &KeyPair,
        endorsers: &[&KeyPair],
        txs: Vec<Tx>,
        enrolls: Vec<EnrollMsg>,
    ) -> Block {
        let intent = self.intent(st, round, leader, &txs);
        let confirms: Vec<ConfirmMsg> = endorsers.iter().map(|k| ConfirmMsg::new(k, &intent)).collect();
        Block::build(leader, intent, confirms, txs, enrolls, vrf_evaluate(leader, &st.seed))
    }

    /// Every distinct committee member for `round` on `st`.
    pub fn committee(&self, st: &BranchState, round: u64) -> Vec<(&KeyPair, u32)> {
        let sel = self.selection(st, round);
        let committee = sel.committee.as_ref().expect("non-empty population");
        committee.members().map(|(_, pk, w)| (self.key(&pk), w)).collect()
    }

    /// Block by the candidate at `rank`, confirmed by the whole committee.
    pub fn block(&self, st: &BranchState, round: u64, rank: usize, txs: Vec<Tx>, enrolls: Vec<EnrollMsg>) -> Block {
        let sel = self.selection(st, round);
        let leader = self.key(&sel.candidates.entries[rank].pk);
        let endorsers: Vec<&KeyPair> = self.committee(st, round).into_iter().map(|(k, _)| k).collect();
        self.block_by(st, round, leader, &endorsers, txs, enrolls)
    }

    pub fn apply(&self, st: &BranchState, b: &Block) -> Result<BranchState, InvalidReason> {
        let sel = self.selection(st, b.round());
        st.apply_block(&self.params, &SealedBlock::new(b.clone()), &sel)
    }

    pub fn extend(&self, st: &BranchState, b: &Block) -> BranchState {
        self.apply(st, b).expect("forged block is valid")
    }

    /// Honest chain over the given rounds, oldest candidate leading.
    pub fn chain(&self, from: &BranchState, rounds: impl IntoIterator<Item = u64>) -> (Vec<Block>, BranchState) {
        let mut st = from.clone();
        let mut out = Vec::new();
        for r in rounds {
            let b = self.block(&st, r, 0, vec![tx(r, 0)], vec![]);
            st = self.extend(&st, &b);
            out.push(b);
        }
        (out, st)
    }
}

pub fn tx(round: u64, i: u32) -> Tx {
    let mut t = format!("tx-{round}-{i}").into_bytes();
    t.resize(64, b'.');
    t
}
