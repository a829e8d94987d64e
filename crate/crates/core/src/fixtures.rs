//! Deterministic keys, genesis builders and a lock-step network that runs
//! the protocol with perfect delivery. Used by tests across the workspace.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::chain::{Block, GenesisConfig, GenesisIdentity, Ledger, SealedBlock, StoreConfig};
use crate::crypto::{hash, hash_parts, Digest, KeyPair};
use crate::identity::{IdentityKind, MockIas};
use crate::params::ProtocolParams;
use crate::protocol::NodeState;

pub fn keypair(tag: u64, i: u64) -> KeyPair {
    KeyPair::from_seed(hash_parts(&[b"rrr-key", &tag.to_be_bytes(), &i.to_be_bytes()]).0)
}

pub fn keypairs(tag: u64, n: usize) -> Vec<KeyPair> {
    (0..n as u64).map(|i| keypair(tag, i)).collect()
}

pub fn default_enclave() -> Digest {
    hash(b"rrr-enclave-v1")
}

pub fn genesis_seed(tag: u64) -> Digest {
    hash_parts(&[b"rrr-genesis-seed", &tag.to_be_bytes()])
}

/// Genesis with mined identities and no attestation provider.
pub fn mined_genesis(keys: &[KeyPair], tag: u64) -> GenesisConfig {
    GenesisConfig {
        identities: keys
            .iter()
            .map(|k| GenesisIdentity {
                pk: k.public(),
                kind: IdentityKind::Mined,
                pseudonym: None,
                pow_nonce: None,
            })
            .collect(),
        seed: genesis_seed(tag),
        seed_proof: Vec::new(),
        enclave_hash: default_enclave(),
        provider_pk: None,
        pow_target: None,
    }
}

/// Genesis whose identities are attested on platforms `0..keys.len()`.
pub fn attested_genesis(keys: &[KeyPair], ias: &mut MockIas, tag: u64) -> GenesisConfig {
    GenesisConfig {
        identities: keys
            .iter()
            .enumerate()
            .map(|(i, k)| {
                ias.register_platform(i as u64);
                GenesisIdentity {
                    pk: k.public(),
                    kind: IdentityKind::Attested,
                    pseudonym: Some(ias.pseudonym(i as u64)),
                    pow_nonce: None,
                }
            })
            .collect(),
        seed: genesis_seed(tag),
        seed_proof: Vec::new(),
        enclave_hash: default_enclave(),
        provider_pk: Some(ias.public_key()),
        pow_target: None,
    }
}

/// Small parameters for fast tests: every identity endorses often.
pub fn small_params() -> ProtocolParams {
    ProtocolParams {
        n_candidates: 3,
        n_endorsers: 10,
        quorum: 6,
        activity_threshold: 50,
        enroll_threshold: 5,
        confirm_depth: 3,
        ..ProtocolParams::default()
    }
}

/// All nodes see every message of a round before the phase ends.
pub struct LockstepNet {
    pub ledger: Ledger,
    pub nodes: Vec<NodeState>,
    pub round: u64,
    /// Nodes that send nothing.
    pub silent: BTreeSet<usize>,
    pub txs_per_round: usize,
}

impl LockstepNet {
    pub fn new(params: ProtocolParams, genesis: GenesisConfig, keys: &[KeyPair]) -> Self {
        let ledger = Ledger::new(Arc::new(genesis), params).expect("valid genesis");
        let nodes = keys
            .iter()
            .map(|k| NodeState::new(k.clone(), &ledger, StoreConfig::default()))
            .collect();
        LockstepNet {
            ledger,
            nodes,
            round: 0,
            silent: BTreeSet::new(),
            txs_per_round: 0,
        }
    }

    pub fn params(&self) -> &ProtocolParams {
        self.ledger.params()
    }

    /// Runs one round and returns the blocks produced in it.
    pub fn run_round(&mut self) -> Vec<Arc<SealedBlock>> {
        self.round += 1;
        let r = self.round;
        for t in 0..self.txs_per_round {
            let mut tx = format!("tx-{r}-{t}-").into_bytes();
            tx.resize(crate::chain::NOMINAL_TX_BYTES, b'.');
            for n in &mut self.nodes {
                n.add_tx(tx.clone());
            }
        }
        let max_txs = self.params().max_txs_per_block as usize;
        let mut intents = Vec::new();
        for (i, n) in self.nodes.iter_mut().enumerate() {
            let intent = n.on_round_start(r, &mut self.ledger, max_txs);
            if let (Some(intent), false) = (intent, self.silent.contains(&i)) {
                intents.push((i, intent));
            }
        }
        for (from, intent) in &intents {
            for (i, n) in self.nodes.iter_mut().enumerate() {
                if i != *from {
                    n.on_intent(intent.clone());
                }
            }
        }
        let mut confirms = Vec::new();
        for (i, n) in self.nodes.iter_mut().enumerate() {
            match n.on_intent_phase_end(&mut self.ledger) {
                Some(c) if !self.silent.contains(&i) => confirms.push(c),
                _ => {}
            }
        }
        for (to, c) in confirms {
            if let Some(n) = self.nodes.iter_mut().find(|n| n.public() == to) {
                n.on_confirm(c);
            }
        }
        let mut blocks = Vec::new();
        for (i, n) in self.nodes.iter_mut().enumerate() {
            if self.silent.contains(&i) {
                n.close_confirm_phase();
                continue;
            }
            if let Some(b) = n.on_confirm_phase_end(&mut self.ledger) {
                blocks.push(b);
            }
        }
        for b in &blocks {
            for n in &mut self.nodes {
                n.on_block(b.clone(), &mut self.ledger);
            }
        }
        blocks
    }

    pub fn run(&mut self, rounds: u64) -> usize {
        (0..rounds).map(|_| self.run_round().len()).sum()
    }

    /// Blocks of node `i`'s selected branch.
    pub fn branch(&self, i: usize) -> Vec<Block> {
        self.nodes[i]
            .store
            .best_branch_blocks()
            .iter()
            .map(|b| b.block().clone())
            .collect()
    }
}
