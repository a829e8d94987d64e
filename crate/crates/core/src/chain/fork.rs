use std::cmp::{Ordering, Reverse};
use std::sync::Arc;

use thiserror::Error;

use crate::chain::{verify_branch, Block, BranchState, GenesisConfig, QueueKey, SealedBlock};
use crate::params::ProtocolParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ForkChoiceError {
    #[error("no valid branch among the inputs")]
    NoValidBranch,
}

/// Score of a branch: rounds elapsed minus rounds skipped, i.e. its block
/// count. Genesis is not counted.
pub fn branch_length(blocks: &[Block]) -> u64 {
    blocks.len() as u64
}

/// Seniority of a divergent block's leader as seen from the common
/// ancestor: age at the block's own round, then enrollment order.
pub fn leader_rank(ancestor: &BranchState, block: &Block) -> (u64, Reverse<QueueKey>) {
    match ancestor.id_of(block.leader()) {
        Some(id) => {
            let st = ancestor.identity(id);
            let age = block.round().saturating_sub(st.record.last_creation_round);
            (age, Reverse(st.queue_key))
        }
        None => (0, Reverse(QueueKey { round: u64::MAX, slot: u32::MAX })),
    }
}

/// Orders two blocks that extend the same `ancestor`. `Greater` means `a`
/// wins: the older leader, and for the same seniority the larger encoding.
pub fn compare_divergent(ancestor: &BranchState, a: &SealedBlock, b: &SealedBlock) -> Ordering {
    leader_rank(ancestor, a)
        .cmp(&leader_rank(ancestor, b))
        .then_with(|| a.bytes().cmp(b.bytes()))
}

/// Picks the preferred branch among `branches` (block lists after genesis).
/// Returns the index of the first branch equal to the winner.
pub fn select_branch(
    genesis: Arc<GenesisConfig>,
    params: &ProtocolParams,
    branches: &[Vec<Block>],
) -> Result<usize, ForkChoiceError> {
    struct Valid {
        index: usize,
        sealed: Vec<SealedBlock>,
        states: Vec<BranchState>,
    }
    let mut valid = Vec::new();
    for (index, blocks) in branches.iter().enumerate() {
        if verify_branch(genesis.clone(), params, blocks).is_err() {
            continue;
        }
        let mut states = vec![BranchState::from_genesis(genesis.clone(), params).expect("verified")];
        let mut sealed = Vec::with_capacity(blocks.len());
        for b in blocks {
            let s = SealedBlock::new(b.clone());
            let last = states.last().unwrap();
            let sel = crate::selection::round_selection(last, params, b.round());
            states.push(last.apply_block(params, &s, &sel).expect("verified"));
            sealed.push(s);
        }
        valid.push(Valid { index, sealed, states });
    }
    let mut best: Option<&Valid> = None;
    for v in &valid {
        let Some(cur) = best else {
            best = Some(v);
            continue;
        };
        let ord = v.sealed.len().cmp(&cur.sealed.len()).then_with(|| {
            let split = v
                .sealed
                .iter()
                .zip(&cur.sealed)
                .position(|(x, y)| x.hash() != y.hash());
            match split {
                Some(i) => compare_divergent(&v.states[i], &v.sealed[i], &cur.sealed[i]),
                None => Ordering::Equal,
            }
        });
        if ord == Ordering::Greater {
            best = Some(v);
        }
    }
    best.map(|v| v.index).ok_or(ForkChoiceError::NoValidBranch)
}
