#![allow(dead_code)]

use std::cmp::Ordering;

use rrr_core::chain::{select_branch, verify_branch, Block, BranchState, ForkChoiceError, SealedBlock};
use rrr_core::crypto::PublicKey;

use super::{tx, Forge};

/// Age of `leader` at `round` given the blocks before the fork, computed
/// from the raw block list: rounds since it last led, or since genesis.
pub fn leader_age(genesis_order: &[PublicKey], prefix: &[Block], leader: &PublicKey, round: u64) -> (u64, usize) {
    let last = prefix.iter().rev().find(|b| b.leader() == leader).map_or(0, |b| b.round());
    // Among identities that never led, the earlier genesis entry is older.
    let seniority = genesis_order.len() - genesis_order.iter().position(|pk| pk == leader).unwrap_or(genesis_order.len());
    (round - last, seniority)
}

/// Literal replay of the selection loop: drop invalid branches, keep the
/// longest, then walk them keeping the one whose divergent block has the
/// older leader, or on equal age the larger encoding.
pub fn oracle<'a>(forge: &Forge, branches: &'a [Vec<Block>]) -> Option<&'a Vec<Block>> {
    let genesis_order: Vec<PublicKey> = forge.genesis.identities.iter().map(|g| g.pk).collect();
    let valid: Vec<&Vec<Block>> = branches
        .iter()
        .filter(|b| verify_branch(forge.genesis.clone(), &forge.params, b).is_ok())
        .collect();
    let max = valid.iter().map(|b| b.len()).max()?;
    let longest: Vec<&Vec<Block>> = valid.into_iter().filter(|b| b.len() == max).collect();
    let mut selected = longest[0];
    let mut counter = 1;
    while counter < longest.len() {
        let current = longest[counter];
        counter += 1;
        let Some(split) = selected.iter().zip(current.iter()).position(|(x, y)| x != y) else {
            continue;
        };
        let (s, c) = (&selected[split], &current[split]);
        let age_s = leader_age(&genesis_order, &selected[..split], s.leader(), s.round());
        let age_c = leader_age(&genesis_order, &current[..split], c.leader(), c.round());
        match age_s.cmp(&age_c) {
            Ordering::Less => selected = current,
            Ordering::Equal => {
                let bytes = |b: &Block| SealedBlock::new(b.clone()).bytes().to_vec();
                if bytes(s) < bytes(c) {
                    selected = current;
                }
            }
            Ordering::Greater => {}
        }
    }
    Some(selected)
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Extends `st` with one block per `(round, rank, tx tag)`.
pub fn grow(forge: &Forge, prefix: &[Block], st: &BranchState, steps: &[(u64, usize, u32)]) -> Vec<Block> {
    let mut st = st.clone();
    let mut out = prefix.to_vec();
    for &(r, rank, tag) in steps {
        let b = forge.block(&st, r, rank, vec![tx(r, tag)], vec![]);
        st = forge.extend(&st, &b);
        out.push(b);
    }
    out
}

/// Branches diverging at various depths with every tie-break exercised.
pub fn fixture(forge: &Forge, base_len: u64) -> Vec<Vec<Block>> {
    let (base, st) = forge.chain(&forge.start(), 1..=base_len);
    let r = base_len + 1;
    let (early, est) = (&base[..base.len() - 2], {
        let (_, s) = forge.chain(&forge.start(), 1..=base_len - 2);
        s
    });
    let mut tampered = grow(forge, &base, &st, &[(r, 0, 0), (r + 1, 0, 0), (r + 2, 0, 0)]);
    tampered[base.len() + 1].txs[0][0] ^= 0x80;
    vec![
        // Oldest candidate at the fork.
        grow(forge, &base, &st, &[(r, 0, 0), (r + 1, 0, 0), (r + 2, 0, 0)]),
        // Second candidate at the fork, same length.
        grow(forge, &base, &st, &[(r, 1, 0), (r + 1, 0, 0), (r + 2, 0, 0)]),
        // Same leader as the first, different payload.
        grow(forge, &base, &st, &[(r, 0, 7), (r + 1, 0, 0), (r + 2, 0, 0)]),
        grow(forge, &base, &st, &[(r, 0, 8), (r + 1, 1, 0), (r + 2, 0, 0)]),
        // Third candidate after an empty round.
        grow(forge, &base, &st, &[(r + 1, 2, 0), (r + 2, 0, 0), (r + 3, 0, 0)]),
        // Deeper fork, one block longer.
        grow(forge, early, &est, &[(r - 2, 1, 3), (r - 1, 0, 3), (r, 0, 3), (r + 1, 1, 3), (r + 3, 0, 3), (r + 4, 0, 3)]),
        // Shorter.
        grow(forge, &base, &st, &[(r, 1, 5), (r + 1, 0, 5)]),
        tampered,
    ]
}

pub fn check_all_orders(forge: &Forge, branches: &[Vec<Block>], pick: &[usize]) -> usize {
    let perms = permutations(pick.len());
    for perm in &perms {
        let input: Vec<Vec<Block>> = perm.iter().map(|&i| branches[pick[i]].clone()).collect();
        let want = oracle(forge, &input);
        match select_branch(forge.genesis.clone(), &forge.params, &input) {
            Ok(i) => assert_eq!(Some(&input[i]), want, "subset {pick:?} order {perm:?}"),
            Err(ForkChoiceError::NoValidBranch) => assert!(want.is_none()),
        }
    }
    perms.len()
}

/// Every subset of up to four fixture branches and a slice of the
/// five-branch subsets, in every order, for a short and a long base.
/// Returns the number of orderings compared.
pub fn check_fork_fixtures(forge: &Forge) -> usize {
    let mut checked = 0;
    // A short base leaves never-led genesis identities as candidates; a
    // long one makes every candidate a previous leader.
    for base_len in [6, 14] {
        let branches = fixture(forge, base_len);
        let n = branches.len();
        for mask in 1u32..(1 << n) {
            let pick: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            if pick.len() <= 4 || (pick.len() == 5 && mask % 7 == 0) {
                checked += check_all_orders(forge, &branches, &pick);
            }
        }
    }
    checked
}
