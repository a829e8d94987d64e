//! Candidate queue, inactivity skipping and endorser sampling.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::chain::{BranchState, EndorserBasis, HeadStreak, IdentityId, QueueKey};
use crate::crypto::{hash_parts, Digest, Domain, PublicKey, Seed};
use crate::params::ProtocolParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize)]
pub enum SelectionError {
    #[error("no identity is eligible to endorse")]
    EmptyPopulation,
}

/// Identities with a confirmation recorded in the newest `T_a` blocks,
/// mapped to the height of their latest one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveSet {
    pub members: BTreeMap<PublicKey, u64>,
    pub snapshot_height: u64,
}

pub fn select_active(branch: &BranchState, activity_threshold: u64) -> ActiveSet {
    let start = crate::chain::window_start(branch.height, activity_threshold);
    let members = branch
        .identities()
        .filter(|(_, s)| s.confirmed_since(start))
        .map(|(_, s)| (s.record.pk, s.last_confirm_height.unwrap()))
        .collect();
    ActiveSet {
        members,
        snapshot_height: branch.height,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub id: IdentityId,
    pub pk: PublicKey,
    pub age: u64,
    pub queue_key: QueueKey,
}

/// Up to `N_c` candidates, oldest first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CandidateList {
    pub round: u64,
    pub entries: Vec<Candidate>,
}

impl CandidateList {
    pub fn position(&self, pk: &PublicKey) -> Option<usize> {
        self.entries.iter().position(|c| c.pk == *pk)
    }

    pub fn contains(&self, pk: &PublicKey) -> bool {
        self.position(pk).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Sampled endorsers of one round with their slot multiplicities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Committee {
    pub round: u64,
    /// Sampled identity per slot, duplicates retained.
    pub slots: Vec<PublicKey>,
    weights: BTreeMap<Digest, (IdentityId, PublicKey, u32)>,
}

impl Committee {
    /// Slot weight of the endorser whose key hashes to `key_hash`.
    pub fn weight_of_hash(&self, key_hash: &Digest) -> u32 {
        self.weights.get(key_hash).map_or(0, |w| w.2)
    }

    pub fn weight_of(&self, pk: &PublicKey) -> u32 {
        self.weight_of_hash(&pk.key_hash())
    }

    pub fn member(&self, key_hash: &Digest) -> Option<(IdentityId, PublicKey, u32)> {
        self.weights.get(key_hash).copied()
    }

    /// Distinct endorsers in key-hash order.
    pub fn members(&self) -> impl Iterator<Item = (IdentityId, PublicKey, u32)> + '_ {
        self.weights.values().copied()
    }

    pub fn distinct(&self) -> usize {
        self.weights.len()
    }
}

/// Everything a branch state determines about one round.
#[derive(Clone, Debug)]
pub struct RoundSelection {
    pub round: u64,
    pub candidates: CandidateList,
    pub committee: Result<Committee, SelectionError>,
    /// Head streak at `round`, after applying the skip rule.
    pub head: HeadStreak,
    /// Identities the skip rule removed between the tip and `round`.
    pub newly_skipped: Vec<IdentityId>,
}

pub fn round_selection(branch: &BranchState, params: &ProtocolParams, round: u64) -> RoundSelection {
    let (candidates, head, newly_skipped) = walk_queue(branch, params, round);
    RoundSelection {
        round,
        candidates,
        committee: select_endorsers(branch, params, round),
        head,
        newly_skipped,
    }
}

pub fn select_candidates(branch: &BranchState, params: &ProtocolParams, round: u64) -> CandidateList {
    walk_queue(branch, params, round).0
}

/// Advances the head streak over the empty rounds between the tip and
/// `round`, skipping any head that stayed oldest for `N_c` rounds.
fn walk_queue(
    branch: &BranchState,
    params: &ProtocolParams,
    round: u64,
) -> (CandidateList, HeadStreak, Vec<IdentityId>) {
    assert!(round > branch.round, "round {round} not after tip round {}", branch.round);
    let mut order: Vec<(QueueKey, IdentityId)> = branch
        .identities()
        .filter(|(_, s)| !s.skipped && s.is_active(branch.height, params.activity_threshold))
        .map(|(id, s)| (s.queue_key, id))
        .collect();
    order.sort_unstable();

    let mut head = branch.head();
    let mut pos = 0;
    let mut skipped = Vec::new();
    let mut r = branch.round + 1;
    loop {
        while let Some(&(_, h)) = order.get(pos) {
            if head.head == Some(h) && head.streak >= params.n_candidates {
                skipped.push(h);
                pos += 1;
                head = HeadStreak::default();
            } else {
                if head.head != Some(h) {
                    head = HeadStreak { head: Some(h), streak: 0 };
                }
                break;
            }
        }
        if pos >= order.len() {
            head = HeadStreak::default();
            break;
        }
        if r == round {
            break;
        }
        // Nothing was produced on this branch in round r. Jump straight to
        // the round where the current head hits the limit.
        let left = params.n_candidates.saturating_sub(head.streak) as u64;
        let step = left.max(1).min(round - r);
        head.streak += step as u32;
        r += step;
    }

    let entries = order[pos.min(order.len())..]
        .iter()
        .take(params.n_candidates as usize)
        .map(|&(key, id)| {
            let st = branch.identity(id);
            Candidate {
                id,
                pk: st.record.pk,
                age: crate::identity::age(&st.record, round),
                queue_key: key,
            }
        })
        .collect();
    (CandidateList { round, entries }, head, skipped)
}

/// Deterministic slot draws: `N_e` indices into a population of size `n`,
/// uniform and independent, from counter-mode hashing with rejection.
pub fn sample_slots(seed: &Seed, round: u64, population: usize, n_endorsers: u32) -> Vec<usize> {
    assert!(population > 0);
    let n = population as u64;
    let zone = u64::MAX - (u64::MAX % n);
    (0..n_endorsers)
        .map(|slot| {
            let mut ctr: u32 = 0;
            loop {
                let x = hash_parts(&[
                    &[Domain::Sampling as u8],
                    &seed.0,
                    &round.to_be_bytes(),
                    &slot.to_be_bytes(),
                    &ctr.to_be_bytes(),
                ])
                .prefix_u64();
                if x < zone {
                    break (x % n) as usize;
                }
                ctr += 1;
            }
        })
        .collect()
}

/// Samples the committee for `round` from a basis snapshot.
pub fn sample_committee(
    basis: &EndorserBasis,
    params: &ProtocolParams,
    round: u64,
) -> Result<Committee, SelectionError> {
    let eligible: Vec<_> = basis
        .population
        .iter()
        .filter(|m| m.genesis || round >= m.enroll_round + params.enroll_threshold)
        .collect();
    if eligible.is_empty() {
        return Err(SelectionError::EmptyPopulation);
    }
    let mut slots = Vec::with_capacity(params.n_endorsers as usize);
    let mut weights = BTreeMap::new();
    for i in sample_slots(&basis.seed, round, eligible.len(), params.n_endorsers) {
        let m = eligible[i];
        slots.push(m.pk);
        weights.entry(m.key_hash).or_insert((m.id, m.pk, 0)).2 += 1;
    }
    Ok(Committee { round, slots, weights })
}

/// Committee for the round after the branch tip, sampled from the stable
/// snapshot `d` blocks back.
pub fn select_endorsers(
    branch: &BranchState,
    params: &ProtocolParams,
    round: u64,
) -> Result<Committee, SelectionError> {
    sample_committee(branch.endorser_basis(params), params, round)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_member_fills_every_slot() {
        let s = sample_slots(&Seed::ZERO, 1, 1, 100);
        assert!(s.iter().all(|&i| i == 0));
    }

    #[test]
    fn sampling_is_deterministic_and_round_sensitive() {
        let a = sample_slots(&Seed::MAX, 7, 20, 100);
        assert_eq!(a, sample_slots(&Seed::MAX, 7, 20, 100));
        assert_ne!(a, sample_slots(&Seed::MAX, 8, 20, 100));
    }
}
