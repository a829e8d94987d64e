use rrr_core::crypto::{vrf_evaluate, KeyPair, Seed};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrindSpec {
    /// Choices considered per level: the oldest unused controlled keys.
    pub branching: u32,
    pub depth: u32,
    pub leaf_budget: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GrindError {
    #[error("seed tree has {leaves} leaves, budget is {budget}")]
    BudgetExceeded { leaves: u128, budget: u64 },
    #[error("no controlled key to grind with")]
    NoKeys,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrindOutcome {
    /// Index into the key list of the publisher at each level.
    pub path: Vec<usize>,
    pub leaf_seed: Seed,
    pub score: u64,
    pub leaves: u64,
}

/// Number of leaves of the tree: level `i` offers `min(b, keys - i)` keys.
fn leaf_count(keys: usize, spec: &GrindSpec) -> u128 {
    (0..spec.depth as usize)
        .map(|i| keys.saturating_sub(i).min(spec.branching as usize).max(1) as u128)
        .fold(1u128, |acc, c| acc.saturating_mul(c))
}

/// Exhaustive search of the seed-prediction tree. At each level one of the
/// `branching` oldest unused keys publishes and advances the seed through
/// its VRF; the leaf seed with the highest `score` wins, first path on ties.
/// Levels stop early once every key has been used.
pub fn grind_seed<F>(keys: &[KeyPair], start: &Seed, spec: &GrindSpec, mut score: F) -> Result<GrindOutcome, GrindError>
where
    F: FnMut(&Seed) -> u64,
{
    if keys.is_empty() {
        return Err(GrindError::NoKeys);
    }
    let depth = (spec.depth as usize).min(keys.len());
    let spec = GrindSpec { depth: depth as u32, ..*spec };
    let leaves = leaf_count(keys.len(), &spec);
    if leaves > spec.leaf_budget as u128 {
        return Err(GrindError::BudgetExceeded {
            leaves,
            budget: spec.leaf_budget,
        });
    }
    let mut best: Option<(u64, Vec<usize>, Seed)> = None;
    let mut used = vec![false; keys.len()];
    let mut path = Vec::with_capacity(depth);
    let mut ctx = Search {
        keys,
        branching: spec.branching as usize,
        depth,
        score: &mut score,
        best: &mut best,
        visited: 0,
    };
    ctx.descend(start, &mut used, &mut path);
    let visited = ctx.visited;
    let (score, path, leaf_seed) = best.expect("tree has a leaf");
    Ok(GrindOutcome {
        path,
        leaf_seed,
        score,
        leaves: visited,
    })
}

struct Search<'a, F> {
    keys: &'a [KeyPair],
    branching: usize,
    depth: usize,
    score: &'a mut F,
    best: &'a mut Option<(u64, Vec<usize>, Seed)>,
    visited: u64,
}

impl<F: FnMut(&Seed) -> u64> Search<'_, F> {
    fn descend(&mut self, seed: &Seed, used: &mut [bool], path: &mut Vec<usize>) {
        if path.len() == self.depth {
            self.visited += 1;
            let s = (self.score)(seed);
            if self.best.as_ref().is_none_or(|(b, ..)| s > *b) {
                *self.best = Some((s, path.clone(), *seed));
            }
            return;
        }
        let options: Vec<usize> = (0..self.keys.len()).filter(|i| !used[*i]).take(self.branching).collect();
        for i in options {
            let next = vrf_evaluate(&self.keys[i], seed).seed;
            used[i] = true;
            path.push(i);
            self.descend(&next, used, path);
            path.pop();
            used[i] = false;
        }
    }
}
