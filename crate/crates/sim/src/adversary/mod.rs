//! Byzantine strategies plugged into the simulator, the seed-grinding
//! search and the priority-selection bias baseline.

mod bias;
mod grind;

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use bias::{bias_monte_carlo, simulate_bias_baseline, BiasConfig, BiasPoint, BiasTrajectory, BIAS_CSV_HEADER};
pub use grind::{grind_seed, GrindError, GrindOutcome, GrindSpec};

use crate::config::{ConfigError, NodeId};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Strategy {
    /// Adversarial identities follow the protocol.
    #[default]
    None,
    /// Adversarial endorsers never confirm honest candidates, or only the
    /// listed ones when `targets` is non-empty.
    WithholdConfirm {
        #[serde(default)]
        targets: Vec<NodeId>,
    },
    /// Adversarial candidates also prepare a second intent on a separate
    /// fork, endorsed only by the adversary, and publish its block late.
    DoubleIntentFork {
        #[serde(default = "default_release_ms")]
        release_delay_ms: u64,
    },
    /// Adversarial endorsers confirm up to `max_intents` intents per round.
    Equivocate {
        #[serde(default = "default_max_intents")]
        max_intents: u32,
    },
    /// `k` fresh adversarial platforms enroll at activation.
    EnrollBurst { k: u32 },
    /// Adversarial leaders leave the targets' transactions, enrollments and
    /// confirmations out of their blocks.
    Censor { targets: Vec<NodeId> },
    /// Adversarial candidates holding the front of the queue choose which
    /// one publishes so as to steer future seeds.
    Grind {
        branching: u32,
        depth: u32,
        leaf_budget: u64,
        /// Extra adversarial platforms enrolled at activation to create
        /// runs of consecutive oldest candidates.
        #[serde(default)]
        burst: u32,
    },
}

fn default_release_ms() -> u64 {
    1000
}

fn default_max_intents() -> u32 {
    2
}

/// Which genesis identities the adversary holds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// A seeded random subset.
    #[default]
    Spread,
    /// The oldest identities.
    Oldest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryConfig {
    pub alpha: f64,
    pub strategy: Strategy,
    pub placement: Placement,
    /// Inclusive round range in which the strategy is applied.
    pub active_from: u64,
    pub active_to: u64,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig {
            alpha: 0.0,
            strategy: Strategy::None,
            placement: Placement::Spread,
            active_from: 1,
            active_to: u64::MAX,
        }
    }
}

impl AdversaryConfig {
    pub fn new(alpha: f64, strategy: Strategy) -> Self {
        AdversaryConfig {
            alpha,
            strategy,
            ..Default::default()
        }
    }

    pub fn is_active(&self, round: u64) -> bool {
        !matches!(self.strategy, Strategy::None) && (self.active_from..=self.active_to).contains(&round)
    }

    /// Genesis identities held by the adversary among `n`.
    pub fn genesis_count(&self, n: u32) -> u32 {
        (self.alpha * n as f64).round() as u32
    }

    /// Platforms the adversary enrolls during the run.
    pub fn extra_identities(&self) -> u32 {
        match self.strategy {
            Strategy::EnrollBurst { k } => k,
            Strategy::Grind { burst, .. } => burst,
            _ => 0,
        }
    }

    /// `n` genesis nodes, `total` including joiners.
    pub fn validate(&self, n: u32, total: u32) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Inconsistent(m.into()));
        if self.active_from > self.active_to {
            return bad("adversary activation range is empty");
        }
        match &self.strategy {
            Strategy::Equivocate { max_intents } if *max_intents < 1 => bad("max_intents must be at least 1"),
            Strategy::Grind {
                branching, depth, ..
            } if *branching < 1 || *depth < 1 => bad("grind branching and depth must be at least 1"),
            Strategy::WithholdConfirm { targets } | Strategy::Censor { targets }
                if targets.iter().any(|t| *t >= total) =>
            {
                bad("adversary targets must be known nodes")
            }
            s if !matches!(s, Strategy::None) && self.genesis_count(n) == 0 && self.extra_identities() == 0 => {
                bad("strategy needs at least one adversarial identity")
            }
            _ => Ok(()),
        }
    }
}

/// The adversarial node set, fixed when the simulation is set up. There is
/// no way to add or remove members afterwards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdversarySet {
    members: Arc<BTreeSet<NodeId>>,
}

impl AdversarySet {
    /// Picks `cfg.genesis_count(n)` of the genesis nodes `0..n` and adds the
    /// `extra` joiners `n..n+extra`.
    pub fn choose<R: Rng>(cfg: &AdversaryConfig, n: u32, extra: u32, rng: &mut R) -> Self {
        let count = cfg.genesis_count(n) as usize;
        let mut ids: Vec<NodeId> = (0..n).collect();
        let mut members: BTreeSet<NodeId> = match cfg.placement {
            Placement::Oldest => ids.into_iter().take(count).collect(),
            Placement::Spread => {
                ids.shuffle(rng);
                ids.into_iter().take(count).collect()
            }
        };
        members.extend(n..n + extra);
        AdversarySet {
            members: Arc::new(members),
        }
    }

    pub fn from_ids(ids: impl IntoIterator<Item = NodeId>) -> Self {
        AdversarySet {
            members: Arc::new(ids.into_iter().collect()),
        }
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.members.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.members.iter().copied()
    }
}
