use std::collections::BTreeSet;

use rrr_core::params::{ParamsError, ProtocolParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AdversaryConfig;

pub type NodeId = u32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LatencyModel {
    Constant { ms: u64 },
    Uniform { min_ms: u64, max_ms: u64 },
    /// Explicit per-link latencies; other links use `default_ms`.
    PerLink { default_ms: u64, links: Vec<(NodeId, NodeId, u64)> },
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel::Constant { ms: 50 }
    }
}

impl LatencyModel {
    pub fn max_ms(&self) -> u64 {
        match self {
            LatencyModel::Constant { ms } => *ms,
            LatencyModel::Uniform { max_ms, .. } => *max_ms,
            LatencyModel::PerLink { default_ms, links } => {
                links.iter().map(|l| l.2).max().unwrap_or(0).max(*default_ms)
            }
        }
    }
}

/// How the per-round unreachable fraction is realized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaModel {
    /// Every broadcast of a round misses `round(β·n)` honest receivers drawn
    /// afresh per sender; missed blocks arrive when the next round begins.
    #[default]
    PerSender,
    /// `round(β·n)` honest nodes are offline for the whole
    /// round: they neither send nor receive round messages.
    NodeOffline,
    /// As `NodeOffline`, but the offline set is drawn once for the run.
    NodeOfflineSticky,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    /// Inclusive round range.
    pub from_round: u64,
    pub to_round: u64,
    /// Disjoint groups; nodes not listed form one more group.
    pub groups: Vec<Vec<NodeId>>,
}

impl Partition {
    pub fn group_of(&self, n: NodeId) -> usize {
        self.groups
            .iter()
            .position(|g| g.contains(&n))
            .unwrap_or(self.groups.len())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub nodes: u32,
    pub beta: f64,
    pub beta_model: BetaModel,
    pub latency: LatencyModel,
    pub drop_prob: f64,
    pub partitions: Vec<Partition>,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            nodes: 10,
            beta: 0.0,
            beta_model: BetaModel::PerSender,
            latency: LatencyModel::default(),
            drop_prob: 0.0,
            partitions: Vec::new(),
            seed: 1,
        }
    }
}

/// Everything one simulation run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub params: ProtocolParams,
    pub net: NetConfig,
    pub adversary: AdversaryConfig,
    pub rounds: u64,
    /// Synthetic transactions injected into every pool per round.
    pub txs_per_round: u32,
    /// Honest platforms outside genesis and the rounds they try to enroll.
    pub honest_joiners: Vec<u64>,
    /// Blocks kept below each node's best tip before pruning.
    pub retain_depth: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            params: ProtocolParams::default(),
            net: NetConfig::default(),
            adversary: AdversaryConfig::default(),
            rounds: 100,
            txs_per_round: 2,
            honest_joiners: Vec::new(),
            retain_depth: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("protocol parameters: {0}")]
    Params(#[from] ParamsError),
    #[error("config inconsistent: {0}")]
    Inconsistent(String),
}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Inconsistent(msg.into()))
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        let n = self.net.nodes;
        if n == 0 {
            return bad("nodes must be at least 1");
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        if !(0.0..1.0).contains(&self.net.beta) {
            return bad("beta must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.net.drop_prob) {
            return bad("drop_prob must lie in [0, 1]");
        }
        if !(0.0..0.5).contains(&self.adversary.alpha) {
            return bad("alpha must lie in [0, 0.5)");
        }
        if self.net.latency.max_ms() >= self.params.intent_ms.min(self.params.confirm_ms) {
            return bad("latency must stay below the intent and confirmation phases");
        }
        if let LatencyModel::Uniform { min_ms, max_ms } = self.net.latency {
            if min_ms > max_ms {
                return bad("uniform latency min exceeds max");
            }
        }
        let total = self.total_nodes();
        if let LatencyModel::PerLink { links, .. } = &self.net.latency {
            if links.iter().any(|l| l.0 >= total || l.1 >= total) {
                return bad("latency link names an unknown node");
            }
        }
        for p in &self.net.partitions {
            if p.from_round > p.to_round {
                return bad("partition round range is empty");
            }
            let mut seen = BTreeSet::new();
            for id in p.groups.iter().flatten() {
                if *id >= total || !seen.insert(*id) {
                    return bad("partition groups must be disjoint known nodes");
                }
            }
        }
        if self.retain_depth < self.params.confirm_depth + 2 {
            return bad("retain_depth must exceed confirm_depth + 1");
        }
        self.adversary.validate(n, total)?;
        Ok(())
    }

    /// Genesis nodes plus adversarial and honest joiners.
    pub fn total_nodes(&self) -> u32 {
        self.net.nodes + self.adversary.extra_identities() + self.honest_joiners.len() as u32
    }
}
