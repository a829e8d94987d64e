use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{NodeId, SimConfig};
use crate::network::MessageTotals;

pub const ROUND_CSV_HEADER: &str = "round,leader,weight,forked,skipped,msgs";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    /// Creator of the round's block on the final selected chain.
    pub leader: Option<NodeId>,
    /// Endorsement slot weight carried by that block.
    pub weight: u32,
    /// At least two valid blocks were published for this round.
    pub forked: bool,
    pub skipped: bool,
    /// Protocol messages originated in this round.
    pub msgs: u64,
    /// Oldest candidate at round start, as seen by the observer node.
    pub head: Option<NodeId>,
    pub head_adversarial: bool,
    pub blocks_published: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryEvent {
    pub round: u64,
    pub kind: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrollmentRecord {
    pub node: NodeId,
    pub adversarial: bool,
    pub submitted_round: u64,
    /// Round of the block that included it on the final selected chain.
    pub included_round: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub adversary_nodes: Vec<NodeId>,
    pub observer: NodeId,
    pub outcomes: Vec<RoundRecord>,
    pub blocks: u64,
    pub skips: u64,
    pub fork_rounds: u64,
    /// Lengths of abandoned branches, measured from where they left the
    /// selected chain.
    pub fork_depth_histogram: BTreeMap<u64, u64>,
    pub max_fork_depth: u64,
    pub block_counts: BTreeMap<NodeId, u64>,
    pub adversary_blocks: u64,
    /// Deepest switch of the selected tip at any honest node.
    pub max_reorg_depth: u64,
    /// Honest tip switches that abandoned more than `confirm_depth` blocks.
    pub finality_violations: u64,
    pub equivocation_evidence: u64,
    pub messages: MessageTotals,
    pub late_intents: u64,
    pub late_confirms: u64,
    pub invalid_blocks: u64,
    pub mean_unreachable: f64,
    pub enrollments: Vec<EnrollmentRecord>,
    pub adversary_events: Vec<AdversaryEvent>,
}

impl SimReport {
    pub fn rounds(&self) -> u64 {
        self.outcomes.len() as u64
    }

    pub fn skip_rate(&self) -> f64 {
        self.skips as f64 / self.rounds().max(1) as f64
    }

    pub fn fork_rate(&self) -> f64 {
        self.fork_rounds as f64 / self.rounds().max(1) as f64
    }

    pub fn adversary_block_share(&self) -> f64 {
        self.adversary_blocks as f64 / self.blocks.max(1) as f64
    }

    /// Skip rate over rounds whose oldest candidate was honest.
    pub fn honest_head_skip_rate(&self) -> (u64, u64) {
        let rounds: Vec<_> = self
            .outcomes
            .iter()
            .filter(|o| o.head.is_some() && !o.head_adversarial)
            .collect();
        (rounds.iter().filter(|o| o.skipped).count() as u64, rounds.len() as u64)
    }

    /// Longest run of consecutive skipped rounds.
    pub fn longest_skip_run(&self) -> u64 {
        let mut best = 0;
        let mut cur = 0;
        for o in &self.outcomes {
            cur = if o.skipped { cur + 1 } else { 0 };
            best = best.max(cur);
        }
        best
    }

    /// Checks the totals against the per-round records.
    pub fn check_consistency(&self) -> Result<(), String> {
        let produced = self.outcomes.iter().filter(|o| !o.skipped).count() as u64;
        let counted: u64 = self.block_counts.values().sum();
        if produced != self.blocks || counted != self.blocks {
            return Err(format!(
                "blocks {} vs non-skipped rounds {produced} vs per-identity sum {counted}",
                self.blocks
            ));
        }
        if self.skips + self.blocks != self.rounds() {
            return Err("skips and blocks do not cover every round".into());
        }
        let m = &self.messages;
        if m.copies_sent != m.delivered + m.dropped + m.filtered + m.unreachable + m.in_flight {
            return Err("message copies not conserved".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(ROUND_CSV_HEADER);
        out.push('\n');
        for o in &self.outcomes {
            let leader = o.leader.map(|l| l.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                o.round, leader, o.weight, o.forked as u8, o.skipped as u8, o.msgs
            ));
        }
        out
    }
}
