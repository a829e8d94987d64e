use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Every tunable protocol constant. Durations are virtual milliseconds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// `N_c`, leader candidates per round.
    pub n_candidates: u32,
    /// `N_e`, endorser slots sampled per round.
    pub n_endorsers: u32,
    /// `q`, confirmation slot-weight a candidate needs.
    pub quorum: u32,
    /// `T_a`, blocks an identity stays active after its last confirmation.
    pub activity_threshold: u64,
    /// `T_e`, rounds a new identity waits before it can be an endorser.
    pub enroll_threshold: u64,
    /// `d`, confirmation depth; endorser sampling reads the block this deep.
    pub confirm_depth: u64,
    /// `N_r`, blocks an identity must create to pay for one enrollment.
    pub identity_reward_cost: u32,
    pub round_ms: u64,
    pub intent_ms: u64,
    pub confirm_ms: u64,
    pub block_ms: u64,
    /// Maximum enrollments a leader packs into a block.
    pub max_enrolls_per_block: u32,
    /// Maximum transactions a leader packs into a block.
    pub max_txs_per_block: u32,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            n_candidates: 5,
            n_endorsers: 100,
            quorum: 54,
            activity_threshold: 20_000,
            enroll_threshold: 100,
            confirm_depth: 12,
            identity_reward_cost: 1,
            round_ms: 5000,
            intent_ms: 500,
            confirm_ms: 500,
            block_ms: 4000,
            max_enrolls_per_block: 16,
            max_txs_per_block: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamsError {
    #[error("quorum must satisfy 0 < q <= N_e (q = {quorum}, N_e = {n_endorsers})")]
    Quorum { quorum: u32, n_endorsers: u32 },
    #[error("n_candidates must be at least 1")]
    NoCandidates,
    #[error("confirm_depth must be at least 1")]
    ZeroDepth,
    #[error("enroll_threshold ({enroll}) must be below activity_threshold ({activity})")]
    Thresholds { enroll: u64, activity: u64 },
    #[error("phase durations {intent} + {confirm} + {block} do not sum to round_ms {round}")]
    Phases {
        intent: u64,
        confirm: u64,
        block: u64,
        round: u64,
    },
    #[error("identity_reward_cost must be at least 1")]
    ZeroRewardCost,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.quorum == 0 || self.quorum > self.n_endorsers {
            return Err(ParamsError::Quorum {
                quorum: self.quorum,
                n_endorsers: self.n_endorsers,
            });
        }
        if self.n_candidates == 0 {
            return Err(ParamsError::NoCandidates);
        }
        if self.confirm_depth == 0 {
            return Err(ParamsError::ZeroDepth);
        }
        if self.enroll_threshold >= self.activity_threshold {
            return Err(ParamsError::Thresholds {
                enroll: self.enroll_threshold,
                activity: self.activity_threshold,
            });
        }
        if self.intent_ms + self.confirm_ms + self.block_ms != self.round_ms {
            return Err(ParamsError::Phases {
                intent: self.intent_ms,
                confirm: self.confirm_ms,
                block: self.block_ms,
                round: self.round_ms,
            });
        }
        if self.identity_reward_cost == 0 {
            return Err(ParamsError::ZeroRewardCost);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ProtocolParams::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_quorum_and_phases() {
        let p = ProtocolParams { quorum: 101, ..Default::default() };
        assert!(matches!(p.validate(), Err(ParamsError::Quorum { .. })));
        let p = ProtocolParams { block_ms: 1, ..Default::default() };
        assert!(matches!(p.validate(), Err(ParamsError::Phases { .. })));
        let mut p = ProtocolParams::default();
        p.enroll_threshold = p.activity_threshold;
        assert!(matches!(p.validate(), Err(ParamsError::Thresholds { .. })));
    }

    #[test]
    fn json_round_trip_with_partial_input() {
        let p: ProtocolParams = serde_json::from_str(r#"{"quorum": 60}"#).unwrap();
        assert_eq!(p.quorum, 60);
        assert_eq!(p.n_endorsers, 100);
        assert!(serde_json::from_str::<ProtocolParams>(r#"{"quorom": 60}"#).is_err());
    }
}
