use std::fmt::Write as _;

use num_traits::Float;
use serde::Serialize;

use crate::formulas::{pr_afs, pr_alv, pr_bfs, AnalysisError};
use crate::logprob::{sci4, LogProb};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepConfig<F> {
    pub n_endorsers: u32,
    pub alpha: F,
    pub beta: F,
    pub depth: u32,
    pub liveness_rounds: u32,
    pub q_min: u32,
    pub q_max: u32,
    pub log2_leaves: F,
    pub afs_threshold: F,
    pub alv_threshold: F,
}

impl SweepConfig<f64> {
    /// Full quorum range with the default leaf count and thresholds.
    pub fn new(n_endorsers: u32, alpha: f64, beta: f64, depth: u32, liveness_rounds: u32) -> Self {
        SweepConfig {
            n_endorsers,
            alpha,
            beta,
            depth,
            liveness_rounds,
            q_min: 1,
            q_max: n_endorsers,
            log2_leaves: 80.0,
            afs_threshold: 1e-12,
            alv_threshold: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow<F> {
    pub q: u32,
    pub pr_bfs: LogProb<F>,
    pub pr_afs: LogProb<F>,
    pub pr_alv: LogProb<F>,
    /// `pr_alv` to the power `liveness_rounds`.
    pub pr_alv_s: LogProb<F>,
    pub afs_ok: bool,
    pub alv_ok: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep<F> {
    pub config: SweepConfig<F>,
    pub rows: Vec<SweepRow<F>>,
    /// Largest q meeting both thresholds.
    pub recommended: Option<u32>,
}

pub fn quorum_sweep<F: Float>(cfg: &SweepConfig<F>) -> Result<Sweep<F>, AnalysisError> {
    if cfg.q_min > cfg.q_max || cfg.q_max > cfg.n_endorsers {
        return Err(AnalysisError::EmptyRange(cfg.q_min, cfg.q_max));
    }
    let afs_thr = LogProb::from_prob(cfg.afs_threshold);
    let alv_thr = LogProb::from_prob(cfg.alv_threshold);
    let mut rows = Vec::with_capacity((cfg.q_max - cfg.q_min + 1) as usize);
    for q in cfg.q_min..=cfg.q_max {
        let afs = pr_afs(cfg.n_endorsers, q, cfg.alpha, cfg.beta, cfg.depth, cfg.log2_leaves)?;
        let alv = pr_alv(cfg.n_endorsers, q, cfg.alpha, cfg.beta)?;
        let alv_s = alv.powf(F::from(cfg.liveness_rounds).unwrap());
        rows.push(SweepRow {
            q,
            pr_bfs: pr_bfs(cfg.n_endorsers, q, cfg.alpha, cfg.beta)?,
            pr_afs: afs,
            pr_alv: alv,
            pr_alv_s: alv_s,
            afs_ok: afs <= afs_thr,
            alv_ok: alv_s <= alv_thr,
        });
    }
    let recommended = rows.iter().filter(|r| r.afs_ok && r.alv_ok).map(|r| r.q).max();
    Ok(Sweep {
        config: *cfg,
        rows,
        recommended,
    })
}

pub const SWEEP_CSV_HEADER: &str =
    "q,n_endorsers,alpha,beta,depth,liveness_rounds,pr_bfs,pr_afs,pr_alv,pr_alv_s,afs_ok,alv_ok,recommended";

impl<F: Float + std::fmt::Display> Sweep<F> {
    pub fn to_csv(&self, with_header: bool) -> String {
        let c = &self.config;
        let mut out = String::new();
        if with_header {
            out.push_str(SWEEP_CSV_HEADER);
            out.push('\n');
        }
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.q,
                c.n_endorsers,
                c.alpha,
                c.beta,
                c.depth,
                c.liveness_rounds,
                sci4(r.pr_bfs),
                sci4(r.pr_afs),
                sci4(r.pr_alv),
                sci4(r.pr_alv_s),
                r.afs_ok,
                r.alv_ok,
                self.recommended == Some(r.q)
            )
            .unwrap();
        }
        out
    }
}
