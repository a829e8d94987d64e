//! Closed-form security and performance estimates, evaluated in log space.

mod formulas;
mod logprob;
mod special;
mod sweep;

pub use formulas::{
    any_of, binomial_pmf, binomial_tail, pr_ae, pr_afs, pr_alv, pr_bfs, pr_blv, throughput,
    AnalysisError, Throughput, ThroughputInputs,
};
pub use logprob::{sci4, LogProb};
pub use special::{ln_choose, ln_gamma};
pub use sweep::{quorum_sweep, Sweep, SweepConfig, SweepRow, SWEEP_CSV_HEADER};

pub type LogProb64 = LogProb<f64>;
pub type LogProb32 = LogProb<f32>;
pub type Sweep64 = Sweep<f64>;
pub type SweepConfig64 = SweepConfig<f64>;
pub type ThroughputInputs64 = ThroughputInputs<f64>;
