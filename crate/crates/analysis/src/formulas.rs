use num_traits::Float;
use thiserror::Error;

use crate::logprob::LogProb;
use crate::special::ln_choose;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("empty quorum range {0}..={1}")]
    EmptyRange(u32, u32),
}

fn domain<T>(msg: impl Into<String>) -> Result<T, AnalysisError> {
    Err(AnalysisError::Domain(msg.into()))
}

fn f<F: Float>(v: impl num_traits::ToPrimitive) -> F {
    F::from(v).unwrap()
}

fn check_prob<F: Float>(name: &str, p: F) -> Result<(), AnalysisError> {
    if p.is_nan() || p < F::zero() || p > F::one() {
        return domain(format!("{name} must lie in [0, 1]"));
    }
    Ok(())
}

/// `P[X >= k]` for `X ~ Binomial(n, p)`.
pub fn binomial_tail<F: Float>(n: u32, k: u32, p: F) -> Result<LogProb<F>, AnalysisError> {
    check_prob("p", p)?;
    if k == 0 {
        return Ok(LogProb::one());
    }
    if k > n || p == F::zero() {
        return Ok(LogProb::zero());
    }
    if p == F::one() {
        return Ok(LogProb::one());
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let terms = (k..=n).map(|i| {
        LogProb::from_ln(ln_choose::<F>(n as u64, i as u64) + f::<F>(i) * lp + f::<F>(n - i) * lq)
    });
    Ok(LogProb::or_sum(terms))
}

/// `P[X = i]` for `X ~ Binomial(n, p)`.
pub fn binomial_pmf<F: Float>(n: u32, i: u32, p: F) -> Result<LogProb<F>, AnalysisError> {
    check_prob("p", p)?;
    if i > n {
        return Ok(LogProb::zero());
    }
    if p == F::zero() || p == F::one() {
        let hit = (p == F::zero() && i == 0) || (p == F::one() && i == n);
        return Ok(if hit { LogProb::one() } else { LogProb::zero() });
    }
    Ok(LogProb::from_ln(
        ln_choose::<F>(n as u64, i as u64) + f::<F>(i) * p.ln() + f::<F>(n - i) * (-p).ln_1p(),
    ))
}

fn check_mass<F: Float>(alpha: F, beta: F) -> Result<F, AnalysisError> {
    check_prob("alpha", alpha)?;
    check_prob("beta", beta)?;
    let m = alpha + beta;
    if m >= F::one() {
        return domain("alpha + beta must be below 1");
    }
    Ok(m)
}

fn check_quorum(n_endorsers: u32, quorum: u32) -> Result<(), AnalysisError> {
    if quorum > n_endorsers {
        return domain(format!("quorum {quorum} exceeds N_e = {n_endorsers}"));
    }
    Ok(())
}

/// Benign fork sampling: at least `q` of `N_e` slots land in the
/// adversarial or unreachable mass `α + β`.
pub fn pr_bfs<F: Float>(n_endorsers: u32, quorum: u32, alpha: F, beta: F) -> Result<LogProb<F>, AnalysisError> {
    check_quorum(n_endorsers, quorum)?;
    binomial_tail(n_endorsers, quorum, check_mass(alpha, beta)?)
}

/// Adversarial fork sampling: union bound over `2^log2_leaves` seed
/// schedules of `depth` consecutive benign-fork samplings.
pub fn pr_afs<F: Float>(
    n_endorsers: u32,
    quorum: u32,
    alpha: F,
    beta: F,
    depth: u32,
    log2_leaves: F,
) -> Result<LogProb<F>, AnalysisError> {
    if log2_leaves < F::zero() {
        return domain("log2_leaves must be non-negative");
    }
    let per_round = pr_bfs(n_endorsers, quorum, alpha, beta)?;
    let ln2 = f::<F>(std::f64::consts::LN_2);
    Ok(per_round.powf(f(depth)).scale_capped(log2_leaves * ln2))
}

/// Benign liveness violation: unreachable nodes alone hold at least
/// `N_e - q` slots.
pub fn pr_blv<F: Float>(n_endorsers: u32, quorum: u32, beta: F) -> Result<LogProb<F>, AnalysisError> {
    check_quorum(n_endorsers, quorum)?;
    check_mass(F::zero(), beta)?;
    binomial_tail(n_endorsers, n_endorsers - quorum, beta)
}

/// Adversarial liveness violation: withholding and unreachable endorsers
/// together hold at least `N_e - q` slots.
pub fn pr_alv<F: Float>(n_endorsers: u32, quorum: u32, alpha: F, beta: F) -> Result<LogProb<F>, AnalysisError> {
    check_quorum(n_endorsers, quorum)?;
    binomial_tail(n_endorsers, n_endorsers - quorum, check_mass(alpha, beta)?)
}

/// Adversarial exclusion: a victim among `n_a` active identities is never
/// sampled as endorser in the `T_a(1-α)` honest-led rounds of a window.
pub fn pr_ae<F: Float>(n_endorsers: F, n_active: F, activity_threshold: F, alpha: F) -> Result<LogProb<F>, AnalysisError> {
    check_prob("alpha", alpha)?;
    if !(n_endorsers >= F::zero() && n_endorsers < n_active) {
        return domain("N_e must be below n_a");
    }
    if activity_threshold < F::zero() {
        return domain("T_a must be non-negative");
    }
    let exponent = activity_threshold * (F::one() - alpha);
    Ok(LogProb::from_prob(F::one() - n_endorsers / n_active).powf(exponent))
}

/// Probability that at least one of `leaves` independent tries succeeds,
/// exactly and by the union bound.
pub fn any_of<F: Float>(per_try: LogProb<F>, leaves: F) -> (LogProb<F>, LogProb<F>) {
    let exact = per_try.complement().powf(leaves).complement();
    let union = per_try.scale_capped(leaves.ln());
    (exact, union)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThroughputInputs<F> {
    pub round_secs: F,
    pub block_bytes: F,
    pub header_bytes: F,
    pub n_endorsers: F,
    pub confirm_bytes: F,
    /// Enrollments per block.
    pub n_enroll: F,
    pub enroll_bytes: F,
    pub tx_bytes: F,
}

impl Default for ThroughputInputs<f64> {
    fn default() -> Self {
        ThroughputInputs {
            round_secs: 5.0,
            block_bytes: 2_000_000.0,
            header_bytes: 280.0,
            n_endorsers: 100.0,
            confirm_bytes: 416.0,
            n_enroll: 0.0,
            enroll_bytes: 512.0,
            tx_bytes: 250.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Throughput<F> {
    pub tps: F,
    /// Share of the block left for transactions.
    pub tx_fraction: F,
}

pub fn throughput<F: Float>(i: &ThroughputInputs<F>) -> Result<Throughput<F>, AnalysisError> {
    if i.round_secs <= F::zero() || i.tx_bytes <= F::zero() || i.block_bytes <= F::zero() {
        return domain("round duration, block size and transaction size must be positive");
    }
    let overhead = i.header_bytes + i.n_endorsers * i.confirm_bytes + i.n_enroll * i.enroll_bytes;
    let payload = (i.block_bytes - overhead).max(F::zero());
    Ok(Throughput {
        tps: payload / i.round_secs / i.tx_bytes,
        tx_fraction: payload / i.block_bytes,
    })
}
