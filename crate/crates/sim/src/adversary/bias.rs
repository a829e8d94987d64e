//! Cumulative-reward baseline for a protocol that elects leaders by random
//! stake priorities. Not the round-robin protocol: it shows what happens
//! when an adversary holding several top priorities may pick the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const BIAS_CSV_HEADER: &str = "total_stake,adv_stake_share,adv_block_share";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    pub alpha: f64,
    pub initial_stake: u64,
    pub final_stake: u64,
    /// When false the adversary never uses its choice (control run).
    pub exploit: bool,
    /// Trailing window, in blocks, for the block-share column.
    pub window: u64,
}

impl BiasConfig {
    pub fn new(alpha: f64, initial_stake: u64, final_stake: u64) -> Self {
        BiasConfig {
            alpha,
            initial_stake,
            final_stake,
            exploit: true,
            window: 250,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub total_stake: f64,
    pub adv_stake_share: f64,
    /// Adversary share of the last `window` blocks.
    pub adv_block_share: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BiasTrajectory {
    /// One point per minted block.
    pub points: Vec<BiasPoint>,
    /// Fraction of runs (or 0/1 for one run) in which block `i` went to the
    /// adversary.
    pub adversary_block: Vec<f64>,
}

impl BiasTrajectory {
    /// Mean adversary block rate over the first `n` blocks.
    pub fn initial_rate(&self, n: usize) -> f64 {
        let n = n.min(self.adversary_block.len()).max(1);
        self.adversary_block[..n].iter().sum::<f64>() / n as f64
    }

    pub fn final_point(&self) -> BiasPoint {
        self.points.last().copied().unwrap_or_default()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(BIAS_CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!("{},{:.6},{:.6}\n", p.total_stake, p.adv_stake_share, p.adv_block_share));
        }
        out
    }
}

/// Length of the adversarial prefix of a uniformly random priority order
/// over `total` stake units, `adv` of them adversarial.
fn adversarial_run<R: Rng>(adv: u64, total: u64, rng: &mut R) -> u64 {
    let mut j = 0;
    while j < adv && rng.gen::<f64>() < (adv - j) as f64 / (total - j) as f64 {
        j += 1;
    }
    j
}

/// Each round a fresh priority order over stake units elects the leader; the
/// leader's block mints one unit to it. An adversary holding the top `m`
/// priorities can publish any of `m` blocks, each yielding a different next
/// seed, and greedily keeps the one giving it the longest run next round.
pub fn simulate_bias_baseline<R: Rng>(cfg: &BiasConfig, rng: &mut R) -> BiasTrajectory {
    let mut adv = (cfg.alpha * cfg.initial_stake as f64).round() as u64;
    let mut total = cfg.initial_stake;
    let blocks = cfg.final_stake.saturating_sub(cfg.initial_stake) as usize;
    let window = cfg.window.max(1) as usize;
    let mut traj = BiasTrajectory {
        points: Vec::with_capacity(blocks),
        adversary_block: Vec::with_capacity(blocks),
    };
    let mut options = 1;
    let mut in_window = 0.0;
    for i in 0..blocks {
        let run = (0..options).map(|_| adversarial_run(adv, total, rng)).max().unwrap_or(0);
        let won = run > 0;
        if won {
            adv += 1;
            options = if cfg.exploit { run } else { 1 };
        } else {
            options = 1;
        }
        total += 1;
        let x = if won { 1.0 } else { 0.0 };
        traj.adversary_block.push(x);
        in_window += x;
        if i >= window {
            in_window -= traj.adversary_block[i - window];
        }
        traj.points.push(BiasPoint {
            total_stake: total as f64,
            adv_stake_share: adv as f64 / total as f64,
            adv_block_share: in_window / (i + 1).min(window) as f64,
        });
    }
    traj
}

/// Pointwise mean of `runs` independent trajectories.
pub fn bias_monte_carlo(cfg: &BiasConfig, runs: u32, seed: u64) -> BiasTrajectory {
    let mut mean = BiasTrajectory::default();
    for k in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let t = simulate_bias_baseline(cfg, &mut rng);
        if k == 0 {
            mean = t;
            continue;
        }
        for (m, p) in mean.points.iter_mut().zip(&t.points) {
            m.adv_stake_share += p.adv_stake_share;
            m.adv_block_share += p.adv_block_share;
        }
        for (m, x) in mean.adversary_block.iter_mut().zip(&t.adversary_block) {
            *m += x;
        }
    }
    let r = runs.max(1) as f64;
    for m in &mut mean.points {
        m.adv_stake_share /= r;
        m.adv_block_share /= r;
    }
    for m in &mut mean.adversary_block {
        *m /= r;
    }
    mean
}
