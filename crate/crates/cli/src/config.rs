//! JSON configs for runs and sweeps, with errors that point at the line of
//! the offending field.

use std::fmt;
use std::path::{Path, PathBuf};

use rrr_analysis::SweepConfig;
use rrr_core::params::ProtocolParams;
use rrr_sim::{AdversaryConfig, NetConfig, SimConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Base name: `<name>.rounds.csv`, `<name>.report.json`, `<name>.chain/`.
    pub name: String,
    /// Save the observer's selected chain.
    pub dump: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            name: "run".into(),
            dump: false,
        }
    }
}

/// A simulation run: the simulator config plus where results go.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: ProtocolParams,
    pub net: NetConfig,
    pub adversary: AdversaryConfig,
    pub rounds: u64,
    pub txs_per_round: u32,
    pub honest_joiners: Vec<u64>,
    pub retain_depth: u64,
    /// Overrides `net.seed` when present.
    pub seed: Option<u64>,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_sim(SimConfig::default())
    }
}

impl RunConfig {
    pub fn from_sim(s: SimConfig) -> Self {
        RunConfig {
            params: s.params,
            net: s.net,
            adversary: s.adversary,
            rounds: s.rounds,
            txs_per_round: s.txs_per_round,
            honest_joiners: s.honest_joiners,
            retain_depth: s.retain_depth,
            seed: None,
            output: OutputConfig::default(),
        }
    }

    pub fn sim(&self) -> SimConfig {
        let mut net = self.net.clone();
        if let Some(seed) = self.seed {
            net.seed = seed;
        }
        SimConfig {
            params: self.params.clone(),
            net,
            adversary: self.adversary.clone(),
            rounds: self.rounds,
            txs_per_round: self.txs_per_round,
            honest_joiners: self.honest_joiners.clone(),
            retain_depth: self.retain_depth,
        }
    }
}

/// One quorum sweep. Missing optional fields take the sweep defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCase {
    pub n_endorsers: u32,
    pub alpha: f64,
    pub beta: f64,
    pub depth: u32,
    pub liveness_rounds: u32,
    #[serde(default)]
    pub q_min: Option<u32>,
    #[serde(default)]
    pub q_max: Option<u32>,
    #[serde(default)]
    pub log2_leaves: Option<f64>,
    #[serde(default)]
    pub afs_threshold: Option<f64>,
    #[serde(default)]
    pub alv_threshold: Option<f64>,
}

impl SweepCase {
    pub fn to_sweep(&self) -> SweepConfig<f64> {
        let mut c = SweepConfig::new(self.n_endorsers, self.alpha, self.beta, self.depth, self.liveness_rounds);
        c.q_min = self.q_min.unwrap_or(c.q_min);
        c.q_max = self.q_max.unwrap_or(c.q_max);
        c.log2_leaves = self.log2_leaves.unwrap_or(c.log2_leaves);
        c.afs_threshold = self.afs_threshold.unwrap_or(c.afs_threshold);
        c.alv_threshold = self.alv_threshold.unwrap_or(c.alv_threshold);
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub cases: Vec<SweepCase>,
}

/// A config problem, located in its file when possible.
#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, ":{l}:{c}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Config text kept around so later validation errors can be located.
pub struct Source {
    pub path: PathBuf,
    pub text: String,
}

impl Source {
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_owned(),
            line: None,
            column: None,
            message: e.to_string(),
        })?;
        Ok(Source {
            path: path.to_owned(),
            text,
        })
    }

    pub fn parse<T: for<'de> Deserialize<'de>>(&self) -> Result<T, ConfigError> {
        serde_json::from_str(&self.text).map_err(|e| {
            let full = e.to_string();
            let message = full.rsplit_once(" at line ").map_or(full.as_str(), |(m, _)| m).to_string();
            ConfigError {
                path: self.path.clone(),
                line: Some(e.line()),
                column: Some(e.column()),
                message,
            }
        })
    }

    /// Attaches a semantic error to the first field it names.
    pub fn locate(&self, message: impl Into<String>) -> ConfigError {
        let message = message.into();
        let pos = message
            .split(|c: char| !(c.is_alphanumeric() || c == '_'))
            .filter(|w| !w.is_empty())
            .find_map(|w| find_key(&self.text, w));
        ConfigError {
            path: self.path.clone(),
            line: pos.map(|p| p.0),
            column: pos.map(|p| p.1),
            message,
        }
    }
}

/// 1-based line and column of the first `"key":` in `text`.
pub fn find_key(text: &str, key: &str) -> Option<(usize, usize)> {
    let needle = format!("\"{key}\"");
    let mut from = 0;
    while let Some(off) = text[from..].find(&needle) {
        let at = from + off;
        let rest = text[at + needle.len()..].trim_start();
        if rest.starts_with(':') {
            let line = text[..at].matches('\n').count() + 1;
            let column = at - text[..at].rfind('\n').map_or(0, |i| i + 1) + 1;
            return Some((line, column));
        }
        from = at + needle.len();
    }
    None
}
