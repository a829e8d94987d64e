//! Discrete-event simulation of the round-robin protocol over a modeled
//! network, with pluggable Byzantine strategies.

pub mod adversary;
pub mod config;
pub mod network;
pub mod report;
pub mod sim;

pub use adversary::{AdversaryConfig, AdversarySet, Placement, Strategy};
pub use config::{BetaModel, ConfigError, LatencyModel, NetConfig, NodeId, Partition, SimConfig};
pub use report::{RoundRecord, SimReport, ROUND_CSV_HEADER};
pub use sim::{run_simulation, synthetic_tx, Simulation};
