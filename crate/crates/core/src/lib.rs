//! Robust Round Robin consensus: age-ordered leader candidates endorsed by a
//! randomly sampled quorum.

pub mod chain;
pub mod codec;
pub mod crypto;
pub mod fixtures;
pub mod identity;
pub mod params;
pub mod protocol;
pub mod selection;

pub use chain::{Block, BranchState, ChainStore, ConfirmMsg, GenesisConfig, IntentMsg, Ledger, SealedBlock};
pub use crypto::{hash, vrf_evaluate, vrf_verify, Digest, KeyPair, PublicKey, Seed, SeedUpdate, Signature};
pub use params::ProtocolParams;
