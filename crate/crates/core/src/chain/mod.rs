//! Block formats, branch state, validation, fork choice and storage.

mod block;
mod dump;
mod fork;
mod genesis;
mod ledger;
mod state;
mod store;
mod verify;

pub use block::{tx_hash, Block, ConfirmMsg, IntentMsg, SealedBlock, Tx, NOMINAL_TX_BYTES};
pub use dump::{ChainDump, DumpError, BLOCKS_FILE, MANIFEST_FILE};
pub use fork::{branch_length, compare_divergent, leader_rank, select_branch, ForkChoiceError};
pub use genesis::{GenesisConfig, GenesisError, GenesisIdentity};
pub use ledger::Ledger;
pub use state::{
    window_start, BlockMeta, BranchState, EndorserBasis, HeadStreak, IdentityId, IdentityState, PopulationMember,
    QueueKey,
};
pub use store::{BlockEntry, ChainLink, ChainStore, InsertOutcome, InsertReport, StoreConfig};
pub use verify::{detect_equivocation, verify_branch, verify_endorsement, BranchInvalid, EquivocationEvidence, InvalidReason};
