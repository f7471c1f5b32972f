//! Process-level orchestration: config files, share files, the session
//! handshake and run reports.

pub mod config;
pub mod files;
pub mod report;
pub mod session;

pub use config::{KvFile, Role, SessionConfig};
pub use files::{assemble, ingest_shares, open_weights, BlockPlacement, ShareBlock, WeightShares};
pub use report::RunReport;
pub use session::{handshake, run_job, run_local, run_local_with, run_party, run_role, Job, JobOutput, RoleOutcome};
