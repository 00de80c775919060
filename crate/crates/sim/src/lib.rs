//! Stochastic simulation of the dynamic PBFT voting chain and of the
//! transaction pool it serves.
//!
//! Every replication draws from its own ChaCha8 stream (`seed`, stream id =
//! replication index), so results depend only on the configuration and not
//! on how replications are scheduled across threads.

mod config;
mod system;
mod voting;

pub use config::{Error, Result, SimConfig, SimEstimate};
pub use system::{
    simulate_surrogate, simulate_surrogate_with, simulate_system, simulate_system_with, SystemOptions,
    SystemReplication, SystemSimulation,
};
pub use voting::{simulate_voting, VotingReplication, VotingSimulation};
