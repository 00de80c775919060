//! Analytical performance model of PBFT consensus with nodes joining and
//! leaving.
//!
//! The voting process is a finite level-dependent QBD over `(n, m, k)`
//! (nodes, approvals, refusals). Its stationary distribution, obtained by
//! UL-type RG-factorization, yields the block-pegging rate `r1` and the
//! rollback rate `r2`. Those rates drive a batch-service transaction-pool
//! queue whose rate matrix, boundary probabilities and throughput are
//! computed by the matrix-geometric method.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod error;
pub mod generator;
pub mod linalg;
pub mod measures;
pub mod model;
pub mod pipeline;
pub mod qbd;
pub mod queue;
pub mod scalar;

pub use error::{Error, Result};
pub use generator::{build_queue_blocks, build_voting_generator, transition_rules, Event, Transition};
pub use measures::voting_measures;
pub use model::{Decision, Level, StateSpace, Thresholds, VotingState, DEFAULT_STATE_CAP};
pub use pipeline::{analyze_system, analyze_voting};
pub use qbd::{compute_rg_factors, dense_oracle, stationary_distribution, DENSE_ORACLE_LIMIT};
pub use queue::{
    iterate_rate_matrix, queue_stationary, solve_queue, stability_check, throughput, Stability,
    DEFAULT_EPSILON, DEFAULT_MAX_ITER,
};
pub use scalar::Real;

pub type ModelParams = model::ModelParams<f64>;
pub type BlockGenerator = generator::BlockGenerator<f64>;
pub type QueueBlocks = generator::QueueBlocks<f64>;
pub type RgFactors = qbd::RgFactors<f64>;
pub type StationaryVotingDistribution = qbd::StationaryVotingDistribution<f64>;
pub type VotingMeasures = measures::VotingMeasures<f64>;
pub type QueueParams = queue::QueueParams<f64>;
pub type QueueSolution = queue::QueueSolution<f64>;
pub type RateMatrix = queue::RateMatrix<f64>;
pub type MeanDrift = queue::MeanDrift<f64>;
pub type DenseMatrix = linalg::DenseMatrix<f64>;
pub type VotingAnalysis = pipeline::VotingAnalysis<f64>;
pub type SystemAnalysis = pipeline::SystemAnalysis<f64>;
