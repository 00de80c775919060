//! End-to-end computations: settlement rates from the voting chain, then
//! the pool queue driven by those rates.

use crate::error::Result;
use crate::generator::{build_voting_generator, BlockGenerator};
use crate::measures::{voting_measures, VotingMeasures};
use crate::model::ModelParams;
use crate::qbd::{compute_rg_factors, stationary_distribution, StationaryVotingDistribution};
use crate::queue::{solve_queue, QueueParams, QueueSolution};
use crate::scalar::Real;

/// Everything produced while computing the settlement rates.
#[derive(Debug, Clone)]
pub struct VotingAnalysis<T> {
    pub generator: BlockGenerator<T>,
    pub distribution: StationaryVotingDistribution<T>,
    pub measures: VotingMeasures<T>,
}

/// Blocks, RG-factors, boundary vector, stationary vector, then `r1` and `r2`.
pub fn analyze_voting<T: Real>(params: &ModelParams<T>) -> Result<VotingAnalysis<T>> {
    let generator = build_voting_generator(params)?;
    let factors = compute_rg_factors(&generator)?;
    let distribution = stationary_distribution(&generator, &factors)?;
    let measures = voting_measures(&distribution, generator.space().states(), params);
    Ok(VotingAnalysis {
        generator,
        distribution,
        measures,
    })
}

/// Voting measures and the pool queue they induce.
#[derive(Debug, Clone)]
pub struct SystemAnalysis<T> {
    pub measures: VotingMeasures<T>,
    pub queue: QueueSolution<T>,
}

/// Settlement rates from the voting chain, then the queue solution at
/// arrival rate `lambda` and batch size `b`.
pub fn analyze_system<T: Real>(
    params: &ModelParams<T>,
    lambda: T,
    b: usize,
    epsilon: T,
    max_iter: usize,
) -> Result<SystemAnalysis<T>> {
    let measures = analyze_voting(params)?.measures;
    let qp = QueueParams::new(lambda, b, measures.r1, measures.r2)?;
    let queue = solve_queue(&qp, epsilon, max_iter)?;
    Ok(SystemAnalysis { measures, queue })
}
