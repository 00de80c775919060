//! Stationary performance measures of the voting process.

use crate::model::{Decision, ModelParams, VotingState};
use crate::qbd::StationaryVotingDistribution;
use crate::scalar::Real;

/// Block/orphan probabilities and the resulting settlement rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VotingMeasures<T> {
    /// Probability of a block-decided state.
    pub zeta1: T,
    /// Probability of an orphan-decided state.
    pub zeta2: T,
    /// Voting completed, `zeta1 + zeta2`.
    pub completed: T,
    /// Too few nodes to vote.
    pub cannot_vote: T,
    /// Vote in progress, `1 - completed - cannot_vote`.
    pub in_progress: T,
    /// Block-pegging rate, `beta * zeta1`.
    pub r1: T,
    /// Rollback rate, `beta * zeta2`.
    pub r2: T,
}

/// Sums `pi` by [`ModelParams::classify`] and scales by `beta`.
pub fn voting_measures<T: Real>(
    pi: &StationaryVotingDistribution<T>,
    states: &[VotingState],
    params: &ModelParams<T>,
) -> VotingMeasures<T> {
    let (mut zeta1, mut zeta2, mut below) = (T::zero(), T::zero(), T::zero());
    for (&s, &p) in states.iter().zip(&pi.pi) {
        match params.classify(s) {
            Decision::Block => zeta1 += p,
            Decision::Orphan => zeta2 += p,
            Decision::BelowThreshold => below += p,
            Decision::Undecided => {}
        }
    }
    let completed = zeta1 + zeta2;
    VotingMeasures {
        zeta1,
        zeta2,
        completed,
        cannot_vote: below,
        in_progress: T::one() - completed - below,
        r1: params.beta * zeta1,
        r2: params.beta * zeta2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::build_voting_generator;
    use crate::qbd;

    #[test]
    fn boundary_mass_only() {
        let params = ModelParams::<f64>::new(2.0, 2.0, 10.0, 2.0, 0.5, 1, 1).unwrap();
        let g = build_voting_generator(&params).unwrap();
        let mut pi = vec![0.0; g.len()];
        pi[0] = 0.25;
        pi[1] = 0.5;
        pi[2] = 0.25;
        let dist = StationaryVotingDistribution {
            pi,
            level_ranges: vec![],
        };
        let m = voting_measures(&dist, g.space().states(), &params);
        assert_eq!(
            (m.zeta1, m.zeta2, m.completed, m.cannot_vote, m.in_progress),
            (0.0, 0.0, 0.0, 1.0, 0.0)
        );
    }

    #[test]
    fn identities_hold() {
        let params = ModelParams::<f64>::new(1.0, 1.0, 10.0, 1.0, 0.7, 1, 1).unwrap();
        let g = build_voting_generator(&params).unwrap();
        let pi = qbd::solve(&g).unwrap();
        let m = voting_measures(&pi, g.space().states(), &params);
        assert!((m.completed + m.cannot_vote + m.in_progress - 1.0).abs() < 1e-12);
        assert_eq!(m.r1, params.beta * m.zeta1);
        assert_eq!(m.r2, params.beta * m.zeta2);
        assert!((m.r1 / m.r2 - m.zeta1 / m.zeta2).abs() < 1e-12);
    }
}
