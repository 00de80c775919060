//! Infinitesimal generators: the voting chain over the enumerated state
//! space, and the four blocks of the level-independent pool-size chain.

use std::collections::VecDeque;
use std::io::{self, Write};

use crate::error::{invalid, Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::model::{ModelParams, StateSpace, VotingState, DEFAULT_STATE_CAP};
use crate::scalar::Real;

/// Kind of event behind a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    Entry,
    Departure,
    Approve,
    Refuse,
    Settle,
}

/// One outgoing transition of the voting chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<T> {
    pub target: VotingState,
    pub rate: T,
    pub event: Event,
}

/// Outgoing transitions of `s`.
///
/// Rates are per event, not per node: entry `mu`, departure `theta`,
/// votes `gamma*p` / `gamma*q`, settlement `beta`. Departures are not
/// possible from fully-voted states, nor from any level-`3L` state except
/// `(3L, 0, 0)`. Voting continues in decided states until settlement
/// resets the votes at the same node count.
pub fn transition_rules<T: Real>(s: VotingState, params: &ModelParams<T>) -> Result<Vec<Transition<T>>> {
    if !params.contains(s) {
        return Err(Error::Domain(format!("state {s} is not in the state space")));
    }
    let floor = params.min_voting_nodes();
    let top = params.max_nodes();
    let mut out = Vec::with_capacity(5);
    let mut push = |target: VotingState, rate: T, event: Event| {
        out.push(Transition { target, rate, event })
    };

    if s.n < floor {
        push(VotingState::new(s.n + 1, 0, 0), params.mu, Event::Entry);
        if s.n >= 1 {
            push(VotingState::new(s.n - 1, 0, 0), params.theta, Event::Departure);
        }
        return Ok(out);
    }

    let l = s.n;
    let voting_open = s.m + s.k < l;
    if l < top {
        push(VotingState::new(l + 1, s.m, s.k), params.mu, Event::Entry);
    }
    if l == floor {
        if s.m == 0 && s.k == 0 {
            push(VotingState::new(l - 1, 0, 0), params.theta, Event::Departure);
        }
    } else if voting_open {
        push(VotingState::new(l - 1, s.m, s.k), params.theta, Event::Departure);
    }
    if voting_open {
        push(VotingState::new(l, s.m + 1, s.k), params.gamma * params.p, Event::Approve);
        push(VotingState::new(l, s.m, s.k + 1), params.gamma * params.q(), Event::Refuse);
    }
    if params.classify(s).is_decided() {
        push(VotingState::new(l, 0, 0), params.beta, Event::Settle);
    }
    Ok(out)
}

/// Assembled voting generator with level-block access.
#[derive(Debug, Clone)]
pub struct BlockGenerator<T> {
    params: ModelParams<T>,
    space: StateSpace,
    q: SparseMatrix<T>,
}

/// Builds the voting generator with the default state cap.
pub fn build_voting_generator<T: Real>(params: &ModelParams<T>) -> Result<BlockGenerator<T>> {
    BlockGenerator::build(params, DEFAULT_STATE_CAP)
}

impl<T: Real> BlockGenerator<T> {
    pub fn build(params: &ModelParams<T>, cap: usize) -> Result<Self> {
        let space = StateSpace::with_cap(params, cap)?;
        let mut triplets = Vec::with_capacity(space.len() * 6);
        for (i, &s) in space.states().iter().enumerate() {
            let mut exit = T::zero();
            for t in transition_rules(s, params)? {
                let j = space
                    .index_of(t.target)
                    .ok_or_else(|| Error::Domain(format!("transition {s} -> {} leaves the space", t.target)))?;
                triplets.push((i, j, t.rate));
                exit += t.rate;
            }
            triplets.push((i, i, -exit));
        }
        let q = SparseMatrix::from_triplets(space.len(), space.len(), triplets);
        Ok(Self {
            params: *params,
            space,
            q,
        })
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn matrix(&self) -> &SparseMatrix<T> {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn num_levels(&self) -> usize {
        self.space.num_levels()
    }

    /// Dense block between two level indices.
    pub fn block(&self, from: usize, to: usize) -> DenseMatrix<T> {
        let r = self.space.level_range(from);
        let c = self.space.level_range(to);
        self.q.dense_block(r.start, c.start, r.len(), c.len())
    }

    /// Within-level block at level index `i`.
    pub fn local(&self, i: usize) -> DenseMatrix<T> {
        self.block(i, i)
    }

    /// Block from level index `i` up to `i + 1`.
    pub fn up(&self, i: usize) -> DenseMatrix<T> {
        self.block(i, i + 1)
    }

    /// Block from level index `i` down to `i - 1`.
    pub fn down(&self, i: usize) -> DenseMatrix<T> {
        self.block(i, i - 1)
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.q.get(i, i)).collect()
    }

    /// True when every state reaches every other state.
    pub fn is_irreducible(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return true;
        }
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, j, v) in self.q.triplets() {
            if i != j && v > T::zero() {
                reverse[j].push(i);
            }
        }
        let forward = |i: usize| {
            self.q
                .row(i)
                .iter()
                .filter(move |&&(j, v)| j != i && v > T::zero())
                .map(|&(j, _)| j)
                .collect::<Vec<_>>()
        };
        reachable_count(n, forward) == n && reachable_count(n, |i| reverse[i].clone()) == n
    }

    /// Writes `row col value` lines, one per stored entry.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, j, v) in self.q.triplets() {
            writeln!(w, "{i} {j} {v:e}")?;
        }
        Ok(())
    }
}

fn reachable_count(n: usize, next: impl Fn(usize) -> Vec<usize>) -> usize {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for j in next(i) {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count
}

/// Blocks of the pool-size generator, levels of `b` transactions each.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueBlocks<T> {
    /// Local block of the idle level (fewer than `b` transactions).
    pub boundary: DenseMatrix<T>,
    /// Up one level: rollback batches, plus a single arrival from the last phase.
    pub up: DenseMatrix<T>,
    /// Local block of busy levels.
    pub local: DenseMatrix<T>,
    /// Down one level: a block of `b` transactions is pegged.
    pub down: DenseMatrix<T>,
}

/// Blocks for arrival rate `lambda`, batch size `b`, pegging rate `r1`
/// and rollback rate `r2`.
pub fn build_queue_blocks<T: Real>(lambda: T, b: usize, r1: T, r2: T) -> Result<QueueBlocks<T>> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    if b < 1 {
        return Err(invalid("b", "batch size must be at least 1"));
    }
    if !(r1 > T::zero()) || !r1.is_finite() {
        return Err(invalid("r1", format!("must be positive, got {r1}")));
    }
    if !(r2 >= T::zero()) || !r2.is_finite() {
        return Err(invalid("r2", format!("must be nonnegative, got {r2}")));
    }
    let mut boundary = DenseMatrix::from_diagonal(&vec![-(lambda + r2); b]);
    let mut local = DenseMatrix::from_diagonal(&vec![-(lambda + r2 + r1); b]);
    for i in 0..b - 1 {
        boundary[(i, i + 1)] = lambda;
        local[(i, i + 1)] = lambda;
    }
    let mut up = DenseMatrix::from_diagonal(&vec![r2; b]);
    up[(b - 1, 0)] += lambda;
    let down = DenseMatrix::from_diagonal(&vec![r1; b]);
    Ok(QueueBlocks {
        boundary,
        up,
        local,
        down,
    })
}

impl<T: Real> QueueBlocks<T> {
    pub fn batch(&self) -> usize {
        self.local.rows()
    }

    /// Phase generator `down + local + up` of the busy levels.
    pub fn phase_generator(&self) -> DenseMatrix<T> {
        self.down.add(&self.local).add(&self.up)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Decision;

    fn params(lower: usize, upper: usize) -> ModelParams<f64> {
        ModelParams::new(1.3, 1.7, 10.0, 2.3, 0.7, lower, upper).unwrap()
    }

    fn targets(s: VotingState, p: &ModelParams<f64>) -> Vec<(VotingState, f64)> {
        let mut v: Vec<_> = transition_rules(s, p)
            .unwrap()
            .into_iter()
            .map(|t| (t.target, t.rate))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    #[test]
    fn boundary_top_state_moves_up_or_down() {
        let p = params(1, 1);
        assert_eq!(
            targets(VotingState::new(2, 0, 0), &p),
            vec![(VotingState::new(1, 0, 0), p.theta), (VotingState::new(3, 0, 0), p.mu)]
        );
        assert_eq!(targets(VotingState::new(0, 0, 0), &p), vec![(VotingState::new(1, 0, 0), p.mu)]);
    }

    #[test]
    fn decided_top_level_state_keeps_voting() {
        let p = params(1, 1);
        let got = targets(VotingState::new(5, 4, 0), &p);
        let mut want = vec![
            (VotingState::new(4, 4, 0), p.theta),
            (VotingState::new(5, 5, 0), p.gamma * p.p),
            (VotingState::new(5, 4, 1), p.gamma * p.q()),
            (VotingState::new(5, 0, 0), p.beta),
        ];
        want.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(got, want);
    }

    #[test]
    fn fully_voted_floor_state_enters_or_settles() {
        let p = params(1, 1);
        assert_eq!(
            targets(VotingState::new(3, 3, 0), &p),
            vec![(VotingState::new(3, 0, 0), p.beta), (VotingState::new(4, 3, 0), p.mu)]
        );
    }

    #[test]
    fn invalid_state_is_rejected() {
        let p = params(1, 1);
        assert!(transition_rules(VotingState::new(2, 1, 0), &p).is_err());
        assert!(transition_rules(VotingState::new(6, 0, 0), &p).is_err());
    }

    #[test]
    fn small_generator_is_conservative() {
        let g = build_voting_generator(&params(1, 1)).unwrap();
        assert_eq!(g.len(), 49);
        for s in g.matrix().row_sums() {
            assert!(s.abs() <= 1e-12);
        }
        assert!(g.is_irreducible());
    }

    #[test]
    fn diagonal_cases() {
        let p = params(1, 1);
        let g = build_voting_generator(&p).unwrap();
        let d = |s| g.diagonal()[g.space().index_of(s).unwrap()];
        assert!((d(VotingState::new(4, 1, 1)) + (p.gamma + p.mu + p.theta)).abs() < 1e-12);
        assert!((d(VotingState::new(5, 3, 2)) + p.beta).abs() < 1e-12);
        assert_eq!(p.classify(VotingState::new(5, 3, 2)), Decision::Orphan);
    }

    #[test]
    fn triplet_dump_lists_every_entry() {
        let g = build_voting_generator(&params(1, 1)).unwrap();
        let mut buf = Vec::new();
        g.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), g.matrix().nnz());
        let first: Vec<&str> = text.lines().next().unwrap().split(' ').collect();
        assert_eq!(first[0], "0");
    }

    #[test]
    fn queue_blocks_for_batch_of_two() {
        let qb = build_queue_blocks(1.0, 2, 0.7, 0.1).unwrap();
        assert_eq!(qb.up, DenseMatrix::from_rows(&[vec![0.1, 0.0], vec![1.0, 0.1]]));
        assert_eq!(qb.down, DenseMatrix::from_rows(&[vec![0.7, 0.0], vec![0.0, 0.7]]));
        assert_eq!(qb.local, DenseMatrix::from_rows(&[vec![-1.8, 1.0], vec![0.0, -1.8]]));
        assert_eq!(qb.boundary, DenseMatrix::from_rows(&[vec![-1.1, 1.0], vec![0.0, -1.1]]));
    }

    #[test]
    fn queue_blocks_for_single_transactions() {
        let qb = build_queue_blocks(0.2f64, 1, 0.7, 0.1).unwrap();
        assert!((qb.boundary[(0, 0)] + 0.3).abs() < 1e-15);
        assert!((qb.up[(0, 0)] - 0.3).abs() < 1e-15);
        assert!((qb.local[(0, 0)] + 1.0).abs() < 1e-15);
        assert_eq!(qb.down[(0, 0)], 0.7);
    }

    #[test]
    fn queue_block_rows_are_conservative() {
        for b in [1, 2, 7, 50] {
            let qb = build_queue_blocks(1.3f64, b, 0.7, 0.2).unwrap();
            for s in qb.phase_generator().row_sums() {
                assert!(s.abs() < 1e-14);
            }
            for s in qb.boundary.add(&qb.up).row_sums() {
                assert!(s.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn queue_blocks_reject_bad_inputs() {
        assert!(build_queue_blocks(0.0, 2, 0.7, 0.1).is_err());
        assert!(build_queue_blocks(1.0, 0, 0.7, 0.1).is_err());
        assert!(build_queue_blocks(1.0, 2, -0.7, 0.1).is_err());
        assert!(build_queue_blocks(1.0, 2, 0.7, -0.1).is_err());
    }
}
