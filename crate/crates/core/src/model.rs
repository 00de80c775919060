//! Voting-process parameters, consensus thresholds and the ordered state space.
//!
//! The process tracks the triple `(n, m, k)`: valid voting nodes, approvals
//! and refusals. Voting only happens at levels `n >= 3L`; below that the
//! process sits in the boundary states `(n, 0, 0)`. The node count is capped
//! at `3N + 2`.

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Default cap on the number of states [`StateSpace::new`] will enumerate.
pub const DEFAULT_STATE_CAP: usize = 200_000;

/// Rates, approval probability and node-count thresholds of the voting process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    /// Node entry rate.
    pub mu: T,
    /// Node departure rate.
    pub theta: T,
    /// Vote rate.
    pub gamma: T,
    /// Settlement rate (block pegging and rollback share it).
    pub beta: T,
    /// Per-vote approval probability.
    pub p: T,
    /// Lower threshold factor; voting needs at least `3L` nodes.
    pub lower: usize,
    /// Upper threshold factor; at most `3N + 2` nodes.
    pub upper: usize,
}

impl<T: Real> ModelParams<T> {
    /// Validated constructor.
    pub fn new(mu: T, theta: T, gamma: T, beta: T, p: T, lower: usize, upper: usize) -> Result<Self> {
        let params = Self {
            mu,
            theta,
            gamma,
            beta,
            p,
            lower,
            upper,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("mu", self.mu),
            ("theta", self.theta),
            ("gamma", self.gamma),
            ("beta", self.beta),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(invalid(field, format!("must be a positive finite rate, got {v}")));
            }
        }
        if !(self.p > T::zero() && self.p < T::one()) {
            return Err(invalid("p", format!("must lie in (0, 1), got {}", self.p)));
        }
        if self.lower < 1 {
            return Err(invalid("L", "must be at least 1"));
        }
        if self.upper < self.lower {
            return Err(invalid(
                "N",
                format!("must be at least L = {}, got {}", self.lower, self.upper),
            ));
        }
        Ok(())
    }

    /// Refusal probability `1 - p`.
    pub fn q(&self) -> T {
        T::one() - self.p
    }

    /// Smallest node count at which voting takes place, `3L`.
    pub fn min_voting_nodes(&self) -> usize {
        3 * self.lower
    }

    /// Largest node count, `3N + 2`.
    pub fn max_nodes(&self) -> usize {
        3 * self.upper + 2
    }

    pub fn thresholds(&self, n: usize) -> Result<Thresholds> {
        if n < self.min_voting_nodes() {
            return Err(Error::Domain(format!(
                "no voting at {n} nodes; voting needs at least {}",
                self.min_voting_nodes()
            )));
        }
        Ok(Thresholds::for_nodes(n))
    }

    /// Classifies a state. Panics only if the state is not a member of the space.
    pub fn classify(&self, s: VotingState) -> Decision {
        debug_assert!(self.contains(s), "state {s:?} outside the state space");
        if s.n < self.min_voting_nodes() {
            return Decision::BelowThreshold;
        }
        Thresholds::for_nodes(s.n).decide(s.m, s.k)
    }

    pub fn contains(&self, s: VotingState) -> bool {
        if s.n > self.max_nodes() {
            return false;
        }
        if s.n < self.min_voting_nodes() {
            s.m == 0 && s.k == 0
        } else {
            s.m + s.k <= s.n
        }
    }
}

/// A state `(n, m, k)` of the voting process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VotingState {
    /// Valid voting nodes.
    pub n: usize,
    /// Approvals cast.
    pub m: usize,
    /// Refusals cast.
    pub k: usize,
}

impl VotingState {
    pub const fn new(n: usize, m: usize, k: usize) -> Self {
        Self { n, m, k }
    }

    /// Every node has voted.
    pub fn fully_voted(&self) -> bool {
        self.m + self.k == self.n
    }
}

impl std::fmt::Display for VotingState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.n, self.m, self.k)
    }
}

/// Approval and refusal counts that settle a vote at a given node count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Thresholds {
    /// Approvals needed for a block.
    pub block: usize,
    /// Refusals that make a block impossible.
    pub orphan: usize,
}

impl Thresholds {
    /// Thresholds at `n` nodes, written as `n = 3j + r`.
    ///
    /// The block threshold is the least count strictly above two thirds of
    /// `n`; the orphan threshold is the least refusal count that leaves too
    /// few voters to reach it, so `block + orphan = n + 1`.
    pub fn for_nodes(n: usize) -> Self {
        let (j, r) = (n / 3, n % 3);
        match r {
            0 => Self { block: 2 * j + 1, orphan: j },
            1 => Self { block: 2 * j + 1, orphan: j + 1 },
            _ => Self { block: 2 * j + 2, orphan: j + 1 },
        }
    }

    pub fn decide(&self, m: usize, k: usize) -> Decision {
        if m >= self.block {
            Decision::Block
        } else if k >= self.orphan {
            Decision::Orphan
        } else {
            Decision::Undecided
        }
    }
}

/// Outcome class of a voting state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    /// Fewer than `3L` nodes; no vote is running.
    BelowThreshold,
    /// Vote running, outcome still open.
    Undecided,
    /// Enough approvals: the package becomes a block.
    Block,
    /// Enough refusals: the package becomes an orphan.
    Orphan,
}

impl Decision {
    pub fn is_decided(self) -> bool {
        matches!(self, Decision::Block | Decision::Orphan)
    }
}

/// Level of the block-tridiagonal structure: the boundary group of
/// sub-threshold states or a single node count `l >= 3L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Boundary,
    Nodes(usize),
}

/// Ordered enumeration of the voting state space.
///
/// Boundary states `(0,0,0) .. (3L-1,0,0)` come first, then each level `l`
/// in ascending order with `m` ascending and `k` ascending within `m`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    min_voting: usize,
    max_nodes: usize,
    states: Vec<VotingState>,
    /// `offsets[i]` is the first ordinal of level index `i`; one extra
    /// trailing entry holds the total size.
    offsets: Vec<usize>,
}

impl StateSpace {
    pub fn new<T: Real>(params: &ModelParams<T>) -> Result<Self> {
        Self::with_cap(params, DEFAULT_STATE_CAP)
    }

    pub fn with_cap<T: Real>(params: &ModelParams<T>, cap: usize) -> Result<Self> {
        params.validate()?;
        let min_voting = params.min_voting_nodes();
        let max_nodes = params.max_nodes();
        let total = Self::size_for(params.lower, params.upper);
        if total > cap {
            return Err(Error::SizeCap { states: total, cap });
        }
        let mut states = Vec::with_capacity(total);
        let mut offsets = vec![0];
        states.extend((0..min_voting).map(|n| VotingState::new(n, 0, 0)));
        for l in min_voting..=max_nodes {
            offsets.push(states.len());
            for m in 0..=l {
                states.extend((0..=l - m).map(|k| VotingState::new(l, m, k)));
            }
        }
        offsets.push(states.len());
        debug_assert_eq!(states.len(), total);
        Ok(Self {
            min_voting,
            max_nodes,
            states,
            offsets,
        })
    }

    /// Closed-form state count `3L + sum_{l=3L}^{3N+2} (l+1)(l+2)/2`.
    pub fn size_for(lower: usize, upper: usize) -> usize {
        3 * lower + (3 * lower..=3 * upper + 2).map(level_size).sum::<usize>()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[VotingState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> VotingState {
        self.states[i]
    }

    /// Number of levels including the boundary level.
    pub fn num_levels(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Level at a level index; index 0 is the boundary.
    pub fn level(&self, idx: usize) -> Level {
        if idx == 0 {
            Level::Boundary
        } else {
            Level::Nodes(self.min_voting + idx - 1)
        }
    }

    pub fn level_index(&self, level: Level) -> Option<usize> {
        match level {
            Level::Boundary => Some(0),
            Level::Nodes(l) if (self.min_voting..=self.max_nodes).contains(&l) => {
                Some(l - self.min_voting + 1)
            }
            Level::Nodes(_) => None,
        }
    }

    /// Ordinal range covered by a level index.
    pub fn level_range(&self, idx: usize) -> std::ops::Range<usize> {
        self.offsets[idx]..self.offsets[idx + 1]
    }

    pub fn level_len(&self, idx: usize) -> usize {
        self.offsets[idx + 1] - self.offsets[idx]
    }

    /// Level index containing the state.
    pub fn level_of(&self, s: VotingState) -> usize {
        if s.n < self.min_voting {
            0
        } else {
            s.n - self.min_voting + 1
        }
    }

    /// Ordinal of a state, or `None` if it is not in the space.
    pub fn index_of(&self, s: VotingState) -> Option<usize> {
        if s.n > self.max_nodes {
            return None;
        }
        if s.n < self.min_voting {
            return (s.m == 0 && s.k == 0).then_some(s.n);
        }
        if s.m + s.k > s.n {
            return None;
        }
        let l = s.n;
        // rows m' < m contribute (l + 1 - m') states each
        let before = s.m * (l + 1) - s.m * s.m.saturating_sub(1) / 2;
        Some(self.offsets[self.level_of(s)] + before + s.k)
    }
}

/// States at node count `l >= 3L`: `(l+1)(l+2)/2`.
pub fn level_size(l: usize) -> usize {
    (l + 1) * (l + 2) / 2
}
