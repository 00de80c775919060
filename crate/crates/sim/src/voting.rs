//! Gillespie simulation of the voting chain.

use dpbft_core::model::ModelParams;
use dpbft_core::{transition_rules, Decision, Event, StateSpace};
use rand::Rng;
use rand_distr::Exp1;

use crate::config::{overlap, Result, SimConfig, SimEstimate};

/// Outgoing transitions of every state, indexed by state ordinal.
#[derive(Debug, Clone)]
pub(crate) struct ChainTable {
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub class: Decision,
    pub total: f64,
    pub moves: Vec<(usize, f64, Event)>,
}

impl ChainTable {
    /// Table restricted to the events accepted by `keep`.
    pub fn build(params: &ModelParams<f64>, keep: impl Fn(Event) -> bool) -> Result<Self> {
        let space = StateSpace::new(params)?;
        let mut rows = Vec::with_capacity(space.len());
        for &s in space.states() {
            let mut moves = Vec::new();
            for t in transition_rules(s, params)? {
                if keep(t.event) {
                    let j = space.index_of(t.target).expect("rules stay inside the state space");
                    moves.push((j, t.rate, t.event));
                }
            }
            rows.push(Row {
                class: params.classify(s),
                total: moves.iter().map(|m| m.1).sum(),
                moves,
            });
        }
        Ok(Self { rows })
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &Row {
        &self.rows[i]
    }
}

impl Row {
    /// Holding time in this state; infinite when nothing can fire.
    pub fn holding_time<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.total > 0.0 {
            rng.sample::<f64, _>(Exp1) / self.total
        } else {
            f64::INFINITY
        }
    }

    /// Picks a transition with probability proportional to its rate.
    pub fn choose<R: Rng>(&self, rng: &mut R) -> (usize, Event) {
        let mut u = rng.random::<f64>() * self.total;
        for &(j, rate, event) in &self.moves {
            if u < rate {
                return (j, event);
            }
            u -= rate;
        }
        let &(j, _, event) = self.moves.last().expect("row has at least one transition");
        (j, event)
    }
}

/// Time fractions by decision class and settlement rates of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VotingReplication {
    /// Time fraction in block-decided states.
    pub zeta1: f64,
    /// Time fraction in orphan-decided states.
    pub zeta2: f64,
    /// Time fraction below the voting threshold.
    pub below: f64,
    /// Time fraction with a vote undecided.
    pub undecided: f64,
    /// Settlements out of block-decided states per unit time.
    pub r1: f64,
    /// Settlements out of orphan-decided states per unit time.
    pub r2: f64,
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VotingSimulation {
    pub replications: Vec<VotingReplication>,
    pub zeta1: SimEstimate,
    pub zeta2: SimEstimate,
    pub below: SimEstimate,
    pub undecided: SimEstimate,
    pub r1: SimEstimate,
    pub r2: SimEstimate,
}

/// Simulates the voting chain from `(0, 0, 0)`.
pub fn simulate_voting(params: &ModelParams<f64>, cfg: &SimConfig) -> Result<VotingSimulation> {
    params.validate()?;
    cfg.validate()?;
    let table = ChainTable::build(params, |_| true)?;
    let replications = cfg.run(|rng| run_voting(&table, cfg, rng));
    Ok(VotingSimulation {
        zeta1: SimEstimate::from_fn(&replications, |r| r.zeta1),
        zeta2: SimEstimate::from_fn(&replications, |r| r.zeta2),
        below: SimEstimate::from_fn(&replications, |r| r.below),
        undecided: SimEstimate::from_fn(&replications, |r| r.undecided),
        r1: SimEstimate::from_fn(&replications, |r| r.r1),
        r2: SimEstimate::from_fn(&replications, |r| r.r2),
        replications,
    })
}

fn run_voting<R: Rng>(table: &ChainTable, cfg: &SimConfig, rng: &mut R) -> VotingReplication {
    let (mut t, mut state) = (0.0, 0usize);
    let mut occupancy = [0.0f64; 4];
    let (mut blocks, mut orphans, mut events) = (0u64, 0u64, 0u64);
    while t < cfg.horizon {
        let row = table.row(state);
        let next = t + row.holding_time(rng);
        occupancy[slot(row.class)] += overlap(t, next, cfg.warmup, cfg.horizon);
        t = next;
        if t > cfg.horizon {
            break;
        }
        let (target, event) = row.choose(rng);
        events += 1;
        if event == Event::Settle && t > cfg.warmup {
            match row.class {
                Decision::Block => blocks += 1,
                Decision::Orphan => orphans += 1,
                _ => unreachable!("settlement only leaves decided states"),
            }
        }
        state = target;
    }
    let w = cfg.window();
    VotingReplication {
        zeta1: occupancy[slot(Decision::Block)] / w,
        zeta2: occupancy[slot(Decision::Orphan)] / w,
        below: occupancy[slot(Decision::BelowThreshold)] / w,
        undecided: occupancy[slot(Decision::Undecided)] / w,
        r1: blocks as f64 / w,
        r2: orphans as f64 / w,
        events,
    }
}

fn slot(d: Decision) -> usize {
    match d {
        Decision::BelowThreshold => 0,
        Decision::Undecided => 1,
        Decision::Block => 2,
        Decision::Orphan => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> ModelParams<f64> {
        ModelParams::new(2.0, 2.0, 10.0, 2.0, 0.7, 1, 1).unwrap()
    }

    #[test]
    fn table_matches_rules() {
        let p = params();
        let table = ChainTable::build(&p, |_| true).unwrap();
        assert_eq!(table.len(), 3 + 10 + 15 + 21);
        let row = table.row(0);
        assert_eq!(row.moves.len(), 1);
        assert_eq!(row.total, 2.0);
        let idle = ChainTable::build(&p, |e| matches!(e, Event::Entry | Event::Departure)).unwrap();
        for i in 0..idle.len() {
            assert!(idle.row(i).moves.len() <= 2);
        }
    }

    #[test]
    fn choice_frequencies_follow_rates() {
        let row = Row {
            class: Decision::Undecided,
            total: 4.0,
            moves: vec![(0, 1.0, Event::Entry), (1, 3.0, Event::Approve)],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 40_000;
        let hits = (0..n).filter(|_| row.choose(&mut rng).0 == 1).count();
        let frac = hits as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.01, "{frac}");
    }

    #[test]
    fn fractions_partition_the_window() {
        let cfg = SimConfig::new(5, 2_000.0, 100.0, 3).unwrap();
        let sim = simulate_voting(&params(), &cfg).unwrap();
        for r in &sim.replications {
            let total = r.zeta1 + r.zeta2 + r.below + r.undecided;
            assert!((total - 1.0).abs() < 1e-9, "{total}");
            assert!((r.r1 - 2.0 * r.zeta1).abs() < 0.1);
        }
    }

    #[test]
    fn same_seed_same_estimates() {
        let cfg = SimConfig::new(11, 500.0, 10.0, 4).unwrap();
        let a = simulate_voting(&params(), &cfg).unwrap();
        let b = simulate_voting(&params(), &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_voting(&params(), &SimConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.zeta1, c.zeta1);
    }
}
