//! Discrete-event simulation of the transaction pool.
//!
//! Two service models are available. [`simulate_system`] serves each
//! package with the voting chain itself; [`simulate_surrogate`] runs the
//! pool-size chain of the analytical queue, where block removals of `b`
//! transactions happen at rate `r1` whenever the pool holds at least `b`
//! and rollback batches of `b` arrive at rate `r2` in every pool state.

use dpbft_core::model::ModelParams;
use dpbft_core::queue::QueueParams;
use dpbft_core::{Decision, Event};
use rand::Rng;
use rand_distr::Exp1;

use crate::config::{invalid, overlap, Result, SimConfig, SimEstimate};
use crate::voting::ChainTable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemOptions {
    /// Pool size at the horizon above which a replication is flagged as
    /// diverging. `None` means `100 * b`.
    pub runaway_threshold: Option<u64>,
    /// Number of equally spaced pool-size snapshots over the measurement
    /// window; the last one is taken at the horizon.
    pub checkpoints: usize,
}

impl Default for SystemOptions {
    fn default() -> Self {
        Self {
            runaway_threshold: None,
            checkpoints: 10,
        }
    }
}

impl SystemOptions {
    fn threshold(&self, b: usize) -> u64 {
        self.runaway_threshold.unwrap_or(100 * b as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemReplication {
    /// Time fraction with no package in service.
    pub eta1: f64,
    /// Time fraction with a package in service.
    pub eta2: f64,
    /// Committed transactions per unit time.
    pub throughput: f64,
    /// Time-averaged number of uncommitted transactions, the package in
    /// service included.
    pub mean_pool: f64,
    /// Pool size at the horizon.
    pub final_pool: u64,
    pub diverged: bool,
    /// Pool size at each checkpoint time.
    pub checkpoints: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSimulation {
    pub replications: Vec<SystemReplication>,
    pub eta1: SimEstimate,
    pub eta2: SimEstimate,
    pub throughput: SimEstimate,
    pub mean_pool: SimEstimate,
    /// Whether any replication diverged.
    pub diverged: bool,
    pub checkpoint_times: Vec<f64>,
    /// Pool size at each checkpoint, averaged over replications.
    pub checkpoint_means: Vec<f64>,
}

impl SystemSimulation {
    fn pool(replications: Vec<SystemReplication>, times: Vec<f64>) -> Self {
        let n = replications.len() as f64;
        let checkpoint_means = (0..times.len())
            .map(|j| replications.iter().map(|r| r.checkpoints[j] as f64).sum::<f64>() / n)
            .collect();
        Self {
            eta1: SimEstimate::from_fn(&replications, |r| r.eta1),
            eta2: SimEstimate::from_fn(&replications, |r| r.eta2),
            throughput: SimEstimate::from_fn(&replications, |r| r.throughput),
            mean_pool: SimEstimate::from_fn(&replications, |r| r.mean_pool),
            diverged: replications.iter().any(|r| r.diverged),
            checkpoint_times: times,
            checkpoint_means,
            replications,
        }
    }

    /// Whether the averaged pool size strictly increases across checkpoints.
    pub fn pool_grows_monotonically(&self) -> bool {
        self.checkpoint_means.windows(2).all(|w| w[1] > w[0])
    }
}

/// Statistics shared by both service models.
struct Recorder {
    warmup: f64,
    horizon: f64,
    times: Vec<f64>,
    snapshots: Vec<u64>,
    busy: f64,
    area: f64,
    committed: u64,
}

impl Recorder {
    fn new(cfg: &SimConfig, times: &[f64]) -> Self {
        Self {
            warmup: cfg.warmup,
            horizon: cfg.horizon,
            times: times.to_vec(),
            snapshots: Vec::with_capacity(times.len()),
            busy: 0.0,
            area: 0.0,
            committed: 0,
        }
    }

    /// Accounts for the pool holding `level` over `[t, next)`.
    fn hold(&mut self, t: f64, next: f64, level: u64, busy: bool) {
        let dt = overlap(t, next, self.warmup, self.horizon);
        if busy {
            self.busy += dt;
        }
        self.area += dt * level as f64;
        while let Some(&c) = self.times.get(self.snapshots.len()) {
            if c >= next {
                break;
            }
            self.snapshots.push(level);
        }
    }

    fn commit(&mut self, t: f64, b: usize) {
        if t > self.warmup {
            self.committed += b as u64;
        }
    }

    fn finish(self, level: u64, threshold: u64) -> SystemReplication {
        let w = self.horizon - self.warmup;
        let eta2 = self.busy / w;
        SystemReplication {
            eta1: 1.0 - eta2,
            eta2,
            throughput: self.committed as f64 / w,
            mean_pool: self.area / w,
            final_pool: level,
            diverged: level > threshold,
            checkpoints: self.snapshots,
        }
    }
}

fn checkpoint_times(cfg: &SimConfig, k: usize) -> Vec<f64> {
    (1..=k)
        .map(|j| {
            if j == k {
                cfg.horizon
            } else {
                cfg.warmup + cfg.window() * j as f64 / k as f64
            }
        })
        .collect()
}

fn check_inputs(lambda: f64, b: usize, opts: &SystemOptions) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", format!("must be finite and > 0, got {lambda}")));
    }
    if b == 0 {
        return Err(invalid("b", "must be at least 1"));
    }
    if opts.checkpoints == 0 {
        return Err(invalid("checkpoints", "must be at least 1"));
    }
    Ok(())
}

pub fn simulate_system(params: &ModelParams<f64>, lambda: f64, b: usize, cfg: &SimConfig) -> Result<SystemSimulation> {
    simulate_system_with(params, lambda, b, cfg, &SystemOptions::default())
}

/// Pool fed by Poisson(`lambda`) singles and served one package of `b`
/// transactions at a time by the voting chain.
///
/// Between packages the chain only moves through node entries and
/// departures at `(n, 0, 0)`. A package enters service at the current node
/// count as soon as the pool holds `b` waiting transactions; block
/// settlement commits it, orphan settlement returns it to the pool.
pub fn simulate_system_with(
    params: &ModelParams<f64>,
    lambda: f64,
    b: usize,
    cfg: &SimConfig,
    opts: &SystemOptions,
) -> Result<SystemSimulation> {
    params.validate()?;
    cfg.validate()?;
    check_inputs(lambda, b, opts)?;
    let busy = ChainTable::build(params, |_| true)?;
    let idle = ChainTable::build(params, |e| matches!(e, Event::Entry | Event::Departure))?;
    let times = checkpoint_times(cfg, opts.checkpoints);
    let threshold = opts.threshold(b);
    let b64 = b as u64;

    let replications = cfg.run(|rng| {
        let mut rec = Recorder::new(cfg, &times);
        let (mut t, mut state, mut waiting, mut in_service) = (0.0, 0usize, 0u64, false);
        loop {
            let row = if in_service { busy.row(state) } else { idle.row(state) };
            let total = lambda + row.total;
            let next = t + rng.sample::<f64, _>(Exp1) / total;
            let level = waiting + if in_service { b64 } else { 0 };
            rec.hold(t, next, level, in_service);
            t = next;
            if t > cfg.horizon {
                return rec.finish(level, threshold);
            }
            if rng.random::<f64>() * total < lambda {
                waiting += 1;
            } else {
                let (target, event) = row.choose(rng);
                if event == Event::Settle {
                    in_service = false;
                    match row.class {
                        Decision::Block => rec.commit(t, b),
                        Decision::Orphan => waiting += b64,
                        _ => unreachable!("settlement only leaves decided states"),
                    }
                }
                state = target;
            }
            if !in_service && waiting >= b64 {
                waiting -= b64;
                in_service = true;
            }
        }
    });
    Ok(SystemSimulation::pool(replications, times))
}

pub fn simulate_surrogate(qp: &QueueParams<f64>, cfg: &SimConfig) -> Result<SystemSimulation> {
    simulate_surrogate_with(qp, cfg, &SystemOptions::default())
}

/// Simulates the pool-size chain of the analytical queue.
///
/// From pool size `i`: singles arrive at `lambda`, rollback batches of `b`
/// at `r2`, and `b` transactions are committed at `r1` when `i >= b`. A
/// package counts as in service while `i >= b`.
pub fn simulate_surrogate_with(qp: &QueueParams<f64>, cfg: &SimConfig, opts: &SystemOptions) -> Result<SystemSimulation> {
    qp.validate()?;
    cfg.validate()?;
    check_inputs(qp.lambda, qp.b, opts)?;
    let times = checkpoint_times(cfg, opts.checkpoints);
    let threshold = opts.threshold(qp.b);
    let b = qp.b as u64;

    let replications = cfg.run(|rng| {
        let mut rec = Recorder::new(cfg, &times);
        let (mut t, mut level) = (0.0, 0u64);
        loop {
            let serving = level >= b;
            let service = if serving { qp.r1 } else { 0.0 };
            let total = qp.lambda + qp.r2 + service;
            let next = t + rng.sample::<f64, _>(Exp1) / total;
            rec.hold(t, next, level, serving);
            t = next;
            if t > cfg.horizon {
                return rec.finish(level, threshold);
            }
            let u = rng.random::<f64>() * total;
            if u < qp.lambda {
                level += 1;
            } else if u < qp.lambda + qp.r2 {
                level += b;
            } else {
                level -= b;
                rec.commit(t, qp.b);
            }
        }
    });
    Ok(SystemSimulation::pool(replications, times))
}
