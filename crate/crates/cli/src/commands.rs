//! The four subcommands and the CSV records they emit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use dpbft_core::queue::QueueParams;
use dpbft_core::{analyze_voting, solve_queue, stability_check, QueueSolution, Stability, VotingAnalysis};
use dpbft_sim::{SimEstimate, SystemOptions, SystemSimulation};
use rayon::prelude::*;

use crate::config::{RunConfig, Value};
use crate::error::{CliError, Result};
use crate::grid::{grid, SweepSpec};

pub const VOTING_HEADER: [&str; 14] = [
    "mu", "theta", "gamma", "beta", "p", "L", "N", "zeta1", "zeta2", "A", "B", "C", "r1", "r2",
];
pub const QUEUE_HEADER: [&str; 11] = [
    "lambda", "b", "r1", "r2", "stable", "iterations", "eta1", "eta2", "Re1", "Re2", "TH",
];
pub const SIMULATE_HEADER: [&str; 9] = [
    "scope", "replication", "metric", "estimate", "std_err", "replications", "analytic", "delta", "diverged",
];

/// Optional side outputs of the voting stage.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dumps<'a> {
    pub pi: Option<&'a Path>,
    pub q: Option<&'a Path>,
}

impl Dumps<'_> {
    fn write(&self, analysis: &VotingAnalysis) -> Result<()> {
        if let Some(path) = self.pi {
            let mut w = BufWriter::new(File::create(path)?);
            analysis
                .distribution
                .write_csv(analysis.generator.space().states(), &mut w)?;
            w.flush()?;
        }
        if let Some(path) = self.q {
            let mut w = BufWriter::new(File::create(path)?);
            analysis.generator.write_triplets(&mut w)?;
            w.flush()?;
        }
        Ok(())
    }

    fn any(&self) -> bool {
        self.pi.is_some() || self.q.is_some()
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

/// One voting-stage result.
#[derive(Debug, Clone)]
pub struct VotingRow {
    pub params: dpbft_core::ModelParams,
    pub measures: dpbft_core::VotingMeasures,
}

impl VotingRow {
    pub fn record(&self) -> Vec<String> {
        let (p, m) = (&self.params, &self.measures);
        vec![
            num(p.mu),
            num(p.theta),
            num(p.gamma),
            num(p.beta),
            num(p.p),
            p.lower.to_string(),
            p.upper.to_string(),
            num(m.zeta1),
            num(m.zeta2),
            num(m.completed),
            num(m.cannot_vote),
            num(m.in_progress),
            num(m.r1),
            num(m.r2),
        ]
    }
}

/// One queue-stage result; unstable points carry no solution.
#[derive(Debug, Clone)]
pub struct QueueRow {
    pub params: QueueParams<f64>,
    pub solution: Option<QueueSolution>,
}

impl QueueRow {
    pub fn is_stable(&self) -> bool {
        self.solution.is_some()
    }

    pub fn throughput(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.throughput)
    }

    pub fn record(&self) -> Vec<String> {
        let q = &self.params;
        let mut rec = vec![num(q.lambda), q.b.to_string(), num(q.r1), num(q.r2)];
        match &self.solution {
            Some(s) => rec.extend([
                "true".to_string(),
                s.iterations.to_string(),
                num(s.eta1),
                num(s.eta2),
                num(s.re1),
                num(s.re2),
                num(s.throughput),
            ]),
            None => {
                rec.push("false".to_string());
                rec.extend(std::iter::repeat_n(String::new(), 6));
            }
        }
        rec
    }

    /// The violated stability inequality with numbers.
    pub fn instability_message(&self) -> String {
        let q = &self.params;
        format!(
            "queue is unstable: lambda + r2*b = {} + {}*{} = {} is not below r1*b = {}*{} = {}",
            q.lambda,
            q.r2,
            q.b,
            q.up_drift(),
            q.r1,
            q.b,
            q.down_drift()
        )
    }
}

/// Stationary voting analysis for the configured model.
pub fn voting_point(cfg: &RunConfig) -> Result<VotingAnalysis> {
    Ok(analyze_voting(&cfg.model_params()?)?)
}

/// Queue analysis, with `r1`, `r2` taken from the config or from the
/// voting stage.
pub fn queue_point(cfg: &RunConfig) -> Result<QueueRow> {
    queue_point_with(cfg, Dumps::default())
}

fn queue_point_with(cfg: &RunConfig, dumps: Dumps<'_>) -> Result<QueueRow> {
    let (r1, r2) = if cfg.direct_rates()? {
        if dumps.any() {
            return Err(CliError::Usage(
                "--dump-pi/--dump-q need the voting model; r1/r2 were given directly".into(),
            ));
        }
        (cfg.f64("r1")?, cfg.f64("r2")?)
    } else {
        cfg.require(&["lambda", "b"])?;
        let analysis = voting_point(cfg)?;
        dumps.write(&analysis)?;
        (analysis.measures.r1, analysis.measures.r2)
    };
    let params = cfg.queue_params(r1, r2)?;
    let solution = match stability_check(&params) {
        Stability::Unstable => None,
        Stability::Stable => Some(solve_queue(&params, cfg.epsilon()?, cfg.max_iter()?)?),
    };
    Ok(QueueRow { params, solution })
}

fn csv_writer(out: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new().has_headers(false).from_writer(out)
}

pub fn cmd_voting(cfg: &RunConfig, dumps: Dumps<'_>, out: &mut dyn Write) -> Result<()> {
    let analysis = voting_point(cfg)?;
    dumps.write(&analysis)?;
    let row = VotingRow {
        params: *analysis.generator.params(),
        measures: analysis.measures,
    };
    let mut w = csv_writer(out);
    w.write_record(VOTING_HEADER)?;
    w.write_record(row.record())?;
    w.flush()?;
    Ok(())
}

/// Writes the queue row; an unstable point is written and then reported
/// as [`CliError::Unstable`].
pub fn cmd_queue(cfg: &RunConfig, dumps: Dumps<'_>, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    let row = queue_point_with(cfg, dumps)?;
    let mut w = csv_writer(out);
    w.write_record(QUEUE_HEADER)?;
    w.write_record(row.record())?;
    w.flush()?;
    match &row.solution {
        Some(s) => {
            writeln!(
                log,
                "rate matrix converged in {} iterations (last delta {:e})",
                s.iterations, s.last_delta
            )?;
            Ok(())
        }
        None => Err(CliError::Unstable(row.instability_message())),
    }
}

/// What a sweep evaluates at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepTarget {
    Voting,
    Queue,
}

impl SweepTarget {
    /// `target` key if present; otherwise queue when `lambda` is set.
    pub fn resolve(cfg: &RunConfig, specs: &[SweepSpec]) -> Result<Self> {
        match cfg.string("target").as_deref() {
            Some("voting") => Ok(SweepTarget::Voting),
            Some("queue") => Ok(SweepTarget::Queue),
            Some(other) => Err(CliError::Usage(format!(
                "target must be `voting` or `queue`, got `{other}`"
            ))),
            None if cfg.has("lambda") || specs.iter().any(|s| s.name == "lambda") => Ok(SweepTarget::Queue),
            None => Ok(SweepTarget::Voting),
        }
    }
}

#[derive(Debug, Clone)]
pub enum PointResult {
    Voting(VotingRow),
    Queue(QueueRow),
}

impl PointResult {
    pub fn record(&self) -> Vec<String> {
        match self {
            PointResult::Voting(r) => r.record(),
            PointResult::Queue(r) => r.record(),
        }
    }

    pub fn voting(&self) -> Option<&VotingRow> {
        match self {
            PointResult::Voting(r) => Some(r),
            PointResult::Queue(_) => None,
        }
    }

    pub fn queue(&self) -> Option<&QueueRow> {
        match self {
            PointResult::Queue(r) => Some(r),
            PointResult::Voting(_) => None,
        }
    }
}

/// Sweep results in grid order.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub target: SweepTarget,
    pub names: Vec<String>,
    pub points: Vec<Vec<Value>>,
    pub results: Vec<PointResult>,
}

impl SweepTable {
    pub fn header(&self) -> Vec<String> {
        let schema: &[&str] = match self.target {
            SweepTarget::Voting => &VOTING_HEADER,
            SweepTarget::Queue => &QUEUE_HEADER,
        };
        self.names
            .iter()
            .cloned()
            .chain(schema.iter().map(|s| s.to_string()))
            .collect()
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record(self.header())?;
        for (point, result) in self.points.iter().zip(&self.results) {
            let mut rec: Vec<String> = point.iter().map(|v| v.to_string()).collect();
            rec.extend(result.record());
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Results at grid points whose swept values satisfy `filter`.
    pub fn select<'a>(&'a self, filter: impl Fn(&[Value]) -> bool + 'a) -> impl Iterator<Item = &'a PointResult> + 'a {
        self.points
            .iter()
            .zip(&self.results)
            .filter(move |(p, _)| filter(p))
            .map(|(_, r)| r)
    }
}

/// Evaluates every grid point in parallel and returns them in grid order.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepTable> {
    let specs: Vec<SweepSpec> = cfg.sweeps().iter().map(|s| SweepSpec::parse(s)).collect::<Result<_>>()?;
    if specs.is_empty() || specs.len() > 2 {
        return Err(CliError::Usage(format!(
            "sweep needs one or two --sweep specs, got {}",
            specs.len()
        )));
    }
    if specs.len() == 2 && specs[0].name == specs[1].name {
        return Err(CliError::Usage(format!("`{}` swept twice", specs[0].name)));
    }
    let target = SweepTarget::resolve(cfg, &specs)?;
    let points = grid(&specs);
    let results: Vec<Result<PointResult>> = points
        .par_iter()
        .map(|point| {
            let mut local = cfg.clone();
            for (name, value) in point {
                local.set(name, value.clone())?;
            }
            match target {
                SweepTarget::Voting => {
                    let analysis = voting_point(&local)?;
                    Ok(PointResult::Voting(VotingRow {
                        params: *analysis.generator.params(),
                        measures: analysis.measures,
                    }))
                }
                SweepTarget::Queue => Ok(PointResult::Queue(queue_point(&local)?)),
            }
        })
        .collect();
    Ok(SweepTable {
        target,
        names: specs.iter().map(|s| s.name.clone()).collect(),
        points: points
            .into_iter()
            .map(|p| p.into_iter().map(|(_, v)| v).collect())
            .collect(),
        results: results.into_iter().collect::<Result<_>>()?,
    })
}

pub fn cmd_sweep(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    run_sweep(cfg)?.write_csv(out)
}

/// Which simulation `cmd_simulate` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    /// Voting chain alone.
    Voting,
    /// Pool served by the voting chain.
    System,
    /// Pool-size chain of the analytical queue.
    Surrogate,
}

impl SimMode {
    /// `mode` key if present; otherwise system when `lambda` is set.
    pub fn resolve(cfg: &RunConfig) -> Result<Self> {
        match cfg.string("mode").as_deref() {
            Some("voting") => Ok(SimMode::Voting),
            Some("system") => Ok(SimMode::System),
            Some("surrogate") => Ok(SimMode::Surrogate),
            Some(other) => Err(CliError::Usage(format!(
                "mode must be `voting`, `system` or `surrogate`, got `{other}`"
            ))),
            None if cfg.has("lambda") => Ok(SimMode::System),
            None => Ok(SimMode::Voting),
        }
    }
}

/// Per-replication rows for one metric followed by its pooled row.
#[allow(clippy::too_many_arguments)]
fn write_metric(
    w: &mut csv::Writer<&mut dyn Write>,
    metric: &str,
    samples: &[f64],
    pooled: SimEstimate,
    analytic: Option<f64>,
    rep_diverged: &[bool],
    any_diverged: bool,
) -> Result<()> {
    let reference = |x: f64| match analytic {
        Some(a) => (num(a), num(x - a)),
        None => (String::new(), String::new()),
    };
    for (i, (&x, &div)) in samples.iter().zip(rep_diverged).enumerate() {
        let (a, d) = reference(x);
        w.write_record([
            "replication".to_string(),
            i.to_string(),
            metric.to_string(),
            num(x),
            String::new(),
            "1".to_string(),
            a,
            d,
            div.to_string(),
        ])?;
    }
    let (a, d) = reference(pooled.mean);
    w.write_record([
        "pooled".to_string(),
        String::new(),
        metric.to_string(),
        num(pooled.mean),
        num(pooled.std_err),
        pooled.replications.to_string(),
        a,
        d,
        any_diverged.to_string(),
    ])?;
    Ok(())
}

fn system_rows(
    w: &mut csv::Writer<&mut dyn Write>,
    sim: &SystemSimulation,
    analytic: Option<&QueueSolution>,
) -> Result<()> {
    let reps = &sim.replications;
    let div: Vec<bool> = reps.iter().map(|r| r.diverged).collect();
    let mean_pool = match analytic {
        Some(s) => Some(s.mean_pool_size()?),
        None => None,
    };
    let metrics: [(&str, Vec<f64>, SimEstimate, Option<f64>); 4] = [
        ("eta1", reps.iter().map(|r| r.eta1).collect(), sim.eta1, analytic.map(|s| s.eta1)),
        ("eta2", reps.iter().map(|r| r.eta2).collect(), sim.eta2, analytic.map(|s| s.eta2)),
        (
            "TH",
            reps.iter().map(|r| r.throughput).collect(),
            sim.throughput,
            analytic.map(|s| s.throughput),
        ),
        ("mean_pool", reps.iter().map(|r| r.mean_pool).collect(), sim.mean_pool, mean_pool),
    ];
    for (name, samples, pooled, reference) in metrics {
        write_metric(w, name, &samples, pooled, reference, &div, sim.diverged)?;
    }
    let finals: Vec<f64> = reps.iter().map(|r| r.final_pool as f64).collect();
    write_metric(
        w,
        "final_pool",
        &finals,
        SimEstimate::from_samples(&finals),
        None,
        &div,
        sim.diverged,
    )
}

fn system_options(cfg: &RunConfig) -> Result<SystemOptions> {
    let mut opts = SystemOptions::default();
    if cfg.has("runaway") {
        opts.runaway_threshold = Some(cfg.u64("runaway")?);
    }
    opts.checkpoints = cfg.usize_or("checkpoints", opts.checkpoints)?;
    Ok(opts)
}

fn analytic_queue(params: &QueueParams<f64>, cfg: &RunConfig) -> Result<Option<QueueSolution>> {
    match stability_check(params) {
        Stability::Unstable => Ok(None),
        Stability::Stable => Ok(Some(solve_queue(params, cfg.epsilon()?, cfg.max_iter()?)?)),
    }
}

pub fn cmd_simulate(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let sim_cfg = cfg.sim_config()?;
    let mut w = csv_writer(out);
    w.write_record(SIMULATE_HEADER)?;
    match SimMode::resolve(cfg)? {
        SimMode::Voting => {
            let params = cfg.model_params()?;
            let exact = analyze_voting(&params)?.measures;
            let sim = dpbft_sim::simulate_voting(&params, &sim_cfg)?;
            let reps = &sim.replications;
            let div = vec![false; reps.len()];
            let metrics: [(&str, fn(&dpbft_sim::VotingReplication) -> f64, SimEstimate, f64); 6] = [
                ("zeta1", |r| r.zeta1, sim.zeta1, exact.zeta1),
                ("zeta2", |r| r.zeta2, sim.zeta2, exact.zeta2),
                ("B", |r| r.below, sim.below, exact.cannot_vote),
                ("C", |r| r.undecided, sim.undecided, exact.in_progress),
                ("r1", |r| r.r1, sim.r1, exact.r1),
                ("r2", |r| r.r2, sim.r2, exact.r2),
            ];
            for (name, get, pooled, reference) in metrics {
                let samples: Vec<f64> = reps.iter().map(get).collect();
                write_metric(&mut w, name, &samples, pooled, Some(reference), &div, false)?;
            }
        }
        SimMode::System => {
            if cfg.direct_rates()? {
                return Err(CliError::Usage(
                    "mode `system` simulates the voting chain; drop r1/r2 or use mode `surrogate`".into(),
                ));
            }
            let params = cfg.model_params()?;
            let exact = analyze_voting(&params)?.measures;
            let qp = cfg.queue_params(exact.r1, exact.r2)?;
            let analytic = analytic_queue(&qp, cfg)?;
            let sim = dpbft_sim::simulate_system_with(&params, qp.lambda, qp.b, &sim_cfg, &system_options(cfg)?)?;
            system_rows(&mut w, &sim, analytic.as_ref())?;
        }
        SimMode::Surrogate => {
            let (r1, r2) = if cfg.direct_rates()? {
                (cfg.f64("r1")?, cfg.f64("r2")?)
            } else {
                let m = voting_point(cfg)?.measures;
                (m.r1, m.r2)
            };
            let qp = cfg.queue_params(r1, r2)?;
            let analytic = analytic_queue(&qp, cfg)?;
            let sim = dpbft_sim::simulate_surrogate_with(&qp, &sim_cfg, &system_options(cfg)?)?;
            system_rows(&mut w, &sim, analytic.as_ref())?;
        }
    }
    w.flush()?;
    Ok(())
}
