//! The batch-arrival, batch-service pool queue.
//!
//! Transactions arrive singly at rate `lambda`; rolled-back packages return
//! `b` transactions at rate `r2` regardless of the pool level; while the
//! pool holds at least `b` transactions a package of `b` is pegged at rate
//! `r1`. Grouping pool sizes into levels of `b` gives a level-independent
//! QBD solved here by the matrix-geometric method.

use crate::error::{invalid, Error, Result};
use crate::generator::{build_queue_blocks, QueueBlocks};
use crate::linalg::{DenseMatrix, Lu};
use crate::qbd::null_vector_left;
use crate::scalar::Real;

/// Default stopping tolerance of the rate-matrix iteration.
pub const DEFAULT_EPSILON: f64 = 1e-12;
/// Default iteration budget of the rate-matrix iteration.
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
/// Tolerance of the throughput flow-balance check, relative to `max(1, TH)`;
/// raised to `1000 * T::epsilon()` for scalars coarser than `f64`.
pub const FLOW_BALANCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueParams<T> {
    /// External transaction arrival rate.
    pub lambda: T,
    /// Transactions per package.
    pub b: usize,
    /// Block-pegging rate.
    pub r1: T,
    /// Rollback rate.
    pub r2: T,
}

impl<T: Real> QueueParams<T> {
    pub fn new(lambda: T, b: usize, r1: T, r2: T) -> Result<Self> {
        let qp = Self { lambda, b, r1, r2 };
        qp.validate()?;
        Ok(qp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > T::zero()) || !self.lambda.is_finite() {
            return Err(invalid("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if self.b < 1 {
            return Err(invalid("b", "batch size must be at least 1"));
        }
        if !(self.r1 > T::zero()) || !self.r1.is_finite() {
            return Err(invalid("r1", format!("must be positive, got {}", self.r1)));
        }
        if !(self.r2 >= T::zero()) || !self.r2.is_finite() {
            return Err(invalid("r2", format!("must be nonnegative, got {}", self.r2)));
        }
        Ok(())
    }

    pub fn blocks(&self) -> Result<QueueBlocks<T>> {
        build_queue_blocks(self.lambda, self.b, self.r1, self.r2)
    }

    /// Mean upward drift in transactions per unit time, `lambda + r2*b`.
    pub fn up_drift(&self) -> T {
        self.lambda + self.r2 * T::from_count(self.b)
    }

    /// Mean downward drift while busy, `r1*b`.
    pub fn down_drift(&self) -> T {
        self.r1 * T::from_count(self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
}

/// Positive recurrence test `lambda + r2*b < r1*b`.
pub fn stability_check<T: Real>(qp: &QueueParams<T>) -> Stability {
    if qp.up_drift() < qp.down_drift() {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

/// Mean-drift quantities of the busy-level phase process.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanDrift<T> {
    /// Stationary vector of `down + local + up`.
    pub phase: Vec<T>,
    /// `phase * up * 1`.
    pub up: T,
    /// `phase * down * 1`.
    pub down: T,
}

impl<T: Real> MeanDrift<T> {
    pub fn compute(blocks: &QueueBlocks<T>) -> Result<Self> {
        let phase = null_vector_left(&blocks.phase_generator(), "phase generator")?;
        let flow = |m: &DenseMatrix<T>| m.vec_mul(&phase).into_iter().sum::<T>();
        Ok(Self {
            up: flow(&blocks.up),
            down: flow(&blocks.down),
            phase,
        })
    }
}

/// Successive approximations `R_{n+1} = (R_n^2 A2 + A0)(-A1)^{-1}` from `R_0 = 0`.
///
/// The iterates increase entrywise to the minimal nonnegative solution of
/// `R^2 A2 + R A1 + A0 = 0`.
#[derive(Debug, Clone)]
pub struct RateMatrixIter<T> {
    up: DenseMatrix<T>,
    down: DenseMatrix<T>,
    neg_local_inv: DenseMatrix<T>,
    current: DenseMatrix<T>,
}

impl<T: Real> RateMatrixIter<T> {
    pub fn new(blocks: &QueueBlocks<T>) -> Result<Self> {
        let lu: Lu<T> = blocks.local.scale(-T::one()).lu()?;
        let b = blocks.batch();
        Ok(Self {
            up: blocks.up.clone(),
            down: blocks.down.clone(),
            neg_local_inv: lu.inverse(),
            current: DenseMatrix::zeros(b, b),
        })
    }

    pub fn current(&self) -> &DenseMatrix<T> {
        &self.current
    }
}

impl<T: Real> Iterator for RateMatrixIter<T> {
    type Item = DenseMatrix<T>;

    fn next(&mut self) -> Option<Self::Item> {
        let r = &self.current;
        let next = r
            .matmul(r)
            .matmul(&self.down)
            .add(&self.up)
            .matmul(&self.neg_local_inv);
        self.current = next.clone();
        Some(next)
    }
}

/// Converged rate matrix and its iteration record.
#[derive(Debug, Clone)]
pub struct RateMatrix<T> {
    pub r: DenseMatrix<T>,
    pub iterations: usize,
    /// `||R_n - R_{n-1}||` at the last step (max-entry norm).
    pub last_delta: T,
    /// Every step was entrywise nondecreasing.
    pub monotone: bool,
}

impl<T: Real> RateMatrix<T> {
    /// `||R^2 A2 + R A1 + A0||_inf`.
    pub fn residual(&self, blocks: &QueueBlocks<T>) -> T {
        let r = &self.r;
        r.matmul(r)
            .matmul(&blocks.down)
            .add(&r.matmul(&blocks.local))
            .add(&blocks.up)
            .norm_inf()
    }
}

/// Runs [`RateMatrixIter`] until `||R_{n+1} - R_n|| < epsilon` without
/// checking stability.
pub fn rate_matrix_from_blocks<T: Real>(
    blocks: &QueueBlocks<T>,
    epsilon: T,
    max_iter: usize,
) -> Result<RateMatrix<T>> {
    if !(epsilon > T::zero()) {
        return Err(invalid("epsilon", "must be positive"));
    }
    let mut iter = RateMatrixIter::new(blocks)?;
    let mut prev = iter.current().clone();
    let mut monotone = true;
    let mut delta = T::infinity();
    // one ulp-scale slack for rounding in the monotonicity record
    let slack = T::epsilon() * T::lit(16.0);
    for n in 1..=max_iter {
        let next = iter.next().expect("infinite iterator");
        let diff = next.sub(&prev);
        delta = diff.max_abs();
        if diff.min_entry() < -slack * next.max_abs().max(T::one()) {
            monotone = false;
        }
        if !delta.is_finite() {
            break;
        }
        if delta < epsilon {
            return Ok(RateMatrix {
                r: next,
                iterations: n,
                last_delta: delta,
                monotone,
            });
        }
        prev = next;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_delta: delta.to_f64_lossy(),
    })
}

/// Rate matrix of a stable queue; unstable parameters are refused.
pub fn iterate_rate_matrix<T: Real>(qp: &QueueParams<T>, epsilon: T, max_iter: usize) -> Result<RateMatrix<T>> {
    qp.validate()?;
    if stability_check(qp) == Stability::Unstable {
        return Err(Error::Unstable {
            up_drift: qp.up_drift().to_f64_lossy(),
            down_drift: qp.down_drift().to_f64_lossy(),
        });
    }
    rate_matrix_from_blocks(&qp.blocks()?, epsilon, max_iter)
}

/// Stationary pool distribution and the derived system measures.
#[derive(Debug, Clone)]
pub struct QueueSolution<T> {
    pub params: QueueParams<T>,
    pub r: DenseMatrix<T>,
    /// Idle level: pool sizes `0..b`.
    pub omega0: Vec<T>,
    /// First busy level: pool sizes `b..2b`.
    pub omega1: Vec<T>,
    /// No package in the system, `omega0 * 1`.
    pub eta1: T,
    /// A package is in the system, `1 - eta1`.
    pub eta2: T,
    /// Block-pegging rate of the system, `eta2 * r1`.
    pub re1: T,
    /// Rollback rate of the system, `eta2 * r2`.
    pub re2: T,
    /// Transactions committed per unit time, `re1 * b`.
    pub throughput: T,
    pub iterations: usize,
    pub last_delta: T,
}

/// Solves the boundary equations for `omega0`, `omega1` given `R`.
pub fn queue_stationary<T: Real>(qp: &QueueParams<T>, rate: &RateMatrix<T>) -> Result<QueueSolution<T>> {
    let blocks = qp.blocks()?;
    let b = qp.b;
    let r = &rate.r;
    let id = DenseMatrix::identity(b);
    let tail_sum = id
        .sub(r)
        .lu()
        .map_err(|_| Error::Singular {
            context: "I - R".into(),
        })?
        .solve(&vec![T::one(); b]);

    // [omega0 omega1] * [[B, A0], [A2, A1 + R A2]] = 0 with the first
    // column replaced by the normalization weights.
    let mut m = DenseMatrix::zeros(2 * b, 2 * b);
    m.set_block(0, 0, &blocks.boundary);
    m.set_block(0, b, &blocks.up);
    m.set_block(b, 0, &blocks.down);
    m.set_block(b, b, &blocks.local.add(&r.matmul(&blocks.down)));
    for i in 0..b {
        m[(i, 0)] = T::one();
        m[(b + i, 0)] = tail_sum[i];
    }
    let mut rhs = vec![T::zero(); 2 * b];
    rhs[0] = T::one();
    let x = m
        .lu()
        .map_err(|_| Error::Singular {
            context: "boundary equations".into(),
        })?
        .solve_left(&rhs);
    let (omega0, omega1) = (x[..b].to_vec(), x[b..].to_vec());
    let eta1: T = omega0.iter().copied().sum();
    let eta2 = T::one() - eta1;
    let re1 = eta2 * qp.r1;
    Ok(QueueSolution {
        params: *qp,
        r: r.clone(),
        omega0,
        omega1,
        eta1,
        eta2,
        re1,
        re2: eta2 * qp.r2,
        throughput: re1 * T::from_count(b),
        iterations: rate.iterations,
        last_delta: rate.last_delta,
    })
}

impl<T: Real> QueueSolution<T> {
    /// Level vector `omega_k` (`k = 0` is the idle level).
    pub fn level(&self, k: usize) -> Vec<T> {
        match k {
            0 => self.omega0.clone(),
            _ => (1..k).fold(self.omega1.clone(), |v, _| self.r.vec_mul(&v)),
        }
    }

    /// Levels `omega_0, omega_1, ...` up to the first level whose mass is
    /// below `tail_tol`, capped at `max_levels`.
    pub fn truncated_levels(&self, tail_tol: T, max_levels: usize) -> Vec<Vec<T>> {
        let mut out = vec![self.omega0.clone()];
        let mut v = self.omega1.clone();
        while out.len() < max_levels {
            let mass: T = v.iter().copied().sum();
            out.push(v.clone());
            if mass < tail_tol {
                break;
            }
            v = self.r.vec_mul(&v);
        }
        out
    }

    /// Mean pool size `sum_i i * omega_i`.
    pub fn mean_pool_size(&self) -> Result<T> {
        let b = self.params.b;
        let id = DenseMatrix::identity(b);
        let lu = id.sub(&self.r).lu()?;
        let ones = vec![T::one(); b];
        let s1 = lu.solve(&ones);
        let s2 = lu.solve(&s1);
        let phases: Vec<T> = (0..b).map(T::from_count).collect();
        let s_phase = lu.solve(&phases);
        let dot = |a: &[T], c: &[T]| a.iter().zip(c).map(|(&x, &y)| x * y).sum::<T>();
        let bt = T::from_count(b);
        let idle = dot(&self.omega0, &phases);
        // k-th busy level (k >= 1) holds k*b + j transactions; sum_k k R^{k-1} = (I-R)^{-2}
        Ok(idle + bt * dot(&self.omega1, &s2) + dot(&self.omega1, &s_phase))
    }
}

/// Throughput `re1 * b`, checked against the flow balance `lambda + b*r2`.
pub fn throughput<T: Real>(qp: &QueueParams<T>, sol: &QueueSolution<T>) -> Result<T> {
    let th = sol.throughput;
    let balance = qp.up_drift();
    let rel = T::lit(FLOW_BALANCE_TOL).max(T::lit(1e3) * T::epsilon());
    let tol = rel * balance.max(T::one());
    if (th - balance).abs() > tol {
        return Err(Error::Inconsistent(format!(
            "throughput {th} differs from lambda + b*r2 = {balance}"
        )));
    }
    Ok(th)
}

/// Full pipeline: stability, rate matrix, boundary solve, throughput check.
pub fn solve_queue<T: Real>(qp: &QueueParams<T>, epsilon: T, max_iter: usize) -> Result<QueueSolution<T>> {
    let rate = iterate_rate_matrix(qp, epsilon, max_iter)?;
    let sol = queue_stationary(qp, &rate)?;
    throughput(qp, &sol)?;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stability_examples() {
        let qp = QueueParams::<f64>::new(1.0, 50, 0.7, 0.1).unwrap();
        assert_eq!(stability_check(&qp), Stability::Stable);
        let qp = QueueParams::<f64>::new(1.0, 10, 0.1, 0.1).unwrap();
        assert_eq!(stability_check(&qp), Stability::Unstable);
        // lambda + r2 b == r1 b exactly
        let qp = QueueParams::<f64>::new(2.0, 4, 1.0, 0.5).unwrap();
        assert_eq!(qp.up_drift(), qp.down_drift());
        assert_eq!(stability_check(&qp), Stability::Unstable);
    }

    #[test]
    fn zero_up_flow_gives_zero_rate_matrix() {
        let z = DenseMatrix::<f64>::zeros(2, 2);
        let blocks = QueueBlocks {
            boundary: z.clone(),
            up: z.clone(),
            local: DenseMatrix::from_rows(&[vec![-1.0, 0.5], vec![0.0, -1.0]]),
            down: DenseMatrix::from_diagonal(&[1.0, 1.0]),
        };
        let rm = rate_matrix_from_blocks(&blocks, 1e-12, 10).unwrap();
        assert_eq!(rm.iterations, 1);
        assert_eq!(rm.r, z);
    }

    #[test]
    fn scalar_case_has_closed_form_root() {
        // r1 R^2 - (lambda + r1 + r2) R + (lambda + r2) = 0, minimal root (lambda + r2) / r1
        let qp = QueueParams::<f64>::new(0.2, 1, 0.7, 0.1).unwrap();
        let rm = iterate_rate_matrix(&qp, 1e-14, 100_000).unwrap();
        assert!((rm.r[(0, 0)] - 3.0 / 7.0).abs() < 1e-12);
        assert!(rm.monotone);
    }

    #[test]
    fn unstable_parameters_are_refused() {
        let qp = QueueParams::<f64>::new(1.0, 10, 0.1, 0.1).unwrap();
        assert!(matches!(
            iterate_rate_matrix(&qp, 1e-12, 1000),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn non_convergence_is_reported() {
        let qp = QueueParams::<f64>::new(1.0, 4, 0.7, 0.1).unwrap();
        assert!(matches!(
            iterate_rate_matrix(&qp, 1e-12, 3),
            Err(Error::NoConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn drift_witness_is_uniform() {
        let blocks = build_queue_blocks(1.0f64, 7, 0.7, 0.1).unwrap();
        let drift = MeanDrift::compute(&blocks).unwrap();
        for &x in &drift.phase {
            assert!((x - 1.0 / 7.0).abs() < 1e-12);
        }
        assert!((drift.up - (1.0 + 0.7) / 7.0).abs() < 1e-12);
        assert!((drift.down - 0.7).abs() < 1e-12);
    }

    #[test]
    fn paper_point_matches_drift_identity() {
        let qp = QueueParams::<f64>::new(1.0, 50, 0.7, 0.1).unwrap();
        let sol = solve_queue(&qp, 1e-12, 1_000_000).unwrap();
        assert!((sol.eta2 - 6.0 / 35.0).abs() < 1e-8);
        assert!((sol.throughput - 6.0).abs() < 1e-8);
        assert!((sol.eta1 + sol.eta2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mean_pool_size_matches_truncated_sum() {
        let qp = QueueParams::<f64>::new(0.9, 3, 0.7, 0.1).unwrap();
        let sol = solve_queue(&qp, 1e-14, 1_000_000).unwrap();
        let levels = sol.truncated_levels(1e-16, 100_000);
        let direct: f64 = levels
            .iter()
            .enumerate()
            .flat_map(|(k, v)| v.iter().enumerate().map(move |(j, &w)| (k * 3 + j) as f64 * w))
            .sum();
        assert!((sol.mean_pool_size().unwrap() - direct).abs() < 1e-9);
    }
}
