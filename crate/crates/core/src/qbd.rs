//! Stationary distribution of the voting chain by UL-type RG-factorization.
//!
//! Levels are indexed `0` (boundary), `1` (node count `3L`), ..., up to the
//! top level `3N+2`. The U-measure is built backward from the top level,
//!
//! ```text
//! U_top = Q1(top)
//! U_i   = Q1(i) + Q0(i) (-U_{i+1})^{-1} Q2(i+1)
//! ```
//!
//! and the R- and G-measures follow as `R_i = Q0(i) (-U_{i+1})^{-1}` and
//! `G_i = (-U_i)^{-1} Q2(i)`. The boundary vector solves `v0 U_0 = 0`, and
//! each level is the previous one times its R-measure.

use crate::error::{Error, Result};
use crate::generator::BlockGenerator;
use crate::linalg::{norm_max, DenseMatrix, SparseMatrix};
use crate::model::VotingState;
use crate::scalar::Real;

/// Largest state count [`dense_oracle`] accepts.
pub const DENSE_ORACLE_LIMIT: usize = 20_000;

/// U-, R- and G-measures, indexed by level index.
#[derive(Debug, Clone)]
pub struct RgFactors<T> {
    /// `u[i]` for every level.
    pub u: Vec<DenseMatrix<T>>,
    /// `r[i]` maps level `i` to `i + 1`; there is none for the top level.
    pub r: Vec<DenseMatrix<T>>,
    /// `g[i]` maps level `i` to `i - 1`; `g[0]` is an empty placeholder.
    pub g: Vec<DenseMatrix<T>>,
}

pub fn compute_rg_factors<T: Real>(gen: &BlockGenerator<T>) -> Result<RgFactors<T>> {
    let levels = gen.num_levels();
    let top = levels - 1;
    let mut u: Vec<Option<DenseMatrix<T>>> = vec![None; levels];
    let mut r: Vec<Option<DenseMatrix<T>>> = vec![None; top];
    let mut g: Vec<DenseMatrix<T>> = vec![DenseMatrix::zeros(0, 0); levels];

    let mut u_next = gen.local(top);
    let mut neg_lu = factor_neg(&u_next, top)?;
    g[top] = neg_lu.solve_matrix(&gen.down(top));
    for i in (0..top).rev() {
        // R_i = Q0(i) (-U_{i+1})^{-1}, i.e. R_i (-U_{i+1}) = Q0(i)
        let r_i = neg_lu.solve_matrix_left(&gen.up(i));
        let u_i = gen.local(i).add(&r_i.matmul(&gen.down(i + 1)));
        u[i + 1] = Some(u_next);
        r[i] = Some(r_i);
        u_next = u_i;
        if i > 0 {
            neg_lu = factor_neg(&u_next, i)?;
            g[i] = neg_lu.solve_matrix(&gen.down(i));
        }
    }
    u[0] = Some(u_next);
    Ok(RgFactors {
        u: u.into_iter().map(|m| m.expect("every level visited")).collect(),
        r: r.into_iter().map(|m| m.expect("every level visited")).collect(),
        g,
    })
}

fn factor_neg<T: Real>(u: &DenseMatrix<T>, level: usize) -> Result<crate::linalg::Lu<T>> {
    u.scale(-T::one()).lu().map_err(|_| Error::Singular {
        context: format!("U-measure at level index {level}"),
    })
}

/// Stationary probabilities of the voting chain, in state-space order.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryVotingDistribution<T> {
    pub pi: Vec<T>,
    /// Ordinal ranges of each level, copied from the state space.
    pub level_ranges: Vec<std::ops::Range<usize>>,
}

impl<T: Real> StationaryVotingDistribution<T> {
    pub fn level(&self, i: usize) -> &[T] {
        &self.pi[self.level_ranges[i].clone()]
    }

    pub fn total(&self) -> T {
        self.pi.iter().copied().sum()
    }

    /// `||pi Q||_inf`.
    pub fn residual(&self, q: &SparseMatrix<T>) -> T {
        norm_max(&q.vec_mul(&self.pi))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.pi
            .iter()
            .zip(&other.pi)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Writes `n,m,k,pi` rows with a header.
    pub fn write_csv<W: std::io::Write>(&self, states: &[VotingState], mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,m,k,pi")?;
        for (s, p) in states.iter().zip(&self.pi) {
            writeln!(w, "{},{},{},{}", s.n, s.m, s.k, p)?;
        }
        Ok(())
    }
}

fn ranges<T: Real>(gen: &BlockGenerator<T>) -> Vec<std::ops::Range<usize>> {
    (0..gen.num_levels()).map(|i| gen.space().level_range(i)).collect()
}

/// Stationary vector from the RG-factors.
pub fn stationary_distribution<T: Real>(
    gen: &BlockGenerator<T>,
    factors: &RgFactors<T>,
) -> Result<StationaryVotingDistribution<T>> {
    let v0 = null_vector_left(&factors.u[0], "censored boundary generator")?;
    let mut pi = Vec::with_capacity(gen.len());
    pi.extend_from_slice(&v0);
    let mut current = v0;
    for r in &factors.r {
        current = r.vec_mul(&current);
        pi.extend_from_slice(&current);
    }
    let total: T = pi.iter().copied().sum();
    if !(total > T::zero()) || !total.is_finite() {
        return Err(Error::Inconsistent(format!("unnormalizable mass {total}")));
    }
    for x in &mut pi {
        *x /= total;
    }
    Ok(StationaryVotingDistribution {
        pi,
        level_ranges: ranges(gen),
    })
}

/// Convenience: factorize and solve.
pub fn solve<T: Real>(gen: &BlockGenerator<T>) -> Result<StationaryVotingDistribution<T>> {
    let factors = compute_rg_factors(gen)?;
    stationary_distribution(gen, &factors)
}

/// Normalized `x` with `x A = 0`, `x 1 = 1` for a conservative generator `A`.
///
/// The last balance equation is replaced by the normalization row.
pub fn null_vector_left<T: Real>(a: &DenseMatrix<T>, what: &str) -> Result<Vec<T>> {
    let n = a.rows();
    let mut m = a.clone();
    for i in 0..n {
        m[(i, n - 1)] = T::one();
    }
    let mut rhs = vec![T::zero(); n];
    rhs[n - 1] = T::one();
    let lu = m.lu().map_err(|_| Error::Singular {
        context: what.to_string(),
    })?;
    Ok(lu.solve_left(&rhs))
}

/// Direct dense solve of `pi Q = 0`, `pi 1 = 1`.
pub fn dense_oracle<T: Real>(gen: &BlockGenerator<T>) -> Result<StationaryVotingDistribution<T>> {
    if gen.len() > DENSE_ORACLE_LIMIT {
        return Err(Error::SizeCap {
            states: gen.len(),
            cap: DENSE_ORACLE_LIMIT,
        });
    }
    let pi = null_vector_left(&gen.matrix().to_dense(), "dense generator")?;
    Ok(StationaryVotingDistribution {
        pi,
        level_ranges: ranges(gen),
    })
}

/// Power iteration on the uniformized chain `P = I + Q / Lambda`.
///
/// Slow, but independent of any factorization. Stops once successive
/// iterates differ by less than `tol` in the max norm.
pub fn uniformized_power<T: Real>(
    gen: &BlockGenerator<T>,
    tol: T,
    max_iter: usize,
) -> Result<StationaryVotingDistribution<T>> {
    let q = gen.matrix();
    let n = gen.len();
    let lambda = gen
        .diagonal()
        .iter()
        .fold(T::zero(), |m, d| m.max(d.abs()))
        * T::lit(1.05);
    let mut x = vec![T::one() / T::from_count(n); n];
    let mut delta = T::infinity();
    for _ in 0..max_iter {
        let flow = q.vec_mul(&x);
        let next: Vec<T> = x.iter().zip(&flow).map(|(&a, &f)| a + f / lambda).collect();
        let s: T = next.iter().copied().sum();
        delta = x
            .iter()
            .zip(&next)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b / s).abs()));
        x = next.into_iter().map(|v| v / s).collect();
        if delta < tol {
            return Ok(StationaryVotingDistribution {
                pi: x,
                level_ranges: ranges(gen),
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_delta: delta.to_f64_lossy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::build_voting_generator;
    use crate::model::ModelParams;

    fn gen(p: f64) -> BlockGenerator<f64> {
        build_voting_generator(&ModelParams::new(1.0, 1.0, 10.0, 1.0, p, 1, 1).unwrap()).unwrap()
    }

    #[test]
    fn two_state_null_vector() {
        let (a, b) = (0.3f64, 1.7);
        let q = DenseMatrix::from_rows(&[vec![-a, a], vec![b, -b]]);
        let pi = null_vector_left(&q, "two-state").unwrap();
        assert!((pi[0] - b / (a + b)).abs() < 1e-15);
        assert!((pi[1] - a / (a + b)).abs() < 1e-15);
    }

    #[test]
    fn g_measures_are_stochastic() {
        let g = gen(0.7);
        let f = compute_rg_factors(&g).unwrap();
        for gi in &f.g[1..] {
            for s in gi.row_sums() {
                assert!((s - 1.0).abs() < 1e-8);
            }
        }
        for ri in &f.r {
            assert!(ri.min_entry() >= 0.0);
        }
    }

    #[test]
    fn censored_boundary_generator_is_conservative() {
        let f = compute_rg_factors(&gen(0.7)).unwrap();
        for s in f.u[0].row_sums() {
            assert!(s.abs() < 1e-10);
        }
        for ui in &f.u {
            for i in 0..ui.rows() {
                assert!(ui[(i, i)] < 0.0);
            }
        }
    }

    #[test]
    fn rg_matches_dense_and_power_iteration() {
        let g = gen(0.7);
        let rg = solve(&g).unwrap();
        let dense = dense_oracle(&g).unwrap();
        assert!(rg.max_abs_diff(&dense) < 1e-10);
        assert!(rg.residual(g.matrix()) < 1e-10);
        assert!((rg.total() - 1.0).abs() < 1e-12);
        let power = uniformized_power(&g, 1e-13, 5_000_000).unwrap();
        assert!(rg.max_abs_diff(&power) < 1e-8);
    }

    #[test]
    fn csv_dump_has_one_row_per_state() {
        let g = gen(0.5);
        let pi = solve(&g).unwrap();
        let mut buf = Vec::new();
        pi.write_csv(g.space().states(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), g.len() + 1);
        assert!(text.starts_with("n,m,k,pi\n0,0,0,"));
    }
}
