use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid simulation setting `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error(transparent)]
    Model(#[from] dpbft_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

/// Run length and seeding shared by all simulations.
///
/// Statistics are collected over `(warmup, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub horizon: f64,
    pub warmup: f64,
    pub replications: usize,
}

impl SimConfig {
    pub fn new(seed: u64, horizon: f64, warmup: f64, replications: usize) -> Result<Self> {
        let cfg = Self {
            seed,
            horizon,
            warmup,
            replications,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.warmup >= 0.0) || !self.warmup.is_finite() {
            return Err(invalid("warmup", format!("must be finite and >= 0, got {}", self.warmup)));
        }
        if !(self.horizon > self.warmup) || !self.horizon.is_finite() {
            return Err(invalid(
                "horizon",
                format!(
                    "must be finite and exceed warmup {}, got {} (empty measurement window)",
                    self.warmup, self.horizon
                ),
            ));
        }
        if self.replications == 0 {
            return Err(invalid("replications", "must be at least 1"));
        }
        Ok(())
    }

    /// Length of the measurement window.
    pub fn window(&self) -> f64 {
        self.horizon - self.warmup
    }

    /// Generator for replication `rep`.
    pub fn rng(&self, rep: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(rep as u64);
        rng
    }

    /// Runs `f` once per replication in parallel, returning results in
    /// replication order.
    pub(crate) fn run<R, F>(&self, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&mut ChaCha8Rng) -> R + Sync,
    {
        (0..self.replications)
            .into_par_iter()
            .map(|rep| f(&mut self.rng(rep)))
            .collect()
    }
}

/// Mean over replications with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(replications)`; zero for a
    /// single replication.
    pub std_err: f64,
    pub replications: usize,
}

impl SimEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_err = if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_err,
            replications: n,
        }
    }

    pub fn from_fn<R>(reps: &[R], f: impl Fn(&R) -> f64) -> Self {
        let xs: Vec<f64> = reps.iter().map(f).collect();
        Self::from_samples(&xs)
    }

    /// `|mean - reference|` in units of the standard error.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.mean - reference).abs() / self.std_err
    }

    /// Whether `reference` lies within `k` standard errors of the mean.
    pub fn covers(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.std_err
    }
}

/// Length of `[a, b]` inside `[lo, hi]`.
pub(crate) fn overlap(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    (b.min(hi) - a.max(lo)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn empty_window_is_rejected() {
        let err = SimConfig::new(1, 10.0, 10.0, 5).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "horizon", .. }));
        assert!(SimConfig::new(1, 10.0, -1.0, 5).is_err());
        assert!(SimConfig::new(1, 10.0, 0.0, 0).is_err());
        assert!(SimConfig::new(1, f64::INFINITY, 0.0, 1).is_err());
    }

    #[test]
    fn estimate_of_known_samples() {
        let e = SimEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.std_err - sd / 2.0).abs() < 1e-15);
        assert!(e.covers(2.5 + 2.9 * e.std_err, 3.0));
        assert!(!e.covers(2.5 + 3.1 * e.std_err, 3.0));
        assert_eq!(SimEstimate::from_samples(&[7.0]).std_err, 0.0);
    }

    #[test]
    fn streams_differ_and_repeat() {
        let cfg = SimConfig::new(42, 1.0, 0.0, 2).unwrap();
        let a: u64 = cfg.rng(0).random();
        let b: u64 = cfg.rng(1).random();
        assert_ne!(a, b);
        assert_eq!(a, cfg.rng(0).random::<u64>());
    }

    #[test]
    fn run_preserves_replication_order() {
        let cfg = SimConfig::new(3, 1.0, 0.0, 16).unwrap();
        let par = cfg.run(|rng| rng.random::<u32>());
        let seq: Vec<u32> = (0..16).map(|r| cfg.rng(r).random::<u32>()).collect();
        assert_eq!(par, seq);
    }

    #[test]
    fn overlap_clips_to_window() {
        assert_eq!(overlap(0.0, 1.0, 2.0, 3.0), 0.0);
        assert_eq!(overlap(1.5, 2.5, 2.0, 3.0), 0.5);
        assert_eq!(overlap(2.25, 2.5, 2.0, 3.0), 0.25);
        assert_eq!(overlap(2.5, 4.0, 2.0, 3.0), 0.5);
    }
}
