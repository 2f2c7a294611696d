//! Data generators, the Monte Carlo harness, and the outlier-bias
//! experiment.
//!
//! Random streams: replication `r` of a run with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `r`, so results do not
//! depend on how replications are spread over threads. Gaussian variates
//! come from the ziggurat sampler of `rand_distr::StandardNormal`.

mod bias;
mod generate;
mod montecarlo;

pub use bias::{bias_experiment, BiasConfig, BiasEntry, BiasReport};
pub use generate::{
    gen_factors_var, gen_factors_varma, gen_finite_ma, gen_observed, innovation_variance, replication_rng,
    simulate_panel, standardize_rows,
};
pub use montecarlo::{
    monte_carlo, monte_carlo_with_threads, run_replications, run_replications_with_threads, summarize, BlockStat, DateSummary, MonteCarloSummary,
    ReplicationOutcome, SampleStat,
};

use crate::error::{invalid, Error, Result};
use crate::factors::{check_rank, decompose_true};
use crate::outliers::PipelineConfig;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Documented in run metadata.
pub const GAUSSIAN_METHOD: &str = "ziggurat (rand_distr::StandardNormal)";
pub const RNG_SCHEME: &str = "ChaCha8Rng::seed_from_u64(seed), stream = replication index";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnovationScaling {
    /// σ²_ε = (1 − φ²)/(1 + θ² − 2φθ): unit factor variance for ARMA(1,1).
    #[default]
    UnitVariance,
    /// σ²_ε = 1 − 2φθ + θ², the diagonal of I − ΘΦ′ − (Φ − Θ)Θ′.
    CovarianceDiagonal,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutlierSpec {
    pub omega: Vec<f64>,
    /// 1-based dates; several dates form a patch.
    pub dates: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub name: String,
    /// Loading matrix, one row per component.
    pub a: Vec<Vec<f64>>,
    /// Diagonal of Φ.
    pub phi: Vec<f64>,
    /// Diagonal of Θ; zeros give AR(1) factors.
    #[serde(default)]
    pub theta: Vec<f64>,
    pub t: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Idiosyncratic standard deviation.
    pub sigma_eta: f64,
    #[serde(default)]
    pub outlier: OutlierSpec,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub innovation: InnovationScaling,
    /// Rescale each simulated factor to unit sample standard deviation.
    #[serde(default)]
    pub standardize_factors: bool,
    #[serde(default)]
    pub pipeline: PipelineConfig,
}

fn default_burn_in() -> usize {
    100
}

impl SimConfig {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn k(&self) -> usize {
        self.phi.len()
    }

    pub fn a_matrix(&self) -> DMatrix<f64> {
        let k = self.k();
        DMatrix::from_fn(self.n(), k, |i, j| self.a[i][j])
    }

    pub fn theta_or_zero(&self) -> Vec<f64> {
        if self.theta.is_empty() {
            vec![0.0; self.k()]
        } else {
            self.theta.clone()
        }
    }

    pub fn omega(&self) -> DVector<f64> {
        if self.outlier.omega.is_empty() {
            DVector::zeros(self.n())
        } else {
            DVector::from_vec(self.outlier.omega.clone())
        }
    }

    /// Checks dimensions, stationarity, invertibility and rank(A) = K.
    pub fn validate(&self) -> Result<()> {
        let (n, k) = (self.n(), self.k());
        if k == 0 || n <= k {
            return Err(invalid(format!("need 0 < K < N, got K = {k}, N = {n}")));
        }
        if self.a.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension(format!("every row of A needs {k} entries")));
        }
        if !self.theta.is_empty() && self.theta.len() != k {
            return Err(Error::Dimension(format!("Θ has {} entries, K = {k}", self.theta.len())));
        }
        if self.phi.iter().any(|p| !(p.abs() < 1.0)) {
            return Err(invalid("Φ must be stationary (|φ| < 1)"));
        }
        if self.theta.iter().any(|p| !(p.abs() < 1.0)) {
            return Err(invalid("Θ must be invertible (|θ| < 1)"));
        }
        if self.burn_in < 100 {
            return Err(invalid(format!("burn-in {} below 100", self.burn_in)));
        }
        if self.t < 30 {
            return Err(invalid(format!("T = {} too short", self.t)));
        }
        if !(self.sigma_eta >= 0.0) {
            return Err(invalid("σ_η must be nonnegative"));
        }
        if self.replications == 0 {
            return Err(invalid("replications must be positive"));
        }
        if !self.outlier.omega.is_empty() && self.outlier.omega.len() != n {
            return Err(Error::Dimension(format!("ω has {} entries, N = {n}", self.outlier.omega.len())));
        }
        if self.outlier.dates.iter().any(|&d| d < 1 || d > self.t) {
            return Err(invalid(format!("outlier dates must lie in 1..={}", self.t)));
        }
        check_rank(&self.a_matrix())
    }

    /// True (α, ζ) split of ω against A.
    pub fn truth(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        decompose_true(&self.omega(), &self.a_matrix())
    }

    /// The preset with the given name.
    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "section7" => include_str!("../../fixtures/section7.json"),
            "section8-isolated" => include_str!("../../fixtures/section8_isolated.json"),
            "section8-patch" => include_str!("../../fixtures/section8_patch.json"),
            other => return Err(invalid(format!("unknown preset {other:?}"))),
        };
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub const PRESETS: [&'static str; 3] = ["section7", "section8-isolated", "section8-patch"];
}
