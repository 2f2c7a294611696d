//! Paired comparison of moment estimates with and without one additive
//! outlier, against the large-sample bias targets.

use super::replication_rng;
use crate::datamodel::MultiSeries;
use crate::error::{invalid, Error, Result};
use crate::moments::{dft, lag_cov};
use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    pub omega: Vec<f64>,
    /// 1-based outlier date.
    pub t0: usize,
    pub t: usize,
    pub replications: usize,
    pub seed: u64,
    /// Covariance of the white-noise panel; identity when absent.
    #[serde(default)]
    pub noise_cov: Option<Vec<Vec<f64>>>,
    /// Fourier index of the periodogram and smoothed-spectrum comparison;
    /// T/4 when absent.
    #[serde(default)]
    pub freq_index: Option<i64>,
    /// Daniell half-width of the smoothed spectrum.
    #[serde(default = "default_half_width")]
    pub half_width: usize,
}

fn default_half_width() -> usize {
    5
}

/// Monte Carlo mean of one scaled difference with its standard error and
/// target; for Γ(0) also the variance against the large-sample formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasEntry {
    pub r: usize,
    pub s: usize,
    pub mean: f64,
    pub se: f64,
    pub target: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub variance_target: Option<f64>,
}

impl BiasEntry {
    /// |mean − target| in standard errors (0 when both vanish).
    pub fn mean_z(&self) -> f64 {
        z_score(self.mean - self.target, self.se)
    }

    pub fn variance_z(&self) -> Option<f64> {
        self.variance_target.map(|v| z_score(self.variance - v, self.variance_se))
    }
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff.abs() / se
    } else if diff.abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub replications: usize,
    pub t: usize,
    pub t0: usize,
    pub freq_index: i64,
    pub half_width: usize,
    /// T(γ̂_rs(0) − γ̃_rs(0)) against ω_rω_s.
    pub gamma0: Vec<BiasEntry>,
    /// T·Re(I_rs − Ĩ_rs) against ω_rω_s/2π.
    pub periodogram_re: Vec<BiasEntry>,
    /// T·Im(I_rs − Ĩ_rs) against 0.
    pub periodogram_im: Vec<BiasEntry>,
    /// T·Re(F̂_rs − F̃_rs) against ω_rω_s/2π.
    pub smoothed_re: Vec<BiasEntry>,
}

impl BiasReport {
    pub fn entries(&self) -> impl Iterator<Item = &BiasEntry> {
        self.gamma0.iter().chain(&self.periodogram_re).chain(&self.periodogram_im).chain(&self.smoothed_re)
    }
}

/// Per-replication scaled differences, flattened over pairs r ≤ s.
struct Draw {
    gamma0: Vec<f64>,
    per_re: Vec<f64>,
    per_im: Vec<f64>,
    smooth_re: Vec<f64>,
}

pub fn bias_experiment(cfg: &BiasConfig) -> Result<BiasReport> {
    let n = cfg.omega.len();
    let t = cfg.t;
    if n == 0 || t < 8 {
        return Err(invalid("need ω with at least one entry and T >= 8"));
    }
    if cfg.t0 < 1 || cfg.t0 > t {
        return Err(invalid(format!("t0 = {} outside 1..={t}", cfg.t0)));
    }
    if cfg.replications < 2 {
        return Err(invalid("need at least two replications"));
    }
    let j = cfg.freq_index.unwrap_or((t / 4) as i64);
    let m = cfg.half_width as i64;
    if j - m <= 0 || j + m >= (t as i64 + 1) / 2 {
        return Err(invalid(format!("window around index {j} must stay strictly inside (0, T/2)")));
    }
    let cov = match &cfg.noise_cov {
        None => DMatrix::identity(n, n),
        Some(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Dimension("noise covariance must be N×N".into()));
            }
            DMatrix::from_fn(n, n, |i, k| rows[i][k])
        }
    };
    let chol = cov.clone().cholesky().ok_or_else(|| invalid("noise covariance is not positive definite"))?;
    let l = chol.l();
    let omega = DVector::from_vec(cfg.omega.clone());
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|r| (r..n).map(move |s| (r, s))).collect();
    let tf = t as f64;

    let draws: Vec<Result<Draw>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(cfg.seed, rep as u64);
            let white = DMatrix::from_fn(n, t, |_, _| rng.sample::<f64, _>(StandardNormal));
            let clean = &l * white;
            let mut dirty = clean.clone();
            let mut col = dirty.column_mut(cfg.t0 - 1);
            col += &omega;
            let clean = MultiSeries::from_matrix(clean)?;
            let dirty = MultiSeries::from_matrix(dirty)?;

            let g_clean = lag_cov(&clean, 0)?;
            let g_dirty = lag_cov(&dirty, 0)?;
            let per = |s: &MultiSeries<f64>, k: i64| -> Result<DMatrix<Complex<f64>>> {
                let d = dft(s, k)?;
                Ok(&d * d.adjoint())
            };
            let i_dirty = per(&dirty, j)?;
            let i_clean = per(&clean, j)?;
            let mut f_dirty = DMatrix::zeros(n, n);
            let mut f_clean = DMatrix::zeros(n, n);
            for k in j - m..=j + m {
                f_dirty += per(&dirty, k)?;
                f_clean += per(&clean, k)?;
            }
            let width = (2 * m + 1) as f64;
            let mut draw = Draw { gamma0: vec![], per_re: vec![], per_im: vec![], smooth_re: vec![] };
            for &(r, s) in &pairs {
                draw.gamma0.push(tf * (g_dirty.gamma(0)[(r, s)] - g_clean.gamma(0)[(r, s)]));
                let di = i_dirty[(r, s)] - i_clean[(r, s)];
                draw.per_re.push(tf * di.re);
                draw.per_im.push(tf * di.im);
                draw.smooth_re.push(tf * (f_dirty[(r, s)] - f_clean[(r, s)]).re / width);
            }
            Ok(draw)
        })
        .collect();
    let draws: Vec<Draw> = draws.into_iter().collect::<Result<_>>()?;

    let entries = |pick: &dyn Fn(&Draw) -> &Vec<f64>, target: &dyn Fn(usize, usize) -> f64, var_target: bool| {
        pairs
            .iter()
            .enumerate()
            .map(|(p, &(r, s))| {
                let xs: Vec<f64> = draws.iter().map(|d| pick(d)[p]).collect();
                let moments = Moments::of(&xs);
                let variance_target = var_target.then(|| {
                    omega[s].powi(2) * cov[(r, r)] + omega[r].powi(2) * cov[(s, s)] + 2.0 * omega[r] * omega[s] * cov[(r, s)]
                });
                BiasEntry {
                    r: r + 1,
                    s: s + 1,
                    mean: moments.mean,
                    se: moments.se_mean,
                    target: target(r, s),
                    variance: moments.var,
                    variance_se: moments.se_var,
                    variance_target,
                }
            })
            .collect::<Vec<_>>()
    };
    let prod = |r: usize, s: usize| omega[r] * omega[s];
    let prod_2pi = |r: usize, s: usize| omega[r] * omega[s] / (2.0 * PI);
    Ok(BiasReport {
        replications: cfg.replications,
        t,
        t0: cfg.t0,
        freq_index: j,
        half_width: cfg.half_width,
        gamma0: entries(&|d| &d.gamma0, &prod, true),
        periodogram_re: entries(&|d| &d.per_re, &prod_2pi, false),
        periodogram_im: entries(&|d| &d.per_im, &|_, _| 0.0, false),
        smoothed_re: entries(&|d| &d.smooth_re, &prod_2pi, false),
    })
}

struct Moments {
    mean: f64,
    var: f64,
    se_mean: f64,
    se_var: f64,
}

impl Moments {
    /// Sample mean and variance with standard errors; the variance error
    /// uses the fourth central moment, √((m₄ − s⁴)/R).
    fn of(xs: &[f64]) -> Self {
        let r = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / r;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / r;
        Self { mean, var, se_mean: (var / r).sqrt(), se_var: ((m4 - var * var).max(0.0) / r).sqrt() }
    }
}
