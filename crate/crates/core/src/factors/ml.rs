//! Gaussian maximum likelihood by alternating the two closed-form updates
//! Â = Σ^{1/2}Q(Λ_K − I)^{1/2} and Σ̂ = diag(Γ − ÂÂ′).

use super::{normalize_signs, Diagnostics, FactorModel, Method};
use crate::error::{invalid, Error, Result};
use crate::moments::sym_eigen;
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Lower bound on an idiosyncratic variance.
pub const SIGMA_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MlInit {
    /// Σ⁰ = diag(Γ)/2.
    #[default]
    HalfDiagonal,
    /// Σ⁰ = diag(Γ).
    Diagonal,
    Custom(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlOptions {
    /// Stop when consecutive log-likelihoods differ by less than this.
    pub tol: f64,
    pub max_iter: usize,
    pub init: MlInit,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 5000, init: MlInit::HalfDiagonal }
    }
}

#[derive(Clone, Debug)]
pub struct MlFit<R: Real> {
    pub a: DMatrix<R>,
    pub sigma: DVector<R>,
    pub log_likelihood: f64,
    /// Log-likelihood after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// 0-based components whose variance sits on [`SIGMA_FLOOR`].
    pub heywood: Vec<usize>,
}

/// Gaussian log-likelihood per observation of a zero-mean sample with
/// covariance Γ under Σ_y = AA′ + diag(σ):
/// −½[N log 2π + log|Σ_y| + tr(Σ_y⁻¹Γ)].
pub fn log_likelihood<R: Real>(a: &DMatrix<R>, sigma: &DVector<R>, gamma0: &DMatrix<R>) -> Result<f64> {
    let n = gamma0.nrows();
    let cov = a * a.transpose() + DMatrix::from_diagonal(sigma);
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Singular("implied covariance is not positive definite".into()))?;
    let logdet: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.as_f64().ln()).sum();
    let trace = chol.solve(gamma0).trace().as_f64();
    Ok(-0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + trace))
}

pub fn fit_ml<R: Real>(gamma0: &DMatrix<R>, k: usize, opts: &MlOptions) -> Result<MlFit<R>> {
    let n = gamma0.nrows();
    if gamma0.ncols() != n {
        return Err(Error::Dimension("Γ(0) must be square".into()));
    }
    if k == 0 || k >= n {
        return Err(invalid(format!("need 0 < K < N, got K = {k}, N = {n}")));
    }
    if opts.max_iter == 0 {
        return Err(invalid("max_iter must be positive"));
    }
    let eig = sym_eigen(gamma0)?;
    if eig.eigenvalues[n - 1] <= R::zero() {
        return Err(Error::Singular("Γ(0) is not positive definite".into()));
    }
    let floor = R::lit(SIGMA_FLOOR);
    let mut sigma: DVector<R> = match &opts.init {
        MlInit::HalfDiagonal => gamma0.diagonal() * R::lit(0.5),
        MlInit::Diagonal => gamma0.diagonal(),
        MlInit::Custom(v) => {
            if v.len() != n || v.iter().any(|x| !(*x > 0.0)) {
                return Err(invalid("custom start needs N positive variances"));
            }
            DVector::from_iterator(n, v.iter().map(|x| R::lit(*x)))
        }
    };
    sigma.apply(|s| *s = s.max(floor));

    let mut trace: Vec<f64> = Vec::new();
    let mut a = DMatrix::zeros(n, k);
    let mut converged = false;
    let mut heywood = Vec::new();
    for _ in 0..opts.max_iter {
        let (mut next_a, mut next_sigma, mut ll) = ml_step(gamma0, &sigma, k)?;
        // Near a boundary the updates shrink a variance only geometrically
        // slowly. Try the floor directly and keep it if the likelihood holds.
        let small: Vec<usize> =
            (0..n).filter(|&i| next_sigma[i] > floor && next_sigma[i] < R::lit(1e-3) * gamma0[(i, i)]).collect();
        if !small.is_empty() {
            let mut trial = next_sigma.clone();
            for &i in &small {
                trial[i] = floor;
            }
            let (ta, ts, tll) = ml_step(gamma0, &trial, k)?;
            if tll >= ll {
                (next_a, next_sigma, ll) = (ta, ts, tll);
            }
        }
        a = next_a;
        sigma = next_sigma;
        heywood = (0..n).filter(|&i| sigma[i] <= floor).collect();
        let done = trace.last().is_some_and(|prev| (ll - prev).abs() < opts.tol);
        trace.push(ll);
        if done {
            converged = true;
            break;
        }
    }
    let mut empty = DMatrix::zeros(0, 0);
    normalize_signs(&mut a, &mut empty);
    Ok(MlFit {
        a,
        sigma,
        log_likelihood: *trace.last().expect("at least one iteration"),
        iterations: trace.len(),
        converged,
        heywood,
        trace,
    })
}

/// One pass of the two closed-form updates from the variances `sigma`.
fn ml_step<R: Real>(gamma0: &DMatrix<R>, sigma: &DVector<R>, k: usize) -> Result<(DMatrix<R>, DVector<R>, f64)> {
    let n = gamma0.nrows();
    let floor = R::lit(SIGMA_FLOOR);
    let root = sigma.map(|s| s.sqrt());
    let inv_root = root.map(|s| R::one() / s);
    let scaled = DMatrix::from_fn(n, n, |i, j| gamma0[(i, j)] * inv_root[i] * inv_root[j]);
    let e = sym_eigen(&scaled)?;
    let mut a = DMatrix::zeros(n, k);
    for c in 0..k {
        let gain = (e.eigenvalues[c] - R::one()).max(R::zero()).sqrt();
        for i in 0..n {
            a[(i, c)] = root[i] * e.eigenvectors[(i, c)] * gain;
        }
    }
    let common = &a * a.transpose();
    let next = DVector::from_fn(n, |i, _| (gamma0[(i, i)] - common[(i, i)]).max(floor));
    let ll = log_likelihood(&a, &next, gamma0)?;
    Ok((a, next, ll))
}

/// Maximum-likelihood factor model from Γ(0). The returned model has no
/// scores; attach them with [`FactorModel::with_scores`].
pub fn estimate_ml<R: Real>(gamma0: &DMatrix<R>, k: usize, opts: &MlOptions) -> Result<FactorModel<R>> {
    let fit = fit_ml(gamma0, k, opts)?;
    if !fit.converged {
        log::warn!("maximum likelihood stopped after {} iterations without converging", fit.iterations);
    }
    if !fit.heywood.is_empty() {
        log::warn!("Heywood case in component(s) {:?}", fit.heywood);
    }
    let diagnostics = Diagnostics {
        log_likelihood: Some(fit.log_likelihood),
        iterations: Some(fit.iterations),
        converged: fit.converged,
        heywood: fit.heywood,
        ..Default::default()
    };
    FactorModel::new(fit.a, DMatrix::zeros(k, 0), fit.sigma, Method::Ml, diagnostics)
}
