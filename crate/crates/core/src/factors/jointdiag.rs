//! Approximate joint diagonalization of lagged autocovariances.
//!
//! The search runs in two stages. The leading K eigenvectors U of
//! Σ_h (Γ̂_hΓ̂_h′ + Γ̂_h′Γ̂_h) fix a K-dimensional subspace; idiosyncratic noise
//! is serially uncorrelated, so these lagged products see only the common
//! part. Inside that subspace the symmetrized reduced matrices C_h are fitted
//! in the least-squares sense by M D_h M′ with D_h diagonal, alternating
//! between the columns of the K×K mixing matrix M (each a rank-one
//! eigenproblem) and the diagonals D_h (a linear solve). Then B = M⁻¹U′.
//!
//! Minimizing the off-diagonal mass of BΓ̂(h)B′ directly under per-row
//! variance constraints has degenerate minima: rows may collapse onto one
//! direction with little autocorrelation. The fitted form rules that out,
//! since a collapsed M cannot reproduce the C_h.

use super::{check_rank, normalize_signs, Diagnostics, FactorModel, Method};
use crate::datamodel::{center, MultiSeries};
use crate::error::{invalid, Error, Result};
use crate::moments::{sym_eigen, LagCovSet};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointDiagOptions {
    /// Largest lag H; defaults to K.
    pub lags: Option<usize>,
    /// Number of starts. Start 0 whitens and diagonalizes the first lag;
    /// the rest are random.
    pub restarts: usize,
    pub max_sweeps: usize,
    /// Stop when the least-squares misfit changes by less than this,
    /// relative to the squared size of the reduced lag matrices.
    pub tol: f64,
    pub seed: u64,
}

impl Default for JointDiagOptions {
    fn default() -> Self {
        Self { lags: None, restarts: 5, max_sweeps: 500, tol: 1e-12, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct JointDiagFit<R: Real> {
    /// K×N unmixing matrix, rows scaled to unit variance under Γ̂(0).
    pub b: DMatrix<R>,
    /// B′(BB′)⁻¹.
    pub a: DMatrix<R>,
    /// Σ_h Σ_{i≠j} (BΓ̂(h)B′)²_ij.
    pub objective: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Start that produced the fit.
    pub restart: usize,
    /// diag(BΓ̂(h)B′) for h = 1..=H.
    pub lag_diagonals: Vec<DVector<R>>,
}

/// Joint diagonalization from Γ̂(0) and the lagged matrices Γ̂(1..=H).
pub fn joint_diagonalize<R: Real>(
    gamma0: &DMatrix<R>,
    lagged: &[DMatrix<R>],
    k: usize,
    opts: &JointDiagOptions,
) -> Result<JointDiagFit<R>> {
    let n = gamma0.nrows();
    if k == 0 || k > n {
        return Err(invalid(format!("need 0 < K <= N, got K = {k}, N = {n}")));
    }
    if lagged.is_empty() {
        return Err(invalid("need at least one lagged covariance"));
    }
    if opts.restarts == 0 {
        return Err(invalid("need at least one start"));
    }
    if lagged.iter().any(|g| g.shape() != (n, n)) || gamma0.ncols() != n {
        return Err(Error::Dimension("covariance matrices must all be N×N".into()));
    }

    let mut m = DMatrix::zeros(n, n);
    for g in lagged {
        m += g * g.transpose() + g.transpose() * g;
    }
    let eig = sym_eigen(&m)?;
    let u = eig.eigenvectors.columns(0, k).into_owned();
    let c0 = u.transpose() * gamma0 * &u;
    let c0 = (&c0 + c0.transpose()) * R::lit(0.5);
    if c0.clone().cholesky().is_none() {
        return Err(Error::Estimation("reduced Γ̂(0) is not positive definite; try a larger H".into()));
    }
    let cs: Vec<DMatrix<R>> = lagged
        .iter()
        .map(|g| {
            let c = u.transpose() * g * &u;
            (&c + c.transpose()) * R::lit(0.5)
        })
        .collect();
    let scale: f64 = cs.iter().map(|c| c.norm_squared().as_f64()).sum::<f64>().max(f64::MIN_POSITIVE);

    let runs: Vec<Result<Run<R>>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let m0 = if r == 0 { whitened_lag_start(&c0, &cs[0])? } else { random_start(k, opts.seed, r as u64) };
            Ok(alternate_until_converged(m0, &cs, opts, scale))
        })
        .collect();

    let mut best: Option<(usize, DMatrix<R>, f64, usize, bool)> = None;
    for (r, run) in runs.into_iter().enumerate() {
        let (m, fit, sweeps, conv) = run?;
        if best.as_ref().is_none_or(|b| fit < b.2) {
            best = Some((r, m, fit, sweeps, conv));
        }
    }
    let (restart, mix, _, sweeps, converged) = best.expect("at least one start");
    let lost_rank = || Error::Estimation("unmixing matrix lost full row rank; try a larger H".into());
    if check_rank(&mix).is_err() {
        return Err(lost_rank());
    }
    let v = mix.try_inverse().ok_or_else(lost_rank)?;

    // Rows of B at unit variance under Γ̂(0).
    let mut b = &v * u.transpose();
    for i in 0..k {
        let row = b.row(i).transpose();
        let q = (row.transpose() * gamma0 * &row)[(0, 0)];
        if !(q > R::zero()) {
            return Err(lost_rank());
        }
        b.row_mut(i).scale_mut(R::one() / q.sqrt());
    }
    let bbt_inv = (&b * b.transpose()).try_inverse().ok_or_else(lost_rank)?;
    let a = b.transpose() * bbt_inv;
    if check_rank(&a).is_err() {
        return Err(lost_rank());
    }
    let objective = lagged.iter().map(|g| off_diagonal_sq(&(&b * g * b.transpose()))).sum();

    // Order factors by loading size, then fix signs.
    let norms: Vec<R> = (0..k).map(|c| a.column(c).norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    let mut a_sorted = DMatrix::zeros(n, k);
    let mut b_sorted = DMatrix::zeros(k, n);
    for (c, &i) in order.iter().enumerate() {
        a_sorted.set_column(c, &a.column(i));
        b_sorted.set_row(c, &b.row(i));
    }
    normalize_signs(&mut a_sorted, &mut b_sorted);

    let lag_diagonals = lagged.iter().map(|g| (&b_sorted * g * b_sorted.transpose()).diagonal()).collect();
    Ok(JointDiagFit { b: b_sorted, a: a_sorted, objective, sweeps, converged, restart, lag_diagonals })
}

/// Mixing matrix, misfit, sweeps, converged.
type Run<R> = (DMatrix<R>, f64, usize, bool);

fn off_diagonal_sq<R: Real>(d: &DMatrix<R>) -> f64 {
    let mut s = 0.0;
    for i in 0..d.nrows() {
        for j in (0..d.ncols()).filter(|&j| j != i) {
            s += d[(i, j)].as_f64().powi(2);
        }
    }
    s
}

/// Σ_h ‖C_h − M D_h M′‖²_F.
fn misfit<R: Real>(m: &DMatrix<R>, ds: &[DVector<R>], cs: &[DMatrix<R>]) -> f64 {
    cs.iter()
        .zip(ds)
        .map(|(c, d)| (c - m * DMatrix::from_diagonal(d) * m.transpose()).norm_squared().as_f64())
        .sum()
}

/// Whitening by C₀^{−1/2} followed by the eigenvectors of the whitened
/// first lag; exact when only one lag is informative.
fn whitened_lag_start<R: Real>(c0: &DMatrix<R>, c1: &DMatrix<R>) -> Result<DMatrix<R>> {
    let e = sym_eigen(c0)?;
    let floor = R::lit(f64::MIN_POSITIVE);
    let root = |p: R| -> DMatrix<R> {
        let d = e.eigenvalues.map(|l| l.max(floor).powf(p));
        &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.transpose()
    };
    let (w, w_inv) = (root(R::lit(-0.5)), root(R::lit(0.5)));
    let whitened = &w * c1 * &w;
    let q = sym_eigen(&((&whitened + whitened.transpose()) * R::lit(0.5)))?.eigenvectors;
    Ok(w_inv * q)
}

fn random_start<R: Real>(k: usize, seed: u64, stream: u64) -> DMatrix<R> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    DMatrix::from_fn(k, k, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        R::lit(z)
    })
}

/// Least-squares diagonals given M: (M′M ∘ M′M) d_h = diag(M′C_hM).
fn update_diagonals<R: Real>(m: &DMatrix<R>, cs: &[DMatrix<R>]) -> Option<Vec<DVector<R>>> {
    let g = m.transpose() * m;
    let lu = g.component_mul(&g).lu();
    cs.iter().map(|c| lu.solve(&(m.transpose() * c * m).diagonal())).collect()
}

fn alternate_until_converged<R: Real>(
    mut m: DMatrix<R>,
    cs: &[DMatrix<R>],
    opts: &JointDiagOptions,
    scale: f64,
) -> Run<R> {
    let k = m.nrows();
    let Some(mut ds) = update_diagonals(&m, cs) else {
        return (m, f64::INFINITY, 0, false);
    };
    let mut fit = misfit(&m, &ds, cs);
    for sweep in 1..=opts.max_sweeps {
        for l in 0..k {
            // Residual without column l, weighted by that column's diagonals.
            let mut p = DMatrix::zeros(k, k);
            let mut dd = R::zero();
            for (c, d) in cs.iter().zip(&ds) {
                let mut rest = c.clone();
                for j in (0..k).filter(|&j| j != l) {
                    let col = m.column(j);
                    rest -= col * col.transpose() * d[j];
                }
                p += rest * d[l];
                dd += d[l] * d[l];
            }
            if !(dd > R::zero()) {
                continue;
            }
            let Ok(e) = sym_eigen(&((&p + p.transpose()) * R::lit(0.5))) else { continue };
            let mu = e.eigenvalues[0];
            if mu > R::zero() {
                m.set_column(l, &(e.vector(0) * (mu / dd).sqrt()));
            }
        }
        let Some(next_ds) = update_diagonals(&m, cs) else { break };
        ds = next_ds;
        let next = misfit(&m, &ds, cs);
        let change = (fit - next).abs();
        fit = next;
        if change < opts.tol * scale || fit <= f64::MIN_POSITIVE {
            return (m, fit, sweep, true);
        }
    }
    (m, fit, opts.max_sweeps, false)
}

/// Joint-diagonalization estimate of the factor model. Scores are B̂Y on
/// the panel centered by its own mean.
pub fn estimate_jointdiag<R: Real>(
    series: &MultiSeries<R>,
    covs: &LagCovSet<R>,
    k: usize,
    opts: &JointDiagOptions,
) -> Result<FactorModel<R>> {
    let n = series.n();
    if k == 0 || k >= n {
        return Err(invalid(format!("K = {k} must satisfy 0 < K < N = {n}")));
    }
    let h = opts.lags.unwrap_or(k);
    if h < k {
        return Err(invalid(format!("H = {h} must be at least K = {k}")));
    }
    if covs.max_lag() < h {
        return Err(invalid(format!("covariances reach lag {}, need H = {h}", covs.max_lag())));
    }
    let fit = joint_diagonalize(covs.gamma(0), &covs.gammas()[1..=h], k, opts)?;
    let (centered, _) = center(series);
    let x = &fit.b * centered.values();
    let gamma0 = covs.gamma(0);
    let common = &fit.a * fit.a.transpose();
    let sigma = DVector::from_fn(n, |i, _| (gamma0[(i, i)] - common[(i, i)]).max(R::zero()));
    let diagnostics = Diagnostics {
        objective: Some(fit.objective),
        iterations: Some(fit.sweeps),
        converged: fit.converged,
        lag_diagonals: fit.lag_diagonals.iter().map(|d| d.iter().map(|x| x.as_f64()).collect()).collect(),
        ..Default::default()
    };
    FactorModel::new(fit.a, x, sigma, Method::JointDiag, diagnostics)
}
