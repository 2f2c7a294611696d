//! Factor-count selection and the loading estimators.

mod jointdiag;
mod ml;
mod svd;

pub use jointdiag::{estimate_jointdiag, joint_diagonalize, JointDiagFit, JointDiagOptions};
pub use ml::{estimate_ml, fit_ml, log_likelihood, MlFit, MlInit, MlOptions, SIGMA_FLOOR};
pub use svd::{estimate_svd, svd_decompose, SvdParts};

use crate::datamodel::{center, MultiSeries};
use crate::error::{invalid, Error, Result};
use crate::json::{matrix_rows, vector_f64};
use crate::moments::eigen::lead_index;
use crate::moments::lag_cov;
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Svd,
    #[serde(rename = "jointdiag", alias = "joint-diag", alias = "jd")]
    JointDiag,
    Ml,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Svd => "svd",
            Self::JointDiag => "jointdiag",
            Self::Ml => "ml",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svd" | "eigen" | "pca" => Ok(Self::Svd),
            "jointdiag" | "joint-diag" | "jd" => Ok(Self::JointDiag),
            "ml" => Ok(Self::Ml),
            other => Err(invalid(format!("unknown estimator {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_likelihood: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    pub converged: bool,
    /// Components whose idiosyncratic variance hit the floor.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub heywood: Vec<usize>,
    /// Diagonals of B̂Γ̂(h)B̂′ for h = 1..=H (joint diagonalization).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub lag_diagonals: Vec<Vec<f64>>,
}

/// Loadings A (N×K), scores X (K×T, possibly with no columns), diagonal
/// idiosyncratic variances and the estimator tag.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel<R: Real> {
    a: DMatrix<R>,
    x: DMatrix<R>,
    sigma_eta: DVector<R>,
    method: Method,
    diagnostics: Diagnostics,
}

impl<R: Real> FactorModel<R> {
    pub fn new(a: DMatrix<R>, x: DMatrix<R>, sigma_eta: DVector<R>, method: Method, diagnostics: Diagnostics) -> Result<Self> {
        let (n, k) = a.shape();
        if k == 0 || k >= n {
            return Err(invalid(format!("need 0 < K < N, got K = {k}, N = {n}")));
        }
        if x.nrows() != k && x.ncols() > 0 {
            return Err(Error::Dimension(format!("scores have {} rows for K = {k}", x.nrows())));
        }
        if sigma_eta.len() != n || sigma_eta.iter().any(|s| *s < R::zero()) {
            return Err(invalid("idiosyncratic variances must be N nonnegative values"));
        }
        check_rank(&a)?;
        Ok(Self { a, x, sigma_eta, method, diagnostics })
    }

    pub fn a(&self) -> &DMatrix<R> {
        &self.a
    }

    pub fn scores(&self) -> &DMatrix<R> {
        &self.x
    }

    pub fn sigma_eta(&self) -> &DVector<R> {
        &self.sigma_eta
    }

    pub fn k(&self) -> usize {
        self.a.ncols()
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    /// B̂ = (Â′Â)⁻¹Â′.
    pub fn left_inverse(&self) -> DMatrix<R> {
        left_inverse(&self.a).expect("rank checked at construction")
    }

    /// Z = I − Â(Â′Â)⁻¹Â′.
    pub fn complement_projector(&self) -> DMatrix<R> {
        let n = self.n();
        DMatrix::identity(n, n) - &self.a * self.left_inverse()
    }

    /// Replaces the scores with (Â′Â)⁻¹Â′Y for the given panel.
    pub fn with_scores(mut self, series: &MultiSeries<R>) -> Result<Self> {
        self.x = factor_scores(series, &self)?;
        Ok(self)
    }

    /// ÂÂ′ + diag(Σ̂_η).
    pub fn implied_covariance(&self) -> DMatrix<R> {
        &self.a * self.a.transpose() + DMatrix::from_diagonal(&self.sigma_eta)
    }
}

#[derive(Serialize)]
struct FactorModelRepr<'a> {
    method: Method,
    k: usize,
    a: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    sigma_eta: Vec<f64>,
    diagnostics: &'a Diagnostics,
}

impl<R: Real> Serialize for FactorModel<R> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FactorModelRepr {
            method: self.method,
            k: self.k(),
            a: matrix_rows(&self.a),
            x: matrix_rows(&self.x),
            sigma_eta: vector_f64(&self.sigma_eta),
            diagnostics: &self.diagnostics,
        }
        .serialize(s)
    }
}

/// Fails unless the smallest singular value exceeds 1e−8 times the largest.
pub fn check_rank<R: Real>(a: &DMatrix<R>) -> Result<()> {
    let sv = a.clone().svd(false, false).singular_values;
    let hi = sv.max();
    let lo = sv.min();
    if !(hi > R::zero()) || lo <= R::tol(1e-8) * hi {
        return Err(Error::RankDeficient(format!(
            "loading matrix singular values range {:.3e}..{:.3e}",
            lo.as_f64(),
            hi.as_f64()
        )));
    }
    Ok(())
}

pub(crate) fn left_inverse<R: Real>(a: &DMatrix<R>) -> Result<DMatrix<R>> {
    let ata = a.transpose() * a;
    let chol = ata
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("A′A is not positive definite".into()))?;
    Ok(chol.solve(&a.transpose()))
}

/// Makes the largest-magnitude entry of every loading column positive,
/// flipping the matching score row.
pub(crate) fn normalize_signs<R: Real>(a: &mut DMatrix<R>, x: &mut DMatrix<R>) {
    for k in 0..a.ncols() {
        let col: Vec<R> = a.column(k).iter().copied().collect();
        if col[lead_index(&col)] < R::zero() {
            a.column_mut(k).neg_mut();
            if x.nrows() > k {
                x.row_mut(k).neg_mut();
            }
        }
    }
}

/// Smallest K with V_K/V_N > 1 − α, or with the floor-corrected ratio
/// (V_K + (N − K)λ_min)/V_N when `correct_floor` is set. V_K is the sum of
/// the K largest eigenvalues.
pub fn select_k<R: Real>(eigenvalues: &[R], alpha: f64, correct_floor: bool) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("threshold complement {alpha} outside (0, 1)")));
    }
    let mut ev: Vec<f64> = eigenvalues.iter().map(|x| x.as_f64().max(0.0)).collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let total: f64 = ev.iter().sum();
    if ev.is_empty() || total <= 0.0 {
        return Err(invalid("all eigenvalues are zero"));
    }
    let n = ev.len();
    let floor = if correct_floor { ev[n - 1] } else { 0.0 };
    let mut cum = 0.0;
    for (k, lam) in ev.iter().enumerate() {
        cum += lam;
        let kk = k + 1;
        if (cum + (n - kk) as f64 * floor) / total > 1.0 - alpha {
            return Ok(kk);
        }
    }
    Ok(n)
}

/// Fits `method` with K factors and attaches scores for every method.
pub fn estimate_model<R: Real>(
    series: &MultiSeries<R>,
    k: usize,
    method: Method,
    jd: &JointDiagOptions,
    ml: &MlOptions,
) -> Result<FactorModel<R>> {
    match method {
        Method::Svd => estimate_svd(series, k),
        Method::JointDiag => {
            let h = jd.lags.unwrap_or(k).max(1);
            estimate_jointdiag(series, &lag_cov(series, h)?, k, jd)
        }
        Method::Ml => {
            let (centered, _) = center(series);
            estimate_ml(lag_cov(series, 0)?.gamma(0), k, ml)?.with_scores(&centered)
        }
    }
}

/// X̂ = (Â′Â)⁻¹Â′Y on the panel values as given.
pub fn factor_scores<R: Real>(series: &MultiSeries<R>, model: &FactorModel<R>) -> Result<DMatrix<R>> {
    if series.n() != model.n() {
        return Err(Error::Dimension(format!("panel has {} components, model {}", series.n(), model.n())));
    }
    Ok(model.left_inverse() * series.values())
}

/// Splits ω into α = (A′A)⁻¹A′ω and ζ = (I − A(A′A)⁻¹A′)ω.
pub fn decompose_true<R: Real>(omega: &DVector<R>, a: &DMatrix<R>) -> Result<(DVector<R>, DVector<R>)> {
    if omega.len() != a.nrows() {
        return Err(Error::Dimension(format!("ω has {} entries, A has {} rows", omega.len(), a.nrows())));
    }
    check_rank(a)?;
    let qr = a.clone().qr();
    let alpha = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * omega))
        .ok_or_else(|| Error::RankDeficient("triangular factor is singular".into()))?;
    let zeta = omega - a * &alpha;
    Ok((alpha, zeta))
}
