use super::{normalize_signs, Diagnostics, FactorModel, Method};
use crate::datamodel::{center, MultiSeries};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};

/// Rank-K singular-value split of the centered panel Y, with X̂X̂′ = I_K.
#[derive(Clone, Debug)]
pub struct SvdParts<R: Real> {
    /// K×T, rows are the leading right singular vectors.
    pub x: DMatrix<R>,
    /// YX̂′ (N×K).
    pub a: DMatrix<R>,
    /// Leading eigenvectors W_K of YY′ (N×K).
    pub w: DMatrix<R>,
    /// Leading eigenvalues Λ_K of YY′.
    pub lambda: DVector<R>,
    /// All eigenvalues of YY′, descending.
    pub all_eigenvalues: DVector<R>,
    /// Centered panel.
    pub y: DMatrix<R>,
}

/// Numerical rank of the centered panel.
fn rank_of<R: Real>(sv: &DVector<R>) -> usize {
    let hi = sv.max();
    let cut = R::tol(1e-10) * hi;
    sv.iter().filter(|s| **s > cut).count()
}

pub fn svd_decompose<R: Real>(series: &MultiSeries<R>, k: usize) -> Result<SvdParts<R>> {
    let (centered, _) = center(series);
    let y = centered.into_values();
    let (n, t) = y.shape();
    if k == 0 {
        return Err(invalid("K must be positive"));
    }
    let svd = y.clone().svd(true, true);
    let u = svd.u.as_ref().ok_or_else(|| Error::Estimation("SVD did not return U".into()))?;
    let vt = svd.v_t.as_ref().ok_or_else(|| Error::Estimation("SVD did not return V′".into()))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    let rank = rank_of(sv);
    if k > rank {
        return Err(Error::RankDeficient(format!("K = {k} exceeds the rank {rank} of the centered panel")));
    }
    let mut x = DMatrix::zeros(k, t);
    let mut w = DMatrix::zeros(n, k);
    let mut lambda = DVector::zeros(k);
    for (c, &i) in order.iter().take(k).enumerate() {
        x.set_row(c, &vt.row(i));
        w.set_column(c, &u.column(i));
        lambda[c] = sv[i] * sv[i];
    }
    let mut all = DVector::zeros(n);
    for (c, &i) in order.iter().enumerate().take(n) {
        all[c] = sv[i] * sv[i];
    }
    let a = &y * x.transpose();
    Ok(SvdParts { x, a, w, lambda, all_eigenvalues: all, y })
}

/// Principal-component loadings: Â = YX̂′ with X̂ the leading right singular
/// vectors, then rescaled so each factor has unit sample variance.
pub fn estimate_svd<R: Real>(series: &MultiSeries<R>, k: usize) -> Result<FactorModel<R>> {
    let n = series.n();
    if k >= n {
        return Err(invalid(format!("K = {k} must be below N = {n}")));
    }
    let parts = svd_decompose(series, k)?;
    let t = R::count(series.t_len());
    let root_t = t.sqrt();
    let mut a = parts.a / root_t;
    let mut x = parts.x * root_t;
    normalize_signs(&mut a, &mut x);
    let gamma0 = &parts.y * parts.y.transpose() / t;
    let common = &a * a.transpose();
    let sigma = DVector::from_fn(n, |i, _| (gamma0[(i, i)] - common[(i, i)]).max(R::zero()));
    FactorModel::new(a, x, sigma, Method::Svd, Diagnostics { converged: true, ..Default::default() })
}
