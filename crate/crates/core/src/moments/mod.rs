//! Second-moment estimation in time and frequency, and the symmetric
//! eigenproblem used by every projection and estimator.

pub(crate) mod eigen;
mod spectral;

pub use eigen::{sym_eigen, EigenSystem};
pub use spectral::{
    dft, dft_all, dft_all_with, fourier_index_range, periodogram, smoothed_spectrum, DftMethod,
    SpectralSet, WindowDescriptor, WindowKind, DIRECT_DFT_MAX_T,
};

use crate::datamodel::{row_means, MultiSeries};
use crate::error::{invalid, Result};
use crate::json::{matrix_rows, vector_f64};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Sample autocovariances Γ̂(0), …, Γ̂(M) with divisor T at every lag.
#[derive(Clone, Debug, PartialEq)]
pub struct LagCovSet<R: Real> {
    gammas: Vec<DMatrix<R>>,
    mean: DVector<R>,
    t_len: usize,
}

impl<R: Real> LagCovSet<R> {
    /// Γ̂(h) for `0 <= h <= max_lag()`.
    pub fn gamma(&self, h: usize) -> &DMatrix<R> {
        &self.gammas[h]
    }

    pub fn gammas(&self) -> &[DMatrix<R>] {
        &self.gammas
    }

    /// (Γ̂(h) + Γ̂(h)′)/2.
    pub fn symmetrized(&self, h: usize) -> DMatrix<R> {
        let g = &self.gammas[h];
        (g + g.transpose()) * R::lit(0.5)
    }

    pub fn max_lag(&self) -> usize {
        self.gammas.len() - 1
    }

    pub fn mean(&self) -> &DVector<R> {
        &self.mean
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn n(&self) -> usize {
        self.mean.len()
    }
}

/// Γ̂(h) = T⁻¹ Σ_{t=1}^{T−h} (y_t − ȳ)(y_{t+h} − ȳ)′ for h = 0..=max_lag.
pub fn lag_cov<R: Real>(series: &MultiSeries<R>, max_lag: usize) -> Result<LagCovSet<R>> {
    let t = series.t_len();
    if max_lag >= t {
        return Err(invalid(format!("max lag {max_lag} must be below T = {t}")));
    }
    let mean = row_means(series.values());
    let mut y = series.values().clone();
    for mut col in y.column_iter_mut() {
        col -= &mean;
    }
    let inv_t = R::one() / R::count(t);
    let gammas = (0..=max_lag)
        .map(|h| {
            let lead = y.columns(0, t - h);
            let lagged = y.columns(h, t - h);
            lead * lagged.transpose() * inv_t
        })
        .collect();
    Ok(LagCovSet { gammas, mean, t_len: t })
}

/// Smallest lag beyond which every cross-correlation stays within 2/√T of
/// zero, searched up to T/4. Never returns less than 1.
pub fn default_max_lag<R: Real>(series: &MultiSeries<R>) -> Result<usize> {
    let t = series.t_len();
    let cap = (t / 4).max(1).min(t - 1);
    let covs = lag_cov(series, cap)?;
    let g0 = covs.gamma(0);
    let band = 2.0 / (t as f64).sqrt();
    let n = series.n();
    let sd: Vec<f64> = (0..n).map(|i| g0[(i, i)].as_f64().max(0.0).sqrt()).collect();
    let mut last_significant = 0;
    for h in 1..=cap {
        let g = covs.gamma(h);
        let significant = (0..n).any(|i| {
            (0..n).any(|j| {
                let d = sd[i] * sd[j];
                d > 0.0 && (g[(i, j)].as_f64() / d).abs() > band
            })
        });
        if significant {
            last_significant = h;
        }
    }
    Ok(last_significant.max(1))
}

#[derive(Serialize)]
struct LagCovRepr {
    t: usize,
    mean: Vec<f64>,
    gammas: Vec<Vec<Vec<f64>>>,
}

impl<R: Real> Serialize for LagCovSet<R> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LagCovRepr {
            t: self.t_len,
            mean: vector_f64(&self.mean),
            gammas: self.gammas.iter().map(matrix_rows).collect(),
        }
        .serialize(s)
    }
}
