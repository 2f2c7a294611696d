//! Frequency-domain likelihood-ratio test that the spectral density matrix
//! is real, band by band.
//!
//! Under the null the band ordinates are complex normal with a real
//! covariance, so the statistic U = |I + (S_R⁻¹S_I)²| lies in [0, 1]: with
//! S_R = LL′ the matrix K = L⁻¹S_I L⁻ᵀ is antisymmetric and I + K² = I − K′K.

use crate::datamodel::{center, MultiSeries};
use crate::error::{invalid, Error, Result};
use crate::moments::{dft_all, fourier_index_range, sym_eigen, SpectralSet};
use crate::scalar::Real;
use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Real and imaginary second moments of the DFT ordinates in one band.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMoments<R: Real> {
    /// (1/J) Σ (XᴿXᴿ′ + XᴵXᴵ′), symmetric PSD.
    pub s_r: DMatrix<R>,
    /// (1/J) Σ (XᴵXᴿ′ − XᴿXᴵ′), antisymmetric.
    pub s_i: DMatrix<R>,
    pub j_count: usize,
    /// Half-open Fourier index range (a, b].
    pub band: (i64, i64),
}

impl<R: Real> BandMoments<R> {
    /// Moments from explicit real and imaginary parts of the ordinates.
    /// No minimum band size is enforced here.
    pub fn from_ordinates(xr: &[DVector<R>], xi: &[DVector<R>], band: (i64, i64)) -> Result<Self> {
        if xr.is_empty() || xr.len() != xi.len() {
            return Err(invalid("need the same nonzero number of real and imaginary ordinates"));
        }
        let n = xr[0].len();
        if xr.iter().chain(xi).any(|v| v.len() != n) {
            return Err(Error::Dimension("ordinates of differing length".into()));
        }
        let mut s_r = DMatrix::zeros(n, n);
        let mut s_i = DMatrix::zeros(n, n);
        for (r, i) in xr.iter().zip(xi) {
            s_r += r * r.transpose() + i * i.transpose();
            s_i += i * r.transpose() - r * i.transpose();
        }
        let inv_j = R::one() / R::count(xr.len());
        Ok(Self { s_r: s_r * inv_j, s_i: s_i * inv_j, j_count: xr.len(), band })
    }

    fn from_dft(ords: &[&DVector<Complex<R>>], band: (i64, i64)) -> Result<Self> {
        let xr: Vec<_> = ords.iter().map(|d| d.map(|z| z.re)).collect();
        let xi: Vec<_> = ords.iter().map(|d| d.map(|z| z.im)).collect();
        Self::from_ordinates(&xr, &xi, band)
    }

    pub fn n(&self) -> usize {
        self.s_r.nrows()
    }
}

/// Largest interior Fourier index: frequencies 0 and π are excluded.
pub fn max_interior_index(t: usize) -> i64 {
    ((t as i64) - 1) / 2
}

/// Band moments over the Fourier indices a+1..=b of a computed spectrum.
pub fn band_moments<R: Real>(spec: &SpectralSet<R>, a: i64, b: i64) -> Result<BandMoments<R>> {
    let top = max_interior_index(spec.t_len());
    if a < 0 || b <= a || b > top {
        return Err(invalid(format!("band ({a}, {b}] is not inside the interior indices (0, {top}]")));
    }
    let j = (b - a) as usize;
    let n = spec.n();
    if j < n + 2 {
        return Err(Error::InsufficientData(format!(
            "band ({a}, {b}] has {j} frequencies, need at least N + 2 = {}",
            n + 2
        )));
    }
    let ords: Vec<_> = (a + 1..=b).map(|k| spec.dft_at(k)).collect();
    BandMoments::from_dft(&ords, (a, b))
}

/// Multiplier and degrees of freedom for the χ² approximation of −m log U.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Calibration {
    /// m = J − N − 3/2 and N² degrees of freedom.
    #[default]
    Standard,
    /// m = J − (N+1)/2 and N(N−1)/2 degrees of freedom, the count of free
    /// parameters in an antisymmetric imaginary part. Not the default.
    Antisymmetric,
}

impl std::str::FromStr for Calibration {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Ok(Self::Standard),
            "antisymmetric" => Ok(Self::Antisymmetric),
            other => Err(invalid(format!("unknown calibration {other:?}"))),
        }
    }
}

impl Calibration {
    pub fn multiplier(self, j: usize, n: usize) -> f64 {
        match self {
            Self::Standard => j as f64 - n as f64 - 1.5,
            Self::Antisymmetric => j as f64 - (n as f64 + 1.0) / 2.0,
        }
    }

    pub fn degrees_of_freedom(self, n: usize) -> f64 {
        match self {
            Self::Standard => (n * n) as f64,
            Self::Antisymmetric => (n * (n - 1) / 2) as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrtOutcome {
    pub u: f64,
    pub m: f64,
    /// −m log U, never negative.
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Condition number above which S_R is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub fn reality_lrt<R: Real>(bm: &BandMoments<R>) -> Result<LrtOutcome> {
    reality_lrt_with(bm, Calibration::Standard)
}

pub fn reality_lrt_with<R: Real>(bm: &BandMoments<R>, cal: Calibration) -> Result<LrtOutcome> {
    let n = bm.n();
    let u = u_statistic(bm)?;
    let m = cal.multiplier(bm.j_count, n);
    if m <= 0.0 {
        return Err(Error::InsufficientData(format!("multiplier m = {m} is not positive; widen the band")));
    }
    let df = cal.degrees_of_freedom(n);
    let statistic = (-m * u.ln()).max(0.0);
    let p_value = if df > 0.0 { chi2(df)?.sf(statistic) } else { 1.0 };
    Ok(LrtOutcome { u, m, statistic, df, p_value })
}

/// U = |I + (S_R⁻¹S_I)²|, evaluated in the congruent symmetric form.
pub fn u_statistic<R: Real>(bm: &BandMoments<R>) -> Result<f64> {
    let n = bm.n();
    let eig = sym_eigen(&bm.s_r)?;
    let (hi, lo) = (eig.eigenvalues[0].as_f64(), eig.eigenvalues[n - 1].as_f64());
    if lo <= 0.0 || hi / lo > MAX_CONDITION {
        return Err(Error::Singular(format!(
            "S_R condition number {:.3e} exceeds {MAX_CONDITION:.0e}; use a wider band",
            if lo > 0.0 { hi / lo } else { f64::INFINITY }
        )));
    }
    let chol = bm
        .s_r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("S_R is not positive definite; use a wider band".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("Cholesky factor of S_R is singular".into()))?;
    let k = &linv * &bm.s_i * linv.transpose();
    let g = DMatrix::identity(n, n) - k.transpose() * &k;
    let g = (&g + g.transpose()) * R::lit(0.5);
    let ev = sym_eigen(&g)?;
    let u: f64 = ev.eigenvalues.iter().map(|x| x.as_f64()).product();
    debug_assert!(u <= 1.0 + 1e-12, "U = {u} exceeds 1");
    if u <= 0.0 {
        return Err(Error::Singular(format!("U = {u:.3e} is not positive")));
    }
    Ok(u.min(1.0))
}

fn chi2(df: f64) -> Result<ChiSquared> {
    ChiSquared::new(df).map_err(|e| invalid(format!("chi-square with {df} df: {e}")))
}

/// Upper-α critical value of χ²_df.
pub fn chi2_critical(df: f64, alpha: f64) -> Result<f64> {
    Ok(chi2(df)?.inverse_cdf(1.0 - alpha))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandResult {
    /// Half-open Fourier index range (a, b].
    pub band: (i64, i64),
    pub j: usize,
    pub u: f64,
    pub m: f64,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub critical_value: f64,
    pub reject: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdequacyResult {
    pub n: usize,
    pub t: usize,
    pub alpha: f64,
    pub calibration: Calibration,
    pub bands: Vec<BandResult>,
    /// True when any band rejects. Bands are not corrected for multiplicity.
    pub reject: bool,
}

impl AdequacyResult {
    /// 0-based indices of the rejecting bands.
    pub fn rejected_bands(&self) -> Vec<usize> {
        self.bands.iter().enumerate().filter(|(_, b)| b.reject).map(|(i, _)| i).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdequacyOptions {
    pub n_bands: usize,
    pub alpha: f64,
    pub calibration: Calibration,
}

impl Default for AdequacyOptions {
    fn default() -> Self {
        Self { n_bands: 4, alpha: 0.05, calibration: Calibration::Standard }
    }
}

/// Splits the interior indices 1..=(T−1)/2 into `n_bands` contiguous ranges
/// of equal size; leftover frequencies go to the last band.
pub fn band_ranges(t: usize, n_bands: usize) -> Result<Vec<(i64, i64)>> {
    if n_bands == 0 {
        return Err(invalid("need at least one band"));
    }
    let top = max_interior_index(t);
    let width = top / n_bands as i64;
    if width < 1 {
        return Err(Error::InsufficientData(format!("{top} interior frequencies for {n_bands} bands")));
    }
    Ok((0..n_bands as i64)
        .map(|k| {
            let a = k * width;
            let b = if k == n_bands as i64 - 1 { top } else { a + width };
            (a, b)
        })
        .collect())
}

pub fn adequacy_test<R: Real>(series: &MultiSeries<R>, n_bands: usize, alpha: f64) -> Result<AdequacyResult> {
    adequacy_test_with(series, &AdequacyOptions { n_bands, alpha, ..Default::default() })
}

pub fn adequacy_test_with<R: Real>(series: &MultiSeries<R>, opts: &AdequacyOptions) -> Result<AdequacyResult> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(invalid(format!("level {} outside (0, 1)", opts.alpha)));
    }
    let (n, t) = (series.n(), series.t_len());
    let ranges = band_ranges(t, opts.n_bands)?;
    let (centered, _) = center(series);
    let ords = dft_all(&centered);
    let (lo, _) = fourier_index_range(t);
    let df = opts.calibration.degrees_of_freedom(n);
    let critical_value = if df > 0.0 { chi2_critical(df, opts.alpha)? } else { f64::INFINITY };

    let mut bands = Vec::with_capacity(ranges.len());
    for (a, b) in ranges {
        let j = (b - a) as usize;
        if j < n + 2 {
            return Err(Error::InsufficientData(format!(
                "band ({a}, {b}] has {j} frequencies, need at least N + 2 = {}",
                n + 2
            )));
        }
        let slice: Vec<_> = (a + 1..=b).map(|k| &ords[(k - lo) as usize]).collect();
        let bm = BandMoments::from_dft(&slice, (a, b))?;
        let out = reality_lrt_with(&bm, opts.calibration)?;
        bands.push(BandResult {
            band: (a, b),
            j,
            u: out.u,
            m: out.m,
            statistic: out.statistic,
            df: out.df,
            p_value: out.p_value,
            critical_value,
            reject: out.p_value < opts.alpha,
        });
    }
    let reject = bands.iter().any(|b| b.reject);
    Ok(AdequacyResult { n, t, alpha: opts.alpha, calibration: opts.calibration, bands, reject })
}
