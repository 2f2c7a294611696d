use super::super::factors::FactorModel;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// ζ̂ = y_{t0} − Âx̂_{t0}.
pub fn size_zeta<R: Real>(y_t0: &DVector<R>, a: &DMatrix<R>, x_t0: &DVector<R>) -> Result<DVector<R>> {
    if y_t0.len() != a.nrows() || x_t0.len() != a.ncols() {
        return Err(Error::Dimension("ζ̂: y, Â and x̂ do not conform".into()));
    }
    Ok(y_t0 - a * x_t0)
}

/// ζ̂ using the model's own scores at 1-based `t0`.
pub fn size_zeta_at<R: Real>(y_t0: &DVector<R>, model: &FactorModel<R>, t0: usize) -> Result<DVector<R>> {
    let x = model.scores();
    if t0 < 1 || t0 > x.ncols() {
        return Err(invalid(format!("model has no scores at t = {t0}")));
    }
    size_zeta(y_t0, model.a(), &x.column(t0 - 1).into_owned())
}

/// ω̂ = Âα̂ + ζ̂.
pub fn total_size<R: Real>(a: &DMatrix<R>, alpha: &DVector<R>, zeta: &DVector<R>) -> Result<DVector<R>> {
    if alpha.len() != a.ncols() || zeta.len() != a.nrows() {
        return Err(Error::Dimension("ω̂: Â, α̂ and ζ̂ do not conform".into()));
    }
    Ok(a * alpha + zeta)
}

/// Autoregressive order used by the factor-level size estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum ArOrder {
    Fixed(usize),
    /// Minimum AIC over 1..=max on a common sample.
    Aic(usize),
}

impl Default for ArOrder {
    fn default() -> Self {
        Self::Aic(4)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaFit<R: Real> {
    pub alpha: R,
    pub order: usize,
    pub phi: Vec<R>,
    pub mean: R,
}

/// Additive-outlier size in one factor series at 1-based `t0`.
pub fn size_alpha<R: Real>(factor: &[R], t0: usize, order: ArOrder) -> Result<R> {
    fit_alpha(factor, t0, order, &[]).map(|f| f.alpha)
}

/// Fits AR(p) by least squares on the mean-corrected series with `t0` and
/// `exclude` left out, then returns
/// α̂ = Σ_{k=0}^{T−t0} π_k e_{t0+k} / Σ_{k=0}^{T−t0} π_k², π(B) = 1 − φ₁B − … − φ_pB^p.
/// An unstable fit falls back to p = 1.
pub fn fit_alpha<R: Real>(factor: &[R], t0: usize, order: ArOrder, exclude: &[usize]) -> Result<AlphaFit<R>> {
    let t = factor.len();
    if t0 < 1 || t0 > t {
        return Err(invalid(format!("t0 = {t0} outside 1..={t}")));
    }
    let max_p = match order {
        ArOrder::Fixed(p) => p,
        ArOrder::Aic(m) => m.max(1),
    };
    if t <= max_p + 20 {
        return Err(Error::InsufficientData(format!("T = {t} too short for AR({max_p})")));
    }
    let mut skip = vec![false; t + 1];
    skip[t0] = true;
    for &d in exclude {
        if (1..=t).contains(&d) {
            skip[d] = true;
        }
    }
    let kept: Vec<R> = (1..=t).filter(|&s| !skip[s]).map(|s| factor[s - 1]).collect();
    let mean = kept.iter().fold(R::zero(), |a, b| a + *b) / R::count(kept.len());
    let x: Vec<R> = factor.iter().map(|v| *v - mean).collect();

    let p = match order {
        ArOrder::Fixed(p) => p,
        ArOrder::Aic(m) => {
            let mut best = (1usize, f64::INFINITY);
            for p in 1..=m.max(1) {
                if let Some((_, rss, n_eq)) = ar_least_squares(&x, &skip, p, m.max(1)) {
                    let aic = n_eq as f64 * (rss / n_eq as f64).ln() + 2.0 * p as f64;
                    if aic < best.1 {
                        best = (p, aic);
                    }
                }
            }
            best.0
        }
    };
    let mut phi = if p == 0 {
        Vec::new()
    } else {
        ar_least_squares(&x, &skip, p, p)
            .ok_or_else(|| Error::Estimation(format!("AR({p}) least squares failed")))?
            .0
    };
    if p > 1 && !is_stationary(&phi) {
        log::warn!("AR({p}) fit is not stationary; using AR(1)");
        phi = ar_least_squares(&x, &skip, 1, 1)
            .ok_or_else(|| Error::Estimation("AR(1) least squares failed".into()))?
            .0;
    }
    let order_used = phi.len();

    let resid = |s: usize| -> R {
        let mut e = x[s - 1];
        for (i, f) in phi.iter().enumerate() {
            let lag = i + 1;
            if s > lag {
                e -= *f * x[s - 1 - lag];
            }
        }
        e
    };
    let mut num = R::zero();
    let mut den = R::zero();
    for k in 0..=order_used.min(t - t0) {
        let pi_k = if k == 0 { R::one() } else { -phi[k - 1] };
        num += pi_k * resid(t0 + k);
        den += pi_k * pi_k;
    }
    Ok(AlphaFit { alpha: num / den, order: order_used, phi, mean })
}

/// Least squares AR(p) without intercept on equations s > start whose
/// response and lags avoid skipped dates. Returns (φ, RSS, equations).
fn ar_least_squares<R: Real>(x: &[R], skip: &[bool], p: usize, start: usize) -> Option<(Vec<R>, f64, usize)> {
    let t = x.len();
    let rows: Vec<usize> = (start.max(p) + 1..=t).filter(|&s| (s - p..=s).all(|u| !skip[u])).collect();
    if rows.len() <= p + 1 {
        return None;
    }
    let design = DMatrix::from_fn(rows.len(), p, |r, c| x[rows[r] - 2 - c]);
    let target = DVector::from_fn(rows.len(), |r, _| x[rows[r] - 1]);
    let coef = design.clone().svd(true, true).solve(&target, R::tol(1e-12)).ok()?;
    let rss = (target - design * &coef).norm_squared().as_f64();
    Some((coef.iter().copied().collect(), rss.max(f64::MIN_POSITIVE), rows.len()))
}

/// All roots of 1 − φ₁z − … − φ_pz^p lie outside the unit circle.
fn is_stationary<R: Real>(phi: &[R]) -> bool {
    let p = phi.len();
    if p == 0 {
        return true;
    }
    let companion = DMatrix::from_fn(p, p, |i, j| {
        if i == 0 {
            phi[j]
        } else if i == j + 1 {
            R::one()
        } else {
            R::zero()
        }
    });
    companion.complex_eigenvalues().iter().all(|z| (z.re * z.re + z.im * z.im).sqrt() < R::one())
}
