use crate::datamodel::{replace_at, MultiSeries};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjustStrategy {
    /// One-step VAR(p) forecast fitted on earlier unflagged data.
    VarForecast,
    /// Average of the nearest unflagged columns on either side.
    #[default]
    Interpolate,
}

impl std::str::FromStr for AdjustStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "var-forecast" | "var" | "forecast" => Ok(Self::VarForecast),
            "interpolate" | "interp" => Ok(Self::Interpolate),
            other => Err(invalid(format!("unknown adjustment {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdjustOptions {
    pub strategy: AdjustStrategy,
    /// VAR order p for forecasts.
    pub var_order: usize,
}

impl Default for AdjustOptions {
    fn default() -> Self {
        Self { strategy: AdjustStrategy::Interpolate, var_order: 1 }
    }
}

/// Replaces the observations at the flagged 1-based `dates`.
///
/// Interpolation averages the nearest unflagged columns on both sides. A
/// flagged run touching the end of the sample is forecast by a VAR instead;
/// one touching the start copies the first unflagged column after it, since
/// no history exists to forecast from.
pub fn adjust<R: Real>(series: &MultiSeries<R>, dates: &[usize], opts: &AdjustOptions) -> Result<MultiSeries<R>> {
    let t = series.t_len();
    let mut flagged = vec![false; t + 1];
    for &d in dates {
        if d < 1 || d > t {
            return Err(invalid(format!("date {d} outside 1..={t}")));
        }
        flagged[d] = true;
    }
    let mut sorted: Vec<usize> = dates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() == t {
        return Err(Error::InsufficientData("every date is flagged".into()));
    }

    let mut out = series.clone();
    for &d in &sorted {
        let left = (1..d).rev().find(|&s| !flagged[s]);
        let right = (d + 1..=t).find(|&s| !flagged[s]);
        let value = match (opts.strategy, left, right) {
            (AdjustStrategy::Interpolate, Some(l), Some(r)) => (series.at(l) + series.at(r)) * R::lit(0.5),
            (AdjustStrategy::Interpolate, None, Some(r)) => series.at(r),
            _ => var_forecast(&out, d, &flagged, opts.var_order)?,
        };
        out = replace_at(&out, d, &value)?;
    }
    Ok(out)
}

/// One-step forecast of y_{t0} from a VAR(p) with intercept, fitted by least
/// squares on equations before `t0` that touch no flagged date. Lags use
/// `series`, so earlier adjusted values feed the forecast.
fn var_forecast<R: Real>(series: &MultiSeries<R>, t0: usize, flagged: &[bool], p: usize) -> Result<DVector<R>> {
    let n = series.n();
    if p == 0 {
        return Err(invalid("VAR order must be positive"));
    }
    let need = p * n + 10;
    if t0 <= need {
        return Err(Error::InsufficientData(format!(
            "VAR({p}) forecast at t = {t0} needs more than {need} earlier observations"
        )));
    }
    let rows: Vec<usize> = (p + 1..t0).filter(|&s| (s - p..=s).all(|u| !flagged[u])).collect();
    let width = 1 + n * p;
    if rows.len() < width + 1 {
        return Err(Error::InsufficientData(format!(
            "only {} usable VAR equations before t = {t0}, need more than {width}",
            rows.len()
        )));
    }
    let y = series.values();
    let regressors = |s: usize| {
        let mut v = DVector::zeros(width);
        v[0] = R::one();
        for lag in 1..=p {
            for i in 0..n {
                v[1 + (lag - 1) * n + i] = y[(i, s - lag - 1)];
            }
        }
        v
    };
    let x = DMatrix::from_fn(rows.len(), width, |r, c| regressors(rows[r])[c]);
    let targets = DMatrix::from_fn(rows.len(), n, |r, i| y[(i, rows[r] - 1)]);
    let coef = x
        .svd(true, true)
        .solve(&targets, R::tol(1e-12))
        .map_err(|e| Error::Estimation(format!("VAR least squares: {e}")))?;
    Ok(coef.transpose() * regressors(t0))
}
