use crate::datamodel::MultiSeries;
use crate::error::{invalid, Error, Result};
use crate::json::{matrix_rows, vector_f64};
use crate::moments::{sym_eigen, LagCovSet};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionMode {
    /// Smallest-eigenvalue eigenvectors of Γ̂(0).
    #[default]
    Homoscedastic,
    /// Eigenvectors of the symmetrized Γ̂(1) with eigenvalues nearest zero.
    Heteroscedastic,
}

impl std::str::FromStr for DetectionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "homoscedastic" | "homo" | "gamma0" => Ok(Self::Homoscedastic),
            "heteroscedastic" | "hetero" | "gamma1" => Ok(Self::Heteroscedastic),
            other => Err(invalid(format!("unknown detection mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionSource {
    Gamma0Smallest,
    GammahNull,
}

/// Unit projection directions, ordered from the most to the least
/// factor-free (smallest eigenvalue, or smallest |eigenvalue|, first).
#[derive(Clone, Debug, PartialEq)]
pub struct Directions<R: Real> {
    /// N×m, one direction per column.
    pub vectors: DMatrix<R>,
    pub eigenvalues: DVector<R>,
    pub source: DirectionSource,
}

impl<R: Real> Directions<R> {
    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.ncols() == 0
    }

    /// Keeps the first `m` directions.
    pub fn truncate(mut self, m: usize) -> Self {
        let m = m.min(self.len());
        self.vectors = self.vectors.columns(0, m).into_owned();
        self.eigenvalues = self.eigenvalues.rows(0, m).into_owned();
        self
    }

    /// w = z′y_t for every direction and time.
    pub fn project(&self, series: &MultiSeries<R>) -> Result<ProjectionSet<R>> {
        if series.n() != self.vectors.nrows() {
            return Err(Error::Dimension(format!(
                "panel has {} components, directions {}",
                series.n(),
                self.vectors.nrows()
            )));
        }
        let w = self.vectors.transpose() * series.values();
        let t = R::count(series.t_len());
        let m = w.nrows();
        let means = DVector::from_fn(m, |i, _| w.row(i).sum() / t);
        let sds = DVector::from_fn(m, |i, _| {
            let mu = means[i];
            (w.row(i).iter().map(|x| (*x - mu) * (*x - mu)).fold(R::zero(), |a, b| a + b) / t).sqrt()
        });
        Ok(ProjectionSet { directions: self.vectors.clone(), series: w, means, sds, source: self.source })
    }
}

/// Projected series with their means and standard deviations (divisor T).
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionSet<R: Real> {
    pub directions: DMatrix<R>,
    /// m×T.
    pub series: DMatrix<R>,
    pub means: DVector<R>,
    pub sds: DVector<R>,
    pub source: DirectionSource,
}

impl<R: Real> ProjectionSet<R> {
    /// |w_t − w̄|/σ_w for direction `p` at 1-based time `t`.
    pub fn score(&self, p: usize, t: usize) -> f64 {
        ((self.series[(p, t - 1)] - self.means[p]).mag() / self.sds[p]).as_f64()
    }
}

#[derive(Serialize)]
struct ProjectionRepr {
    source: DirectionSource,
    directions: Vec<Vec<f64>>,
    series: Vec<Vec<f64>>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl<R: Real> Serialize for ProjectionSet<R> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ProjectionRepr {
            source: self.source,
            directions: matrix_rows(&self.directions.transpose()),
            series: matrix_rows(&self.series),
            means: vector_f64(&self.means),
            sds: vector_f64(&self.sds),
        }
        .serialize(s)
    }
}

/// The N−K directions orthogonal to the factor space implied by `covs`.
pub fn projection_directions<R: Real>(covs: &LagCovSet<R>, k: usize, mode: DetectionMode) -> Result<Directions<R>> {
    let n = covs.n();
    if k >= n {
        return Err(invalid(format!("K = {k} must be below N = {n}")));
    }
    let m = n - k;
    match mode {
        DetectionMode::Homoscedastic => {
            let e = sym_eigen(covs.gamma(0))?;
            let idx: Vec<usize> = (0..m).map(|i| n - 1 - i).collect();
            Ok(pick(&e.eigenvectors, &e.eigenvalues, &idx, DirectionSource::Gamma0Smallest))
        }
        DetectionMode::Heteroscedastic => {
            if covs.max_lag() < 1 {
                return Err(invalid("heteroscedastic mode needs Γ̂(1)"));
            }
            let e = sym_eigen(&covs.symmetrized(1))?;
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&i, &j| {
                e.eigenvalues[i]
                    .mag()
                    .partial_cmp(&e.eigenvalues[j].mag())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(i.cmp(&j))
            });
            idx.truncate(m);
            Ok(pick(&e.eigenvectors, &e.eigenvalues, &idx, DirectionSource::GammahNull))
        }
    }
}

fn pick<R: Real>(vecs: &DMatrix<R>, vals: &DVector<R>, idx: &[usize], source: DirectionSource) -> Directions<R> {
    let n = vecs.nrows();
    let mut vectors = DMatrix::zeros(n, idx.len());
    let mut eigenvalues = DVector::zeros(idx.len());
    for (c, &i) in idx.iter().enumerate() {
        vectors.set_column(c, &vecs.column(i));
        eigenvalues[c] = vals[i];
    }
    Directions { vectors, eigenvalues, source }
}

/// A flagged date with the projection giving the largest standardized
/// excursion there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// 1-based time index.
    pub date: usize,
    /// 0-based projection index.
    pub direction: usize,
    pub score: f64,
    /// Detection round, 1-based. Zero when produced by [`detect`] alone.
    pub round: usize,
}

/// Each projection flags its single largest standardized excursion when it
/// exceeds `k_alpha`; a date flagged by several projections is reported once
/// with the largest score. Output is sorted by date.
pub fn detect<R: Real>(proj: &ProjectionSet<R>, k_alpha: f64) -> Result<Vec<Detection>> {
    if !(k_alpha > 0.0) {
        return Err(invalid(format!("threshold {k_alpha} must be positive")));
    }
    let (m, t) = proj.series.shape();
    let mut out: Vec<Detection> = Vec::new();
    for p in 0..m {
        let sd = proj.sds[p];
        let scale = proj.series.row(p).amax();
        if !(sd > R::tol(1e-12) * scale) || sd <= R::zero() {
            log::warn!("projection {p} has zero variance; skipped");
            continue;
        }
        let mut best = (0usize, -1.0f64);
        for s in 1..=t {
            let z = proj.score(p, s);
            if z > best.1 {
                best = (s, z);
            }
        }
        if best.1 > k_alpha {
            match out.iter_mut().find(|d| d.date == best.0) {
                Some(d) if d.score < best.1 => {
                    d.score = best.1;
                    d.direction = p;
                }
                Some(_) => {}
                None => out.push(Detection { date: best.0, direction: p, score: best.1, round: 0 }),
            }
        }
    }
    out.sort_by_key(|d| d.date);
    Ok(out)
}
