use crate::datamodel::MultiSeries;
use crate::error::{invalid, Error, Result};
use crate::json::{complex_matrix_rows, complex_vector};
use crate::scalar::Real;
use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Above this length the DFT over all Fourier frequencies uses the FFT.
pub const DIRECT_DFT_MAX_T: usize = 512;

/// Fourier indices j with −T/2 < j ≤ T/2, as an inclusive range.
pub fn fourier_index_range(t: usize) -> (i64, i64) {
    let t = t as i64;
    (-((t - 1) / 2), t / 2)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DftMethod {
    /// Direct summation up to [`DIRECT_DFT_MAX_T`], FFT above.
    #[default]
    Auto,
    Direct,
    Fast,
}

/// d_T(λ_j) = (2πT)^{−1/2} Σ_{t=1}^{T} y_t e^{−iλ_j t}, λ_j = 2πj/T.
///
/// The panel is transformed as given; center it first.
pub fn dft<R: Real>(series: &MultiSeries<R>, j: i64) -> Result<DVector<Complex<R>>> {
    let t = series.t_len();
    let (lo, hi) = fourier_index_range(t);
    if j < lo || j > hi {
        return Err(invalid(format!("frequency index {j} outside {lo}..={hi}")));
    }
    Ok(direct_one(series.values(), j))
}

fn direct_one<R: Real>(y: &DMatrix<R>, j: i64) -> DVector<Complex<R>> {
    let (n, t) = y.shape();
    let tt = t as i64;
    let scale = R::one() / (R::two_pi() * R::count(t)).sqrt();
    let mut out = DVector::from_element(n, Complex::new(R::zero(), R::zero()));
    for s in 1..=t {
        // Reduce j·s modulo T before forming the angle to keep it small.
        let k = (j * s as i64).rem_euclid(tt);
        let ang = -R::two_pi() * R::count(k as usize) / R::count(t);
        let e = Complex::new(ang.cos(), ang.sin());
        for i in 0..n {
            out[i] += e * y[(i, s - 1)];
        }
    }
    out * Complex::new(scale, R::zero())
}

/// DFT at every Fourier frequency, ordered by increasing index.
pub fn dft_all<R: Real>(series: &MultiSeries<R>) -> Vec<DVector<Complex<R>>> {
    dft_all_with(series, DftMethod::Auto)
}

pub fn dft_all_with<R: Real>(series: &MultiSeries<R>, method: DftMethod) -> Vec<DVector<Complex<R>>> {
    let y = series.values();
    let t = series.t_len();
    let (lo, hi) = fourier_index_range(t);
    let fast = match method {
        DftMethod::Auto => t > DIRECT_DFT_MAX_T,
        DftMethod::Direct => false,
        DftMethod::Fast => true,
    };
    if !fast {
        return (lo..=hi).map(|j| direct_one(y, j)).collect();
    }

    let n = y.nrows();
    let scale = R::one() / (R::two_pi() * R::count(t)).sqrt();
    let mut spectra: Vec<Vec<Complex<R>>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut buf: Vec<Complex<R>> = (0..t).map(|s| Complex::new(y[(i, s)], R::zero())).collect();
        R::fft_forward(&mut buf);
        spectra.push(buf);
    }
    (lo..=hi)
        .map(|j| {
            let k = j.rem_euclid(t as i64) as usize;
            // Time starts at 1, so shift the phase by one step.
            let ang = -R::two_pi() * R::count(k) / R::count(t);
            let shift = Complex::new(ang.cos() * scale, ang.sin() * scale);
            DVector::from_fn(n, |i, _| spectra[i][k] * shift)
        })
        .collect()
}

/// How a smoothed spectral estimate weights neighbouring ordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WindowKind {
    /// Flat average over 2m+1 neighbouring Fourier frequencies.
    Daniell { half_width: usize },
    /// Relative weights for offsets −m..=m (odd length, symmetric).
    Custom { weights: Vec<f64> },
}

/// The window actually applied, with the normalization constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowDescriptor {
    pub kind: WindowKind,
    pub half_width: usize,
    /// w_T values for offsets −m..=m; they sum to T/(2π).
    pub weights: Vec<f64>,
    /// Kernel constant c₀ (1/2π for the flat kernel on (−π, π]).
    pub c0: f64,
    /// Truncation point M = T/(2m+1).
    pub truncation: f64,
}

impl WindowDescriptor {
    pub fn daniell(half_width: usize, t: usize) -> Result<Self> {
        Self::build(WindowKind::Daniell { half_width }, t)
    }

    pub fn build(kind: WindowKind, t: usize) -> Result<Self> {
        let rel: Vec<f64> = match &kind {
            WindowKind::Daniell { half_width } => vec![1.0; 2 * half_width + 1],
            WindowKind::Custom { weights } => {
                if weights.len() % 2 == 0 {
                    return Err(invalid("custom window needs an odd number of weights"));
                }
                let len = weights.len();
                for k in 0..len / 2 {
                    let (a, b) = (weights[k], weights[len - 1 - k]);
                    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                        return Err(invalid("custom window weights must be symmetric"));
                    }
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(invalid("custom window weights must be finite and nonnegative"));
                }
                weights.clone()
            }
        };
        let total: f64 = rel.iter().sum();
        if total <= 0.0 {
            return Err(invalid("degenerate spectral window: all weights are zero"));
        }
        if rel.len() > t {
            return Err(invalid(format!("window spans {} ordinates but T = {t}", rel.len())));
        }
        let half_width = rel.len() / 2;
        let scale = t as f64 / (2.0 * std::f64::consts::PI) / total;
        Ok(Self {
            kind,
            half_width,
            weights: rel.iter().map(|w| w * scale).collect(),
            c0: 1.0 / (2.0 * std::f64::consts::PI),
            truncation: t as f64 / rel.len() as f64,
        })
    }
}

/// DFT ordinates, periodograms and optional smoothed spectra at the Fourier
/// frequencies −T/2 < j ≤ T/2.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSet<R: Real> {
    t_len: usize,
    dft: Vec<DVector<Complex<R>>>,
    periodograms: Vec<DMatrix<Complex<R>>>,
    smoothed: Option<Vec<DMatrix<Complex<R>>>>,
    window: Option<WindowDescriptor>,
}

impl<R: Real> SpectralSet<R> {
    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn n(&self) -> usize {
        self.dft[0].len()
    }

    pub fn index_range(&self) -> (i64, i64) {
        fourier_index_range(self.t_len)
    }

    /// All Fourier indices in storage order.
    pub fn indices(&self) -> impl Iterator<Item = i64> {
        let (lo, hi) = self.index_range();
        lo..=hi
    }

    /// λ_j = 2πj/T.
    pub fn freq(&self, j: i64) -> R {
        R::two_pi() * R::lit(j as f64) / R::count(self.t_len)
    }

    fn pos(&self, j: i64) -> usize {
        let (lo, hi) = self.index_range();
        assert!(j >= lo && j <= hi, "frequency index {j} outside {lo}..={hi}");
        (j - lo) as usize
    }

    pub fn dft_at(&self, j: i64) -> &DVector<Complex<R>> {
        &self.dft[self.pos(j)]
    }

    pub fn periodogram_at(&self, j: i64) -> &DMatrix<Complex<R>> {
        &self.periodograms[self.pos(j)]
    }

    pub fn smoothed_at(&self, j: i64) -> Option<&DMatrix<Complex<R>>> {
        let p = self.pos(j);
        self.smoothed.as_ref().map(|s| &s[p])
    }

    pub fn window(&self) -> Option<&WindowDescriptor> {
        self.window.as_ref()
    }
}

/// DFT and periodogram I(λ_j) = d(λ_j) d(λ_j)* at every Fourier frequency.
/// The input should be centered.
pub fn periodogram<R: Real>(series: &MultiSeries<R>) -> SpectralSet<R> {
    let dft = dft_all(series);
    let periodograms = dft.iter().map(|d| d * d.adjoint()).collect();
    SpectralSet { t_len: series.t_len(), dft, periodograms, smoothed: None, window: None }
}

/// F̂(λ_k) = (2π/T) Σ_j I(λ_j) w_T(λ_k − λ_j), wrapping circularly over the
/// Fourier grid.
pub fn smoothed_spectrum<R: Real>(spec: &SpectralSet<R>, window: &WindowDescriptor) -> Result<SpectralSet<R>> {
    let t = spec.t_len;
    let m = window.half_width;
    if window.weights.len() != 2 * m + 1 || window.weights.len() > t {
        return Err(invalid("window does not fit the Fourier grid"));
    }
    let sum: f64 = window.weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidArgument("degenerate spectral window: all weights are zero".into()));
    }
    let step = R::two_pi() / R::count(t);
    let n = spec.n();
    let zero = DMatrix::from_element(n, n, Complex::new(R::zero(), R::zero()));
    let smoothed = (0..t)
        .map(|k| {
            let mut acc = zero.clone();
            for (o, w) in window.weights.iter().enumerate() {
                let src = (k as i64 + o as i64 - m as i64).rem_euclid(t as i64) as usize;
                let c = Complex::new(step * R::lit(*w), R::zero());
                acc += &spec.periodograms[src] * c;
            }
            acc
        })
        .collect();
    Ok(SpectralSet { smoothed: Some(smoothed), window: Some(window.clone()), ..spec.clone() })
}

#[derive(Serialize)]
struct SpectralRepr {
    t: usize,
    indices: Vec<i64>,
    freqs: Vec<f64>,
    dft: Vec<Vec<[f64; 2]>>,
    periodograms: Vec<Vec<Vec<[f64; 2]>>>,
    smoothed: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    window: Option<WindowDescriptor>,
}

impl<R: Real> Serialize for SpectralSet<R> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpectralRepr {
            t: self.t_len,
            indices: self.indices().collect(),
            freqs: self.indices().map(|j| self.freq(j).as_f64()).collect(),
            dft: self.dft.iter().map(complex_vector).collect(),
            periodograms: self.periodograms.iter().map(complex_matrix_rows).collect(),
            smoothed: self.smoothed.as_ref().map(|v| v.iter().map(complex_matrix_rows).collect()),
            window: self.window.clone(),
        }
        .serialize(s)
    }
}
