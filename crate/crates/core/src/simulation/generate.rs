use super::{InnovationScaling, SimConfig};
use crate::datamodel::MultiSeries;
use crate::error::{invalid, Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Independent stream for replication `index` under master `seed`.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Innovation variance of x_t − φx_{t−1} = ε_t − θε_{t−1} under `scaling`.
pub fn innovation_variance(phi: f64, theta: f64, scaling: InnovationScaling) -> f64 {
    match scaling {
        InnovationScaling::UnitVariance => (1.0 - phi * phi) / (1.0 + theta * theta - 2.0 * phi * theta),
        InnovationScaling::CovarianceDiagonal => 1.0 - 2.0 * phi * theta + theta * theta,
    }
}

/// Diagonal ARMA(1,1) factors x_t = Φx_{t−1} + ε_t − Θε_{t−1}, K×T after
/// discarding `burn` initial values.
pub fn gen_factors_varma<G: Rng>(
    phi: &[f64],
    theta: &[f64],
    t: usize,
    burn: usize,
    scaling: InnovationScaling,
    rng: &mut G,
) -> Result<DMatrix<f64>> {
    let k = phi.len();
    if theta.len() != k {
        return Err(Error::Dimension(format!("Φ has {k} entries, Θ {}", theta.len())));
    }
    if phi.iter().any(|p| !(p.abs() < 1.0)) {
        return Err(invalid("Φ is not stationary"));
    }
    if theta.iter().any(|p| !(p.abs() < 1.0)) {
        return Err(invalid("Θ is not invertible"));
    }
    let sd: Vec<f64> = phi
        .iter()
        .zip(theta)
        .map(|(p, q)| innovation_variance(*p, *q, scaling))
        .map(|v| if v > 0.0 { Ok(v.sqrt()) } else { Err(invalid(format!("innovation variance {v} is not positive"))) })
        .collect::<Result<_>>()?;
    let mut x = DMatrix::zeros(k, t);
    let mut prev_x = vec![0.0; k];
    let mut prev_e = vec![0.0; k];
    for s in 0..burn + t {
        for i in 0..k {
            let z: f64 = rng.sample(StandardNormal);
            let e = sd[i] * z;
            let v = phi[i] * prev_x[i] + e - theta[i] * prev_e[i];
            prev_x[i] = v;
            prev_e[i] = e;
            if s >= burn {
                x[(i, s - burn)] = v;
            }
        }
    }
    Ok(x)
}

/// AR(1) factors with innovation variance 1 − φ², so each has unit variance.
pub fn gen_factors_var<G: Rng>(phi: &[f64], t: usize, burn: usize, rng: &mut G) -> Result<DMatrix<f64>> {
    gen_factors_varma(phi, &vec![0.0; phi.len()], t, burn, InnovationScaling::UnitVariance, rng)
}

/// Divides each row by its sample standard deviation (divisor T).
pub fn standardize_rows(x: &mut DMatrix<f64>) {
    let t = x.ncols() as f64;
    for mut row in x.row_iter_mut() {
        let mean = row.sum() / t;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
        if var > 0.0 {
            row /= var.sqrt();
        }
    }
}

/// y_t = Ax_t + η_t with η_t ~ N(0, σ²_η I), plus ω at each listed date.
pub fn gen_observed<G: Rng>(
    a: &DMatrix<f64>,
    factors: &DMatrix<f64>,
    sigma_eta: f64,
    omega: &DVector<f64>,
    dates: &[usize],
    rng: &mut G,
) -> Result<MultiSeries<f64>> {
    let (n, k) = a.shape();
    let t = factors.ncols();
    if factors.nrows() != k || omega.len() != n {
        return Err(Error::Dimension("A, factors and ω do not conform".into()));
    }
    if dates.iter().any(|&d| d < 1 || d > t) {
        return Err(invalid(format!("outlier dates must lie in 1..={t}")));
    }
    let mut y = a * factors;
    for s in 0..t {
        for i in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            y[(i, s)] += sigma_eta * z;
        }
    }
    for &d in dates {
        let mut col = y.column_mut(d - 1);
        col += omega;
    }
    MultiSeries::from_matrix(y)
}

/// One panel from a configuration: factors first, then idiosyncratic noise,
/// both from the replication's stream.
pub fn simulate_panel(cfg: &SimConfig, index: u64) -> Result<MultiSeries<f64>> {
    let mut rng = replication_rng(cfg.seed, index);
    let mut x = gen_factors_varma(&cfg.phi, &cfg.theta_or_zero(), cfg.t, cfg.burn_in, cfg.innovation, &mut rng)?;
    if cfg.standardize_factors {
        standardize_rows(&mut x);
    }
    gen_observed(&cfg.a_matrix(), &x, cfg.sigma_eta, &cfg.omega(), &cfg.outlier.dates, &mut rng)
}

/// y_t = Σ_{u=1}^{s} ψ_u ε_{t−u} + η_t with unit-variance ε_t.
pub fn gen_finite_ma<G: Rng>(psi: &[DMatrix<f64>], sigma_eta: f64, t: usize, rng: &mut G) -> Result<MultiSeries<f64>> {
    let s = psi.len();
    if s == 0 {
        return Err(invalid("need at least one MA coefficient matrix"));
    }
    let (n, k) = psi[0].shape();
    if psi.iter().any(|p| p.shape() != (n, k)) {
        return Err(Error::Dimension("MA coefficient matrices differ in shape".into()));
    }
    let eps = DMatrix::from_fn(k, t + s, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut y = DMatrix::zeros(n, t);
    for c in 0..t {
        let time = c + s;
        let mut col = DVector::zeros(n);
        for (u, p) in psi.iter().enumerate() {
            col += p * eps.column(time - (u + 1));
        }
        for i in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            col[i] += sigma_eta * z;
        }
        y.set_column(c, &col);
    }
    MultiSeries::from_matrix(y)
}
