use super::{adjust, detect, fit_alpha, projection_directions, size_zeta, total_size};
use super::{AdjustOptions, ArOrder, Detection, DetectionMode, ProjectionSet, DEFAULT_K_ALPHA};
use crate::adequacy::{adequacy_test_with, AdequacyOptions, AdequacyResult};
use crate::datamodel::MultiSeries;
use crate::error::{invalid, Error, Result};
use crate::factors::{
    estimate_model, select_k, FactorModel, JointDiagOptions, Method, MlOptions,
};
use crate::json::vector_f64;
use crate::moments::{lag_cov, sym_eigen};
use crate::scalar::Real;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub estimator: Method,
    pub k_alpha: f64,
    pub adequacy: AdequacyOptions,
    /// Complement of the explained-variance share used by `select_k`.
    pub select_alpha: f64,
    pub correct_floor: bool,
    pub mode: DetectionMode,
    /// Directions searched per round; defaults to N − K.
    pub n_directions: Option<usize>,
    /// Fixed factor count for every stage instead of `select_k`.
    pub k_override: Option<usize>,
    pub adjust: AdjustOptions,
    pub max_rounds: usize,
    pub ar_order: ArOrder,
    /// Continue past an adequacy rejection.
    pub force: bool,
    pub jointdiag: JointDiagOptions,
    pub ml: MlOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            estimator: Method::Svd,
            k_alpha: DEFAULT_K_ALPHA,
            adequacy: AdequacyOptions::default(),
            select_alpha: 0.05,
            correct_floor: true,
            mode: DetectionMode::Homoscedastic,
            n_directions: None,
            k_override: None,
            adjust: AdjustOptions::default(),
            max_rounds: 10,
            ar_order: ArOrder::default(),
            force: false,
            jointdiag: JointDiagOptions::default(),
            ml: MlOptions::default(),
        }
    }
}

/// Estimated size of the outlier at one flagged date.
#[derive(Clone, Debug, PartialEq)]
pub struct OutlierSize<R: Real> {
    pub date: usize,
    /// Factor-level part α̂ (K).
    pub alpha_hat: DVector<R>,
    /// Part outside the factor space ζ̂ (N).
    pub zeta_hat: DVector<R>,
    /// ω̂ = Âα̂ + ζ̂.
    pub omega_hat: DVector<R>,
    /// AR order used for each factor.
    pub ar_orders: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct OutlierReport<R: Real> {
    pub detections: Vec<Detection>,
    pub sizes: Vec<OutlierSize<R>>,
    pub k_alpha: f64,
    /// Detection rounds performed.
    pub rounds: usize,
    /// Factor count used for the directions in each round.
    pub k_per_round: Vec<usize>,
    /// Factor count of the final model.
    pub k_hat: usize,
    pub adequacy: AdequacyResult,
    pub model: FactorModel<R>,
    /// Projections of each round, on the series as it stood in that round.
    pub projections: Vec<ProjectionSet<R>>,
    /// Eigenvalues of Γ̂(0) of the observed series, descending.
    pub eigenvalues_observed: DVector<R>,
    /// Eigenvalues of Γ̃(0) of the adjusted series, descending.
    pub eigenvalues_adjusted: DVector<R>,
    pub adjusted: MultiSeries<R>,
}

impl<R: Real> OutlierReport<R> {
    pub fn dates(&self) -> Vec<usize> {
        self.detections.iter().map(|d| d.date).collect()
    }

    pub fn size_at(&self, date: usize) -> Option<&OutlierSize<R>> {
        self.sizes.iter().find(|s| s.date == date)
    }
}

fn choose_k<R: Real>(eigenvalues: &DVector<R>, cfg: &PipelineConfig, n: usize) -> Result<usize> {
    let k = match cfg.k_override {
        Some(k) => k,
        None => select_k(eigenvalues.as_slice(), cfg.select_alpha, cfg.correct_floor)?,
    };
    if k == 0 {
        return Err(invalid("factor count must be positive"));
    }
    Ok(k.min(n - 1))
}

/// Detect, adjust, test adequacy, estimate, and size every outlier.
///
/// Each round recomputes K and the projection directions from the current
/// (adjusted) panel and searches for new dates; rounds stop when nothing new
/// is found or after `max_rounds`. Sizes are measured on the observed panel,
/// centered by the adjusted mean, against the model fitted to the adjusted
/// panel.
pub fn run_pipeline<R: Real>(series: &MultiSeries<R>, cfg: &PipelineConfig) -> Result<OutlierReport<R>> {
    let n = series.n();
    if n < 2 {
        return Err(invalid("need at least two components"));
    }
    if cfg.max_rounds == 0 {
        return Err(invalid("max_rounds must be positive"));
    }
    let lag_needed = usize::from(cfg.mode == DetectionMode::Heteroscedastic);

    let mut flagged: BTreeSet<usize> = BTreeSet::new();
    let mut detections: Vec<Detection> = Vec::new();
    let mut projections = Vec::new();
    let mut k_per_round = Vec::new();
    let mut current = series.clone();
    let mut eigenvalues_observed = None;
    let mut rounds = 0;
    for round in 1..=cfg.max_rounds {
        rounds = round;
        let covs = lag_cov(&current, lag_needed)?;
        let eig = sym_eigen(covs.gamma(0))?;
        let k = choose_k(&eig.eigenvalues, cfg, n)?;
        if eigenvalues_observed.is_none() {
            eigenvalues_observed = Some(eig.eigenvalues.clone());
        }
        k_per_round.push(k);
        let mut dirs = projection_directions(&covs, k, cfg.mode)?;
        if let Some(m) = cfg.n_directions {
            dirs = dirs.truncate(m);
        }
        let proj = dirs.project(&current)?;
        let found = detect(&proj, cfg.k_alpha)?;
        projections.push(proj);
        let fresh: Vec<Detection> = found.into_iter().filter(|d| !flagged.contains(&d.date)).collect();
        if fresh.is_empty() {
            break;
        }
        for mut d in fresh {
            d.round = round;
            flagged.insert(d.date);
            detections.push(d);
        }
        let dates: Vec<usize> = flagged.iter().copied().collect();
        current = adjust(series, &dates, &cfg.adjust)?;
    }
    detections.sort_by_key(|d| d.date);

    let adequacy = adequacy_test_with(&current, &cfg.adequacy)?;
    if adequacy.reject && !cfg.force {
        return Err(Error::AdequacyRejected { bands: adequacy.rejected_bands(), result: Box::new(adequacy) });
    }

    let covs0 = lag_cov(&current, 0)?;
    let eig = sym_eigen(covs0.gamma(0))?;
    let k_hat = choose_k(&eig.eigenvalues, cfg, n)?;
    let model = estimate_model(&current, k_hat, cfg.estimator, &cfg.jointdiag, &cfg.ml)?;

    // Factor series of the observed panel, centered by the adjusted mean.
    let mean = covs0.mean();
    let mut observed = series.values().clone();
    for mut col in observed.column_iter_mut() {
        col -= mean;
    }
    let factors = model.left_inverse() * &observed;
    let all_dates: Vec<usize> = flagged.iter().copied().collect();
    let mut sizes = Vec::with_capacity(all_dates.len());
    for &t0 in &all_dates {
        let y0 = observed.column(t0 - 1).into_owned();
        let x0 = factors.column(t0 - 1).into_owned();
        let zeta_hat = size_zeta(&y0, model.a(), &x0)?;
        let others: Vec<usize> = all_dates.iter().copied().filter(|&d| d != t0).collect();
        let mut alpha_hat = DVector::zeros(k_hat);
        let mut ar_orders = Vec::with_capacity(k_hat);
        for r in 0..k_hat {
            let row: Vec<R> = factors.row(r).iter().copied().collect();
            let fit = fit_alpha(&row, t0, cfg.ar_order, &others)?;
            alpha_hat[r] = fit.alpha;
            ar_orders.push(fit.order);
        }
        let omega_hat = total_size(model.a(), &alpha_hat, &zeta_hat)?;
        sizes.push(OutlierSize { date: t0, alpha_hat, zeta_hat, omega_hat, ar_orders });
    }

    Ok(OutlierReport {
        detections,
        sizes,
        k_alpha: cfg.k_alpha,
        rounds,
        k_per_round,
        k_hat,
        adequacy,
        model,
        projections,
        eigenvalues_observed: eigenvalues_observed.expect("at least one round"),
        eigenvalues_adjusted: eig.eigenvalues,
        adjusted: current,
    })
}

#[derive(Serialize)]
struct SizeRepr {
    date: usize,
    alpha_hat: Vec<f64>,
    zeta_hat: Vec<f64>,
    omega_hat: Vec<f64>,
    ar_orders: Vec<usize>,
}

#[derive(Serialize)]
#[serde(bound(serialize = ""))]
struct ReportRepr<'a, R: Real> {
    k_alpha: f64,
    rounds: usize,
    k_per_round: &'a [usize],
    k_hat: usize,
    detections: &'a [Detection],
    sizes: Vec<SizeRepr>,
    adequacy: &'a AdequacyResult,
    model: &'a FactorModel<R>,
    eigenvalues_observed: Vec<f64>,
    eigenvalues_adjusted: Vec<f64>,
}

impl<R: Real> Serialize for OutlierReport<R> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ReportRepr {
            k_alpha: self.k_alpha,
            rounds: self.rounds,
            k_per_round: &self.k_per_round,
            k_hat: self.k_hat,
            detections: &self.detections,
            sizes: self
                .sizes
                .iter()
                .map(|z| SizeRepr {
                    date: z.date,
                    alpha_hat: vector_f64(&z.alpha_hat),
                    zeta_hat: vector_f64(&z.zeta_hat),
                    omega_hat: vector_f64(&z.omega_hat),
                    ar_orders: z.ar_orders.clone(),
                })
                .collect(),
            adequacy: &self.adequacy,
            model: &self.model,
            eigenvalues_observed: vector_f64(&self.eigenvalues_observed),
            eigenvalues_adjusted: vector_f64(&self.eigenvalues_adjusted),
        }
        .serialize(s)
    }
}
