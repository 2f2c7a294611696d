//! Acceptance criteria 1 to 9. Each test prints one `PASS`/`FAIL` line with
//! the measured quantities, then asserts. Run with `--nocapture` to see them.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use odfm::adequacy::{adequacy_test, adequacy_test_with, chi2_critical, AdequacyOptions, Calibration};
use odfm::datamodel::MultiSeries;
use odfm::factors::{decompose_true, svd_decompose};
use odfm::moments::{lag_cov, LagCovSet};
use odfm::outliers::{projection_directions, run_pipeline, DetectionMode};
use odfm::simulation::{bias_experiment, gen_finite_ma, monte_carlo, simulate_panel, BiasConfig, SimConfig};
use proptest::prelude::*;
use rand::Rng;
use rayon::prelude::*;

fn report(id: u32, ok: bool, detail: String) {
    println!("criterion {id}: {} | {detail}", if ok { "PASS" } else { "FAIL" });
}

#[test]
fn criterion_1_exact_decomposition() {
    let (alpha, zeta) = decompose_true(&example_omega(), &example_a()).unwrap();
    let want_alpha = [1.161, -0.903, -0.903, -0.839];
    let want_zeta = [0.3387, -0.6774, 1.3548, -2.7097, 5.4194];
    let err_a = alpha.iter().zip(want_alpha).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let err_z = zeta.iter().zip(want_zeta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ok = err_a < 5e-4 && err_z < 5e-4;
    report(1, ok, format!("max |α − α*| = {err_a:.2e}, max |ζ − ζ*| = {err_z:.2e} (tol 5e-4)"));
    assert!(ok);
}

#[test]
fn criterion_2_svd_identities() {
    let mut g = rng(2);
    let mut worst_a: f64 = 0.0;
    let mut worst_r: f64 = 0.0;
    for _ in 0..50 {
        let n = g.random_range(2..=10);
        let t = g.random_range(n + 2..=60);
        let k = g.random_range(1..n);
        let y = gaussian_matrix(&mut g, n, t);
        let series = MultiSeries::from_matrix(y).unwrap();
        let parts = svd_decompose(&series, k).unwrap();

        let yc = &parts.y;
        let (vals, vecs) = jacobi_eigen(&(yc * yc.transpose()));
        let w = vecs.columns(0, k).into_owned();
        let w_lambda = DMatrix::from_fn(n, k, |i, c| w[(i, c)] * vals[c].max(0.0).sqrt());
        let a_direct = yc * parts.x.transpose();
        let aligned = align_columns(&a_direct, &w_lambda);
        worst_a = worst_a.max((&a_direct - &aligned).amax()).max((&parts.a - &a_direct).amax());

        let resid = yc - &parts.a * &parts.x;
        let discarded: f64 = vals[k..].iter().sum();
        worst_r = worst_r.max((resid.norm_squared() - discarded).abs());
    }
    let ok = worst_a < 1e-8 && worst_r < 1e-8;
    report(2, ok, format!("50 panels: max |YX′ − WΛ^½| = {worst_a:.2e}, max |‖E‖² − Σ discarded| = {worst_r:.2e} (tol 1e-8)"));
    assert!(ok);
}

fn clean_section7() -> SimConfig {
    let mut cfg = SimConfig::preset("section7").unwrap();
    cfg.outlier.omega.clear();
    cfg.outlier.dates.clear();
    cfg.name = "section7-clean".into();
    cfg
}

/// Per-band rejections under the standard and the antisymmetric calibration.
type Rejections = (Vec<bool>, Vec<bool>);

#[test]
fn criterion_3_adequacy_size() {
    let cfg = SimConfig { replications: 1000, ..clean_section7() };
    let reps = cfg.replications;
    let critical = chi2_critical(25.0, 0.05).unwrap();
    let results: Vec<Rejections> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let panel = simulate_panel(&cfg, r).unwrap();
            let std = adequacy_test(&panel, 4, 0.05).unwrap();
            let anti = adequacy_test_with(
                &panel,
                &AdequacyOptions { calibration: Calibration::Antisymmetric, ..Default::default() },
            )
            .unwrap();
            (std.bands.iter().map(|b| b.reject).collect(), anti.bands.iter().map(|b| b.reject).collect())
        })
        .collect();
    let rate = |pick: &dyn Fn(&Rejections) -> &Vec<bool>, b: usize| {
        results.iter().filter(|x| pick(x)[b]).count() as f64 / reps as f64
    };
    let std_rates: Vec<f64> = (0..4).map(|b| rate(&|x| &x.0, b)).collect();
    let anti_rates: Vec<f64> = (0..4).map(|b| rate(&|x| &x.1, b)).collect();
    println!("  antisymmetric calibration (informational): per-band rates {anti_rates:?}");
    let ok = (critical - 37.65).abs() < 5e-3 && std_rates.iter().all(|r| (0.03..=0.08).contains(r));
    report(
        3,
        ok,
        format!("χ²₂₅ critical {critical:.3} (want 37.65); per-band rejection rates {std_rates:?} (want [0.03, 0.08])"),
    );
    assert!(ok);
}

fn isolated_run() -> &'static odfm::simulation::MonteCarloSummary {
    use std::sync::OnceLock;
    static RUN: OnceLock<odfm::simulation::MonteCarloSummary> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = SimConfig { replications: 200, ..SimConfig::preset("section8-isolated").unwrap() };
        monte_carlo(&cfg).unwrap()
    })
}

#[test]
fn criterion_4_isolated_detection() {
    let s = isolated_run();
    let det = s.dates[0].detected.pct;
    let fal = s.false_detection.pct;
    let k4 = s.k_hat_pct.get(&4).copied().unwrap_or(0.0);
    let ok = det >= 90.0 && fal <= 6.0 && k4 >= 98.0;
    report(
        4,
        ok,
        format!(
            "200 reps: detection {det:.1}% (≥ 90), false {fal:.1}% (≤ 6), K̂ = 4 in {k4:.1}% (≥ 98); failures {}",
            s.failures
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_5_patch_detection() {
    let cfg = SimConfig { replications: 200, ..SimConfig::preset("section8-patch").unwrap() };
    let s = monte_carlo(&cfg).unwrap();
    let per: Vec<f64> = s.dates.iter().map(|d| d.detected.pct).collect();
    let whole = s.all_dates_detected.pct;
    let ok = per.iter().all(|p| *p >= 95.0) && whole >= 92.0;
    report(5, ok, format!("200 reps: t = 99/100/101 detected {per:?}% (each ≥ 95), whole patch {whole:.1}% (≥ 92)"));
    assert!(ok);
}

#[test]
fn criterion_6_size_bands() {
    let s = isolated_run();
    let zeta = s.zeta_error.map(|z| z.mean).unwrap_or(f64::NAN);
    let omega = s.omega_error.map(|z| z.mean).unwrap_or(f64::NAN);
    let bias = s.omega_bias_avg.unwrap_or(f64::NAN);
    let ok = (0.6..=1.0).contains(&zeta) && bias.abs() <= 0.15 && (4.0..=10.0).contains(&omega);
    report(
        6,
        ok,
        format!("mean ‖ζ̂ − ζ‖ = {zeta:.4} ([0.6, 1.0]), mean ω̂ bias = {bias:.4} (±0.15), mean ‖ω̂ − ω‖ = {omega:.3} ([4, 10])"),
    );
    assert!(ok);
}

#[test]
fn criterion_7_bias_oracles() {
    let cfg = BiasConfig {
        omega: vec![1.0, 2.0],
        t0: 100,
        t: 200,
        replications: 2000,
        seed: 7,
        noise_cov: None,
        freq_index: None,
        half_width: 5,
    };
    let rep = bias_experiment(&cfg).unwrap();
    let mean_z = rep.entries().map(|e| e.mean_z()).fold(0.0, f64::max);
    let var_z = rep.gamma0.iter().filter_map(|e| e.variance_z()).fold(0.0, f64::max);
    for e in rep.entries() {
        println!("  ({},{}) mean {:.4} ± {:.4} target {:.4}", e.r, e.s, e.mean, e.se, e.target);
    }
    for e in &rep.gamma0 {
        println!("  ({},{}) variance {:.4} ± {:.4} target {:?}", e.r, e.s, e.variance, e.variance_se, e.variance_target);
    }
    let ok = mean_z <= 3.0 && var_z <= 5.0;
    report(7, ok, format!("2000 reps: worst mean deviation {mean_z:.2} SE (≤ 3), worst variance deviation {var_z:.2} SE (≤ 5)"));
    assert!(ok);
}

/// A moment set whose Γ(0) is `gamma0` exactly, from a panel of ± pairs.
fn exact_covs(gamma0: DMatrix<f64>) -> LagCovSet<f64> {
    let n = gamma0.nrows();
    let (vals, vecs) = jacobi_eigen(&gamma0);
    let root = &vecs * DMatrix::from_diagonal(&DVector::from_iterator(n, vals.iter().map(|v| v.max(0.0).sqrt())));
    // Columns ±√(n)·root give mean zero and covariance root·root′ = Γ.
    let t = 2 * n;
    let scale = (t as f64 / 2.0).sqrt();
    let mut y = DMatrix::zeros(n, t);
    for c in 0..n {
        y.set_column(2 * c, &(root.column(c) * scale));
        y.set_column(2 * c + 1, &(root.column(c) * -scale));
    }
    lag_cov(&MultiSeries::from_matrix(y).unwrap(), 0).unwrap()
}

#[test]
fn criterion_8a_projection_exact() {
    let a = example_a();
    let gamma0 = &a * a.transpose() + DMatrix::identity(5, 5) * 0.04;
    let covs = exact_covs(gamma0.clone());
    assert!((covs.gamma(0) - &gamma0).amax() < 1e-12);
    let dirs = projection_directions(&covs, 4, DetectionMode::Homoscedastic).unwrap();
    let worst = (0..dirs.len()).map(|c| (dirs.vectors.column(c).transpose() * &a).norm()).fold(0.0, f64::max);
    let ok = worst < 1e-8 && dirs.len() == 1;
    report(8, ok, format!("exact Γ(0): {} direction(s), max ‖z′A‖ = {worst:.2e} (< 1e-8)", dirs.len()));
    assert!(ok);
}

proptest! {
    #![proptest_config(pt_config(16))]
    #[test]
    fn criterion_8b_projection_finite_ma(seed in 0u64..10_000, s in 1usize..=2, k in 1usize..=2) {
        let n = 10;
        let t = 400;
        let mut g = rng(seed);
        let psi: Vec<DMatrix<f64>> = (0..s).map(|_| gaussian_matrix(&mut g, n, k)).collect();
        let panel = gen_finite_ma(&psi, 0.3, t, &mut g).unwrap();
        let covs = lag_cov(&panel, 0).unwrap();
        let dirs = projection_directions(&covs, s * k, DetectionMode::Homoscedastic).unwrap();
        let bound = 5.0 / (t as f64).sqrt();
        let worst = (0..dirs.len())
            .flat_map(|c| psi.iter().map(|p| (dirs.vectors.column(c).transpose() * p).norm()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        prop_assert!(worst < bound, "max ‖z′ψ_u‖ = {worst} ≥ {bound}");
    }
}

#[test]
fn criterion_9_end_of_sample() {
    let cfg = SimConfig::preset("section7").unwrap();
    assert_eq!(cfg.outlier.dates, vec![cfg.t]);
    let hits: Vec<bool> = (0..500u64)
        .into_par_iter()
        .map(|r| {
            let panel = simulate_panel(&cfg, r).unwrap();
            match run_pipeline(&panel, &cfg.pipeline) {
                Ok(rep) => rep.detections.iter().any(|d| d.date == cfg.t && d.score > 4.47),
                Err(_) => false,
            }
        })
        .collect();
    let rate = 100.0 * hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64;
    let ok = rate >= 90.0;
    report(9, ok, format!("500 reps: outlier at t = T detected with score > 4.47 in {rate:.1}% (≥ 90)"));
    assert!(ok);
}
