mod common;

use common::*;
use nalgebra::DMatrix;
use odfm::moments::lag_cov;
use odfm::simulation::*;
use proptest::prelude::*;

fn small(preset: &str, reps: usize) -> SimConfig {
    let mut cfg = SimConfig::preset(preset).unwrap();
    cfg.replications = reps;
    cfg
}

#[test]
fn presets_load_and_validate() {
    for name in SimConfig::PRESETS {
        let cfg = SimConfig::preset(name).unwrap();
        assert_eq!(cfg.n(), if name == "section7" { 5 } else { 20 });
        assert_eq!(cfg.k(), 4);
        assert!(cfg.validate().is_ok());
    }
    assert!(SimConfig::preset("nope").is_err());
    let cfg = SimConfig::preset("section7").unwrap();
    assert_eq!(cfg.t, 100);
    assert_eq!(cfg.outlier.dates, vec![100]);
    assert_eq!(cfg.omega().as_slice(), &[1.5, -1.0, 0.0, -4.0, 5.0]);
    assert_eq!(SimConfig::preset("section8-patch").unwrap().outlier.dates.len(), 3);
}

#[test]
fn validation_rejects_bad_configurations() {
    let base = SimConfig::preset("section7").unwrap();
    let bad: Vec<SimConfig> = vec![
        SimConfig { replications: 0, ..base.clone() },
        SimConfig { burn_in: 99, ..base.clone() },
        SimConfig { phi: vec![1.0, 0.5, 0.5, 0.5], ..base.clone() },
        SimConfig { theta: vec![0.0, 1.2, 0.0, 0.0], ..base.clone() },
        SimConfig { theta: vec![0.0], ..base.clone() },
        SimConfig { sigma_eta: -1.0, ..base.clone() },
        SimConfig { t: 10, ..base.clone() },
        SimConfig { outlier: OutlierSpec { omega: vec![1.0; 5], dates: vec![101] }, ..base.clone() },
        SimConfig { outlier: OutlierSpec { omega: vec![1.0; 4], dates: vec![50] }, ..base.clone() },
        SimConfig { a: vec![vec![1.0, 0.0, 0.0, 0.0]; 5], ..base.clone() },
        SimConfig { a: vec![vec![1.0; 4]; 4], ..base.clone() },
    ];
    for (i, cfg) in bad.iter().enumerate() {
        assert!(cfg.validate().is_err(), "case {i} accepted");
        assert!(monte_carlo(cfg).is_err(), "case {i} ran");
    }
}

#[test]
fn config_reads_from_json_with_defaults() {
    let text = r#"{"a": [[1.0], [0.5], [0.2]], "phi": [0.5], "t": 50, "sigma_eta": 0.3, "replications": 3}"#;
    let cfg: SimConfig = serde_json::from_str(text).unwrap();
    assert!(cfg.validate().is_ok());
    assert!(cfg.burn_in >= 100);
    assert_eq!(cfg.theta_or_zero(), vec![0.0]);
    assert_eq!(cfg.innovation, InnovationScaling::UnitVariance);
    assert!(cfg.omega().iter().all(|w| *w == 0.0));
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let cfg = SimConfig::preset("section7").unwrap();
    assert_eq!(simulate_panel(&cfg, 3).unwrap(), simulate_panel(&cfg, 3).unwrap());
    assert_ne!(simulate_panel(&cfg, 3).unwrap(), simulate_panel(&cfg, 4).unwrap());
    let other = SimConfig { seed: cfg.seed + 1, ..cfg.clone() };
    assert_ne!(simulate_panel(&cfg, 3).unwrap(), simulate_panel(&other, 3).unwrap());
}

#[test]
fn monte_carlo_is_independent_of_thread_count() {
    let cfg = small("section8-isolated", 40);
    let one = monte_carlo_with_threads(&cfg, Some(1)).unwrap();
    let four = monte_carlo_with_threads(&cfg, Some(4)).unwrap();
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&four).unwrap());
    let outcomes = run_replications(&cfg).unwrap();
    assert!(outcomes.iter().enumerate().all(|(i, o)| o.index == i));
}

#[test]
fn innovation_variances() {
    let v = innovation_variance(0.7, -0.5, InnovationScaling::UnitVariance);
    assert!((v - 0.51 / 1.95).abs() < 1e-15);
    assert_eq!(innovation_variance(0.7, 0.0, InnovationScaling::UnitVariance), 1.0 - 0.49);
    assert!((innovation_variance(0.7, -0.5, InnovationScaling::CovarianceDiagonal) - 1.95).abs() < 1e-15);
}

fn acf1(row: &[f64]) -> (f64, f64) {
    let t = row.len() as f64;
    let m = row.iter().sum::<f64>() / t;
    let c0 = row.iter().map(|x| (x - m).powi(2)).sum::<f64>() / t;
    let c1 = row.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / t;
    (c0, c1 / c0)
}

#[test]
fn arma_factors_have_unit_variance_and_the_right_autocorrelation() {
    let t = 40_000;
    let mut g = rng(11);
    let x = gen_factors_varma(&[0.7, -0.7, 0.0], &[-0.5, 0.0, 0.0], t, 200, InnovationScaling::UnitVariance, &mut g).unwrap();
    let row = |i: usize| x.row(i).iter().copied().collect::<Vec<_>>();
    let tol = 6.0 / (t as f64).sqrt();
    // ARMA(1,1): ρ(1) = (1 − φθ)(φ − θ)/(1 + θ² − 2φθ).
    let (v0, r0) = acf1(&row(0));
    assert!((v0 - 1.0).abs() < 0.1, "var {v0}");
    assert!((r0 - 1.35 * 1.2 / 1.95).abs() < tol, "ρ {r0}");
    let (v1, r1) = acf1(&row(1));
    assert!((v1 - 1.0).abs() < 0.1);
    assert!((r1 + 0.7).abs() < tol);
    let (v2, r2) = acf1(&row(2));
    assert!((v2 - 1.0).abs() < 0.05);
    assert!(r2.abs() < tol);
}

#[test]
fn zero_theta_matches_the_ar_generator() {
    let a = gen_factors_var(&[0.5, -0.3], 50, 100, &mut rng(12)).unwrap();
    let b = gen_factors_varma(&[0.5, -0.3], &[0.0, 0.0], 50, 100, InnovationScaling::UnitVariance, &mut rng(12)).unwrap();
    assert_eq!(a, b);
    assert!(gen_factors_var(&[1.0], 50, 100, &mut rng(12)).is_err());
    assert!(gen_factors_varma(&[0.5], &[0.2, 0.1], 50, 100, InnovationScaling::UnitVariance, &mut rng(12)).is_err());
}

#[test]
fn standardized_rows_have_unit_sample_variance() {
    let mut x = gaussian_matrix(&mut rng(13), 3, 80) * 4.0;
    standardize_rows(&mut x);
    for i in 0..3 {
        let (v, _) = acf1(&x.row(i).iter().copied().collect::<Vec<_>>());
        assert!((v - 1.0).abs() < 1e-12);
    }
}

#[test]
fn example_component_variances() {
    // Var(y_i) = Σ_k A_ik² + σ²_η with unit-variance factors.
    let mut cfg = SimConfig::preset("section7").unwrap();
    cfg.t = 20_000;
    cfg.outlier = Default::default();
    let s = simulate_panel(&cfg, 0).unwrap();
    let covs = lag_cov(&s, 0).unwrap();
    let g0 = covs.gamma(0);
    let a = cfg.a_matrix();
    let want = (&a * a.transpose()).diagonal().add_scalar(cfg.sigma_eta.powi(2));
    assert!((want[0] - 1.04).abs() < 1e-12 && (want[4] - 0.29).abs() < 1e-12);
    for i in 0..5 {
        assert!((g0[(i, i)] / want[i] - 1.0).abs() < 0.1, "component {i}: {} vs {}", g0[(i, i)], want[i]);
    }
}

#[test]
fn outliers_are_added_at_their_dates_only() {
    let cfg = SimConfig::preset("section8-patch").unwrap();
    let clean = simulate_panel(&SimConfig { outlier: Default::default(), ..cfg.clone() }, 9).unwrap();
    let dirty = simulate_panel(&cfg, 9).unwrap();
    let diff = dirty.values() - clean.values();
    for t in 1..=cfg.t {
        let d = diff.column(t - 1).into_owned();
        if cfg.outlier.dates.contains(&t) {
            assert!((d - cfg.omega()).amax() < 1e-12);
        } else {
            assert_eq!(d.amax(), 0.0);
        }
    }
}

#[test]
fn finite_ma_generator() {
    let psi = vec![DMatrix::from_element(3, 1, 1.0)];
    let s = gen_finite_ma(&psi, 0.0, 10, &mut rng(14)).unwrap();
    for t in 1..=10 {
        let c = s.at(t);
        assert!((c[0] - c[1]).abs() == 0.0 && (c[1] - c[2]).abs() == 0.0);
    }
    assert!(gen_finite_ma(&[], 0.1, 10, &mut rng(14)).is_err());
    assert!(gen_finite_ma(&[DMatrix::zeros(3, 1), DMatrix::zeros(2, 1)], 0.1, 10, &mut rng(14)).is_err());
}

#[test]
fn summary_fields_are_consistent() {
    let cfg = small("section8-patch", 40);
    let sum = monte_carlo(&cfg).unwrap();
    assert_eq!(sum.replications, 40);
    assert_eq!(sum.dates.len(), 3);
    for b in sum.dates.iter().map(|d| d.detected).chain([sum.all_dates_detected, sum.false_detection]) {
        assert!((0.0..=100.0).contains(&b.pct));
        let sd = b.block_sd.unwrap();
        assert!((b.block_se.unwrap() - sd / (40f64).sqrt()).abs() < 1e-12);
    }
    let k_total: f64 = sum.k_hat_pct.values().sum();
    assert!(k_total <= 100.0 + 1e-9);
    assert_eq!(sum.omega_bias.len(), 20);
    let (alpha, zeta) = cfg.truth().unwrap();
    assert_eq!(sum.true_alpha, alpha.as_slice());
    assert_eq!(sum.true_zeta, zeta.as_slice());
    assert!(sum.to_table().contains("100"));

    let few = monte_carlo(&small("section7", 5)).unwrap();
    assert!(few.dates[0].detected.block_sd.is_none());
}

#[test]
fn bias_experiment_without_outlier_is_zero() {
    let cfg = BiasConfig { omega: vec![0.0, 0.0], t0: 50, t: 100, replications: 20, seed: 1, noise_cov: None, freq_index: None, half_width: 3 };
    let rep = bias_experiment(&cfg).unwrap();
    assert_eq!(rep.freq_index, 25);
    for e in rep.entries() {
        assert_eq!(e.mean, 0.0);
        assert_eq!(e.mean_z(), 0.0);
    }
}

#[test]
fn bias_experiment_variance_target() {
    let cfg = BiasConfig {
        omega: vec![1.0, 2.0],
        t0: 100,
        t: 200,
        replications: 500,
        seed: 3,
        noise_cov: Some(vec![vec![1.0, 0.3], vec![0.3, 2.0]]),
        freq_index: Some(40),
        half_width: 2,
    };
    let rep = bias_experiment(&cfg).unwrap();
    assert_eq!(rep.gamma0.len(), 3);
    let e11 = &rep.gamma0[0];
    assert_eq!((e11.r, e11.s), (1, 1));
    assert!((e11.variance_target.unwrap() - 4.0).abs() < 1e-12);
    // (1,2): ω₂²σ₁₁ + ω₁²σ₂₂ + 2ω₁ω₂σ₁₂.
    assert!((rep.gamma0[1].variance_target.unwrap() - (4.0 + 2.0 + 1.2)).abs() < 1e-12);
    for e in rep.entries() {
        assert!(e.mean_z() < 4.0, "({}, {}) z = {}", e.r, e.s, e.mean_z());
    }
}

#[test]
fn bias_experiment_errors() {
    let base = BiasConfig { omega: vec![1.0], t0: 5, t: 40, replications: 10, seed: 0, noise_cov: None, freq_index: None, half_width: 2 };
    assert!(bias_experiment(&BiasConfig { t0: 41, ..base.clone() }).is_err());
    assert!(bias_experiment(&BiasConfig { replications: 1, ..base.clone() }).is_err());
    assert!(bias_experiment(&BiasConfig { freq_index: Some(1), ..base.clone() }).is_err());
    assert!(bias_experiment(&BiasConfig { noise_cov: Some(vec![vec![-1.0]]), ..base.clone() }).is_err());
    assert!(bias_experiment(&BiasConfig { omega: vec![], ..base.clone() }).is_err());
    assert!(bias_experiment(&base).is_ok());
}

proptest! {
    #![proptest_config(pt_config(16))]
    #[test]
    fn simulation_is_bit_reproducible(seed in any::<u64>(), index in 0u64..1000) {
        let cfg = SimConfig { seed, ..SimConfig::preset("section7").unwrap() };
        prop_assert_eq!(simulate_panel(&cfg, index).unwrap(), simulate_panel(&cfg, index).unwrap());
    }

    #[test]
    fn replication_rng_matches_by_seed_and_index(seed in any::<u64>(), index in any::<u64>()) {
        use rand::Rng;
        let a: [u64; 4] = replication_rng(seed, index).random();
        let b: [u64; 4] = replication_rng(seed, index).random();
        prop_assert_eq!(a, b);
    }
}
