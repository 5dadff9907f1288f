mod common;

use std::f64::consts::PI;

use common::*;
use dcsc::experiment::spearman;
use dcsc::filter::{
    apply_filter, cheb_coeffs, cold_interval, eigencount, find_lambda_k, warm_interval, Damping, EigencountConfig,
    FilterConfig, FilterPoly, MatvecCounter,
};
use dcsc::graph::{perturb_edges, Graph};
use dcsc::rng::derive;
use dcsc::spectral::{eigendecompose, ideal_projector_apply, spectrum};
use dcsc::csc::random_signals;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

/// Chebyshev coefficient of the step `1{lambda <= lambda_c}` by midpoint
/// quadrature in the angle variable.
fn quadrature_coefficient(lambda_c: f64, lambda_max: f64, j: usize) -> f64 {
    let steps = 1 << 22;
    let h = PI / steps as f64;
    let mut acc = 0.0;
    for s in 0..steps {
        let theta = (s as f64 + 0.5) * h;
        let lambda = 0.5 * lambda_max * (1.0 - theta.cos());
        if lambda <= lambda_c {
            acc += (j as f64 * theta).cos();
        }
    }
    let scale = if j == 0 { 1.0 / PI } else { 2.0 / PI };
    scale * acc * h
}

#[test]
fn coefficients_match_quadrature() {
    let mid = cheb_coeffs(1.0, 2.0, 10, Damping::None).unwrap();
    assert!((mid.coefficients[0] - 0.5).abs() < 1e-12);
    assert!(mid.coefficients[2].abs() < 1e-12);
    assert!((mid.coefficients[1] - 2.0 / PI).abs() < 1e-6);
    assert!((quadrature_coefficient(1.0, 2.0, 1) - 2.0 / PI).abs() < 1e-6);
    for (lc, lmax) in [(0.3, 2.0), (1.7, 2.0), (5.0, 12.0)] {
        let poly = cheb_coeffs(lc, lmax, 8, Damping::None).unwrap();
        for j in 0..=8 {
            let q = quadrature_coefficient(lc, lmax, j);
            assert!((poly.coefficients[j] - q).abs() < 1e-5, "lc {lc} j {j}: {} vs {q}", poly.coefficients[j]);
        }
    }
}

#[test]
fn low_pass_shape_on_grid() {
    let lmax = 2.0;
    for m in [30, 100, 200] {
        for frac in [0.05, 0.2, 0.5, 0.8, 0.95] {
            for damping in [Damping::None, Damping::Jackson] {
                let poly = cheb_coeffs(frac * lmax, lmax, m, damping).unwrap();
                for i in 0..1000 {
                    let v = poly.eval(lmax * i as f64 / 999.0);
                    assert!((-0.15..=1.15).contains(&v), "m {m} frac {frac} {damping:?}: {v}");
                }
                assert!(poly.eval(0.0) >= 0.9);
                assert!(poly.eval(lmax) <= 0.1);
            }
        }
    }
}

#[test]
fn damped_filter_is_close_to_step_away_from_cutoff() {
    let (lc, lmax) = (0.8, 2.0);
    let poly = cheb_coeffs(lc, lmax, 200, Damping::Jackson).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let l = lmax * i as f64 / 999.0;
        if (l - lc).abs() > 0.1 * lmax {
            worst = worst.max((poly.eval(l) - if l <= lc { 1.0 } else { 0.0 }).abs());
        }
    }
    assert!(worst <= 0.02, "{worst}");
}

fn test_graph() -> Graph {
    sbm(60, 3, 8.0, 0.2, 12).0
}

#[test]
fn recurrence_matches_dense_polynomial() {
    let g = test_graph();
    let l = normalized(&g);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let coeffs: Vec<f64> = (0..15).map(|_| rng.random::<f64>() - 0.5).collect();
        let poly = FilterPoly::from_coefficients(coeffs, l.lambda_max_bound()).unwrap();
        let x = DMatrix::from_fn(60, 4, |_, _| rng.random::<f64>() - 0.5);
        let counter = MatvecCounter::new();
        let y = apply_filter(&l, &poly, &x, &counter).unwrap();
        let dense = dense_filter(&l, |v| poly.eval(v)) * &x;
        assert!((y - dense).amax() < 1e-8);
        assert_eq!(counter.get(), 14 * 4);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn filtering_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000, lc in 0.1f64..1.9) {
        let l = normalized(&test_graph());
        let poly = cheb_coeffs(lc, 2.0, 40, Damping::Jackson).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(60, 3, |_, _| rng.random::<f64>() - 0.5);
        let y = DMatrix::from_fn(60, 3, |_, _| rng.random::<f64>() - 0.5);
        let c = MatvecCounter::new();
        let lhs = apply_filter(&l, &poly, &(&x * a + &y * b), &c).unwrap();
        let rhs = apply_filter(&l, &poly, &x, &c).unwrap() * a + apply_filter(&l, &poly, &y, &c).unwrap() * b;
        prop_assert!((lhs - rhs).amax() < 1e-9);
        prop_assert_eq!(c.get(), 3 * 40 * 3);
    }
}

#[test]
fn filtered_signals_stay_near_ideal_projection() {
    let k = 4;
    let (g, _, _) = sbm(300, k, 25.0, 1.0 / 6.0, 3);
    let l = normalized(&g);
    let ev = spectrum(&l).unwrap();
    let lc = 0.5 * (ev[k - 1] + ev[k]);
    let basis = eigendecompose(&l, k).unwrap();
    let r = random_signals(300, 40, 8).unwrap();
    for m in [50, 100, 300] {
        let poly = cheb_coeffs(lc, l.lambda_max_bound(), m, Damping::Jackson).unwrap();
        let approx = apply_filter(&l, &poly, &r, &MatvecCounter::new()).unwrap();
        let exact = ideal_projector_apply(&basis, &r).unwrap();
        let spectral_error = ev
            .iter()
            .map(|&v| (poly.eval(v) - if v <= lc { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        assert!((approx - exact).norm() <= spectral_error * r.norm() + 1e-6);
    }
}

#[test]
fn eigencount_grows_with_cutoff() {
    let (g, _, _) = sbm(200, 4, 15.0, 0.2, 6);
    let l = normalized(&g);
    let counter = MatvecCounter::new();
    let cutoffs: Vec<f64> = (1..=20).map(|i| 0.09 * i as f64).collect();
    let counts: Vec<f64> = cutoffs
        .iter()
        .map(|&c| eigencount(&l, c, 60, &FilterConfig::default(), 5, &counter).unwrap().0)
        .collect();
    assert!(spearman(&cutoffs, &counts) >= 0.95);
    assert_eq!(counter.get(), 20 * 60 * 100);
}

#[test]
fn eigencount_extremes() {
    let (g, _, _) = sbm(400, 2, 12.0, 0.3, 2);
    assert_eq!(g.component_count(), 1);
    let l = normalized(&g);
    let counter = MatvecCounter::new();
    let (all, feats) = eigencount(&l, 2.5, 50, &FilterConfig::default(), 1, &counter).unwrap();
    assert!((all - 400.0).abs() <= 0.15 * 400.0, "{all}");
    assert_eq!(feats.d(), 50);

    let ev = spectrum(&l).unwrap();
    let fine = FilterConfig {
        order: 300,
        ..FilterConfig::default()
    };
    let (one, _) = eigencount(&l, 0.5 * ev[1], 100, &fine, 2, &counter).unwrap();
    assert!((one - 1.0).abs() <= 0.3, "{one}");
}

#[test]
fn dichotomy_on_path() {
    let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    let l = normalized(&g);
    let (found, feats) = find_lambda_k(
        &l,
        2,
        200,
        &FilterConfig::default(),
        &EigencountConfig::default(),
        None,
        3,
        &MatvecCounter::new(),
    )
    .unwrap();
    assert!(found.lambda_k > 1.0 && found.lambda_k < 2.0, "{}", found.lambda_k);
    assert_eq!(feats.d(), 200);
}

#[test]
fn dichotomy_with_zero_eigenvalues() {
    let (g, _, _) = sbm(200, 4, 15.0, 0.0, 9);
    assert_eq!(g.component_count(), 4);
    let l = normalized(&g);
    let ev = spectrum(&l).unwrap();
    for seed in 0..5 {
        let (found, _) = find_lambda_k(
            &l,
            4,
            100,
            &FilterConfig::default(),
            &EigencountConfig::default(),
            None,
            seed,
            &MatvecCounter::new(),
        )
        .unwrap();
        assert!(found.lambda_k > 0.0 && found.lambda_k < ev[4], "{} vs {}", found.lambda_k, ev[4]);
        assert!(found.iters > 0);
    }
}

#[test]
fn warm_start_needs_no_more_iterations_after_small_change() {
    let k = 4;
    let search = EigencountConfig::default();
    let filter = FilterConfig::default();
    let mut not_worse = 0;
    for seed in 0..50 {
        let (g, labels, params) = sbm(500, k, 25.0, 1.0 / 6.0, seed);
        let l0 = normalized(&g);
        let (prev, _) = find_lambda_k(&l0, k, 100, &filter, &search, None, seed, &MatvecCounter::new()).unwrap();
        let h = perturb_edges(&g, 0.03, &params, &labels, derive(seed, 1)).unwrap();
        let l1 = normalized(&h);
        let s = derive(seed, 2);
        let (cold, _) = find_lambda_k(&l1, k, 100, &filter, &search, Some(cold_interval(&l1)), s, &MatvecCounter::new()).unwrap();
        let warm_iv = warm_interval(&l1, prev.lambda_k);
        let (warm, _) = find_lambda_k(&l1, k, 100, &filter, &search, Some(warm_iv), s, &MatvecCounter::new()).unwrap();
        not_worse += usize::from(warm.iters <= cold.iters);
    }
    assert!(not_worse >= 40, "{not_worse}/50");
}
