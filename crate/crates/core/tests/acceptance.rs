//! End-to-end acceptance checks. Each prints one PASS/FAIL line to stderr
//! (uncaptured) with the measured statistic and runtime, then asserts.

mod common;

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use common::*;
use dcsc::cluster::{kmeans, KmeansConfig};
use dcsc::csc::{alignment_q, random_signals};
use dcsc::experiment::{self, perturb, spearman, ExperimentConfig, ExperimentKind, PerturbModel};
use dcsc::filter::{eigencount, FilterConfig, MatvecCounter};
use dcsc::rng::derive;
use dcsc::spectral::{edge_similarity, eigendecompose, eigengap_alpha, ideal_projector_apply, spectral_similarity, spectrum};
use rand::{Rng, SeedableRng};

// One core may be all there is; keep runtimes honest by running serially.
static SERIAL: Mutex<()> = Mutex::new(());

fn report(criterion: u32, pass: bool, budget: Duration, started: Instant, detail: String) {
    let elapsed = started.elapsed();
    let ok = pass && elapsed < budget;
    let line = format!(
        "criterion {criterion:>2}: {} | {detail} | {:.1}s of {}s",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(pass, "{line}");
    assert!(elapsed < budget, "{line}");
}

fn sigma_error(sigma: &[f64]) -> f64 {
    sigma.iter().map(|s| (s - 1.0).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn criterion_01_alignment_equality() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (n, k, d) = (200, 4, 12);
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let (g, _, _) = sbm(n, k, 10.0, 0.2, seed);
        let basis = eigendecompose(&normalized(&g), k).unwrap();
        let r = random_signals(n, d, derive(seed, 77)).unwrap();
        let psi = ideal_projector_apply(&basis, &r).unwrap();
        let (q, sigma) = alignment_q(&(basis.vectors.transpose() * &r)).unwrap();
        let mut phi_pad = DMatrix::zeros(n, d);
        phi_pad.columns_mut(0, k).copy_from(&basis.vectors);
        let lhs = (&psi - phi_pad * q).norm();
        worst = worst.max((lhs - sigma_error(&sigma)).abs());
    }
    report(1, worst <= 1e-8, Duration::from_secs(30), start, format!("max gap {worst:.2e} over 100 seeds"));
}

#[test]
fn criterion_02_feature_error_bound() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (k, d, t) = (4usize, 64usize, 2.0f64);
    let (g, _, _) = sbm(300, k, 12.0, 0.2, 5);
    let basis = eigendecompose(&normalized(&g), k).unwrap();
    let bound = (k as f64 / d as f64).sqrt() * ((k as f64).sqrt() + t);
    let trials = 500;
    let violations = (0..trials)
        .filter(|&s| {
            let r = random_signals(g.n(), d, 1000 + s as u64).unwrap();
            let (_, sigma) = alignment_q(&(basis.vectors.transpose() * r)).unwrap();
            sigma_error(&sigma) > bound
        })
        .count();
    let rate = violations as f64 / trials as f64;
    let allowed = (-2.0f64).exp() + 0.02;
    report(
        2,
        rate <= allowed,
        Duration::from_secs(60),
        start,
        format!("violation rate {rate:.3} (allowed {allowed:.3})"),
    );
}

/// Ideal-projector features `H R` of a small graph.
fn ideal_features(basis: &dcsc::spectral::SpectralBasis, d: usize, seed: u64) -> DMatrix<f64> {
    let r = random_signals(basis.n(), d, seed).unwrap();
    ideal_projector_apply(basis, &r).unwrap()
}

fn small_graph(seed: u64) -> (dcsc::graph::Graph, dcsc::graph::LabelVector, dcsc::graph::SbmParams) {
    sbm(12, 2, 4.0, 0.25, seed)
}

#[test]
fn criterion_03_static_cost_bound() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (k, d, t) = (2usize, 16usize, 2.0);
    let slack = dcsc::csc::static_cost_bound(k, d, t);
    let (mut lower_ok, mut violations) = (true, 0);
    let seeds = 300;
    for seed in 0..seeds {
        let (g, _, _) = small_graph(seed);
        let basis = eigendecompose(&normalized(&g), k).unwrap();
        let (c_phi, _) = exhaustive_kmeans(&basis.vectors, k);
        let (_, labels) = exhaustive_kmeans(&ideal_features(&basis, d, derive(seed, 3)), k);
        let c_psi = sse_cost(&basis.vectors, &labels, k);
        lower_ok &= c_phi <= c_psi + 1e-12;
        violations += usize::from(c_psi > c_phi + slack);
    }
    let rate = violations as f64 / seeds as f64;
    report(
        3,
        lower_ok && rate <= 0.15,
        Duration::from_secs(120),
        start,
        format!("lower bound held: {lower_ok}; upper bound violation rate {rate:.3}"),
    );
}

#[test]
fn criterion_04_dynamic_cost_bound() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (k, d, c, delta) = (2usize, 16usize, 2.0, 1.0);
    let seeds = 300u64;
    let mut summary = Vec::new();
    let mut pass = true;
    for p in [0.25, 0.5] {
        let reused = (d as f64 * p).floor() as usize;
        let (mut rho_viol, mut edge_viol, mut edge_cases) = (0, 0, 0);
        for seed in 0..seeds {
            let (g0, labels, params) = small_graph(seed);
            let (g1, _) = perturb(&g0, PerturbModel::Combined, 0.1, &params, &labels, derive(seed, 9)).unwrap();
            let (l0, l1) = (normalized(&g0), normalized(&g1));
            let (b0, b1) = (eigendecompose(&l0, k).unwrap(), eigendecompose(&l1, k).unwrap());
            let old = ideal_features(&b0, d, derive(seed, 1));
            let new = ideal_features(&b1, d, derive(seed, 2));
            let mut theta = new.clone();
            theta.columns_mut(0, reused).copy_from(&old.columns(0, reused));
            let (c_phi, _) = exhaustive_kmeans(&b1.vectors, k);
            let (_, labels_theta) = exhaustive_kmeans(&theta, k);
            let c_theta = sse_cost(&b1.vectors, &labels_theta, k);
            let base = c_phi + dcsc::csc::static_cost_bound(k, d, c);
            let rho = spectral_similarity(&b0, &b1).unwrap();
            rho_viol += usize::from(c_theta > base + (1.0 + delta) * p * rho);
            let alpha = eigengap_alpha(&b0, &b1);
            if alpha > 0.0 {
                edge_cases += 1;
                let proxy = 2f64.sqrt() * edge_similarity(&l0, &l1).unwrap() / alpha;
                edge_viol += usize::from(c_theta > base + (1.0 + delta) * p * proxy);
            }
        }
        let rho_rate = rho_viol as f64 / seeds as f64;
        let edge_rate = edge_viol as f64 / edge_cases.max(1) as f64;
        pass &= rho_rate <= 0.15 && edge_rate <= 0.15;
        summary.push(format!("p={p}: rho-bound violations {rho_rate:.3}, edge-bound {edge_rate:.3} of {edge_cases}"));
    }
    report(4, pass, Duration::from_secs(180), start, summary.join("; "));
}

#[test]
fn criterion_05_subspace_perturbation() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let k = 4;
    let (mut pairs, mut held, mut seed) = (0, 0, 0u64);
    while pairs < 50 && seed < 500 {
        let (g0, labels, params) = sbm(300, k, 25.0, 1.0 / 6.0, seed);
        let model = [PerturbModel::Edges, PerturbModel::Nodes, PerturbModel::Combined][seed as usize % 3];
        let (g1, _) = perturb(&g0, model, 0.03, &params, &labels, derive(seed, 4)).unwrap();
        seed += 1;
        let (l0, l1) = (normalized(&g0), normalized(&g1));
        let (b0, b1) = (eigendecompose(&l0, k).unwrap(), eigendecompose(&l1, k).unwrap());
        let alpha = eigengap_alpha(&b0, &b1);
        if alpha <= 0.01 {
            continue;
        }
        pairs += 1;
        let rho = spectral_similarity(&b0, &b1).unwrap();
        held += usize::from(rho <= 2f64.sqrt() / alpha * edge_similarity(&l0, &l1).unwrap());
    }
    report(
        5,
        pairs == 50 && held == pairs,
        Duration::from_secs(120),
        start,
        format!("bound held in {held}/{pairs} pairs ({seed} drawn)"),
    );
}

#[test]
fn criterion_06_eigencount_unbiased() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (g, _, _) = sbm(500, 4, 25.0, 1.0 / 6.0, 11);
    let l = normalized(&g);
    let ev = spectrum(&l).unwrap();
    let cutoff = 0.5 * (ev[3] + ev[4]);
    let filter = FilterConfig {
        order: 300,
        ..FilterConfig::default()
    };
    let counter = MatvecCounter::new();
    let estimates: Vec<f64> = (0..200)
        .map(|s| eigencount(&l, cutoff, 100, &filter, derive(s, 6), &counter).unwrap().0)
        .collect();
    let m = mean(&estimates);
    report(
        6,
        (m - 4.0).abs() <= 0.05 * 4.0,
        Duration::from_secs(60),
        start,
        format!("mean estimate {m:.4} at cut-off {cutoff:.4} (lambda_4 {:.4}, lambda_5 {:.4})", ev[3], ev[4]),
    );
}

fn medians(rows: &[experiment::SimilarityRow], key: impl Fn(&experiment::SimilarityRow) -> f64) -> (Vec<f64>, Vec<f64>) {
    let mut keys: Vec<f64> = rows.iter().map(&key).collect();
    keys.sort_by(f64::total_cmp);
    keys.dedup();
    let meds = keys
        .iter()
        .map(|&kv| {
            let rho: Vec<f64> = rows.iter().filter(|r| key(r) == kv).map(|r| r.rho).collect();
            experiment::median(&rho)
        })
        .collect();
    (keys, meds)
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

#[test]
fn criterion_07_similarity_trends() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let base = ExperimentConfig {
        kind: ExperimentKind::Similarity,
        replications: 20,
        seed: 2024,
        ..ExperimentConfig::default()
    };
    let mut pass = true;
    let mut detail = Vec::new();
    let mut check = |name: &str, keys: Vec<f64>, meds: Vec<f64>| {
        let rs = spearman(&keys, &meds);
        let ok = strictly_increasing(&meds) && rs >= 0.9;
        pass &= ok;
        let shown: Vec<String> = meds.iter().map(|m| format!("{m:.3}")).collect();
        detail.push(format!("{name} [{}] spearman {rs:.2}", shown.join(" ")));
    };

    let mut cfg = base.clone();
    cfg.sbm.n = 500;
    cfg.sweep.fractions = vec![0.01, 0.03, 0.1];
    cfg.sweep.models = vec![PerturbModel::Edges, PerturbModel::Nodes, PerturbModel::Combined];
    let rows = experiment::run_similarity_study(&cfg).unwrap();
    for model in cfg.sweep.models.clone() {
        let sub: Vec<_> = rows.iter().filter(|r| r.model == model).cloned().collect();
        let (k, m) = medians(&sub, |r| r.fraction);
        check(&format!("fraction/{model:?}"), k, m);
    }

    let mut cfg = base.clone();
    cfg.sbm.n = 500;
    cfg.sweep.k = vec![2, 4, 8];
    cfg.sweep.fractions = vec![0.03];
    let rows = experiment::run_similarity_study(&cfg).unwrap();
    let (k, m) = medians(&rows, |r| r.k as f64);
    check("k", k, m);

    let mut cfg = base;
    cfg.sweep.n = vec![250, 500, 1000];
    cfg.sweep.fractions = vec![0.03];
    let rows = experiment::run_similarity_study(&cfg).unwrap();
    let (k, m) = medians(&rows, |r| r.n as f64);
    check("n", k, m);

    report(7, pass, Duration::from_secs(300), start, detail.join("; "));
}

/// Criteria 8 and 9 share one run.
#[test]
fn criteria_08_09_dynamic_headline_and_matvecs() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = ExperimentConfig {
        kind: ExperimentKind::Dynamic,
        seed: 7,
        sweep: experiment::Sweeps {
            p: vec![0.5],
            ..Default::default()
        },
        ..ExperimentConfig::default()
    };
    assert_eq!((cfg.sbm.n, cfg.sbm.k, cfg.replications, cfg.steps), (1000, 4, 50, 10));
    let out = experiment::run_dynamic_experiment(&cfg).unwrap();
    let elapsed = start.elapsed();
    let d = cfg.d.resolve(1000);
    let m = cfg.csc.filter.order as u64;

    let dynamic: Vec<_> = out.records.iter().filter(|r| r.step.t > 1).collect();
    let excess: Vec<f64> = dynamic.iter().map(|r| r.step.cost_excess.unwrap()).collect();
    let all: Vec<f64> = out.records.iter().map(|r| r.step.cost_excess.unwrap()).collect();
    let mean_excess = mean(&excess);
    report(
        8,
        mean_excess <= 0.05,
        Duration::from_secs(900),
        start,
        format!(
            "mean cost excess {mean_excess:.4} over {} dynamic steps ({:.4} including first steps), d = {d}",
            excess.len(),
            mean(&all)
        ),
    );

    let start9 = Instant::now() - elapsed;
    let fresh = m * (d - (d as f64 * 0.5).floor() as usize) as u64;
    let plain: Vec<_> = dynamic.iter().filter(|r| !r.step.refined).collect();
    let exact = plain.iter().all(|r| r.step.matvecs == fresh);
    let static_cost = m * d as u64;
    let refine_rate = 1.0 - plain.len() as f64 / dynamic.len() as f64;
    report(
        9,
        exact && 2 * fresh == static_cost && refine_rate <= 0.5,
        Duration::from_secs(900),
        start9,
        format!(
            "{} unrefined steps all at {fresh} matvecs: {exact} (static {static_cost}); refine rate {refine_rate:.3}",
            plain.len()
        ),
    );
}

#[test]
fn criterion_10_kmeans_matches_exhaustive() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = KmeansConfig {
        restarts: 50,
        ..KmeansConfig::default()
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
    let instances = 200;
    let mut matched = 0;
    for i in 0..instances {
        let k = rng.random_range(2..=3);
        let n = rng.random_range(k + 2..=12);
        let dim = rng.random_range(1..=4);
        let f = DMatrix::from_fn(n, dim, |_, _| rng.random::<f64>());
        let (best, _) = exhaustive_kmeans(&f, k);
        let got = kmeans(&f, k, &cfg, i).unwrap();
        matched += usize::from((got.feature_cost - best).abs() <= 1e-9);
    }
    let rate = matched as f64 / instances as f64;
    report(
        10,
        rate >= 0.99,
        Duration::from_secs(60),
        start,
        format!("matched optimum in {matched}/{instances}"),
    );
}
