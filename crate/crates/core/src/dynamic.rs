//! Dynamic compressive spectral clustering over a graph sequence.
//!
//! Step `t` reuses `floor(d p)` filtered columns of step `t-1`, filters
//! `d - floor(d p)` fresh signals on the new graph with the previous filter,
//! and reruns the cut-off dichotomy only when the eigencount of the fresh
//! columns drifts away from `k`.

use std::time::Instant;

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{evaluate_on_basis, kmeans, Assignment};
use crate::csc::{csc_run, signal_block, ColumnTag, CscConfig, FeatureMatrix};
use crate::error::{invalid, Error, Result};
use crate::filter::{apply_filter, bisect_cutoff, cold_interval, count_estimate, warm_interval, FilterPoly, MatvecCounter};
use crate::graph::{laplacian, Graph, LaplacianMatrix, LaplacianVariant};
use crate::rng::{self, labels};
use crate::spectral::sc_assign;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicConfig {
    pub k: usize,
    pub d: usize,
    /// Share of feature columns carried over from the previous step, `<= 0.5`.
    pub p: f64,
    #[serde(default = "default_variant")]
    pub variant: LaplacianVariant,
    #[serde(default)]
    pub csc: CscConfig,
    /// Run dense spectral clustering on every graph to report cost excess.
    #[serde(default)]
    pub oracle: bool,
}

fn default_variant() -> LaplacianVariant {
    LaplacianVariant::Normalized
}

impl DynamicConfig {
    pub fn new(k: usize, d: usize, p: f64) -> Self {
        DynamicConfig {
            k,
            d,
            p,
            variant: LaplacianVariant::Normalized,
            csc: CscConfig::default(),
            oracle: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.p) {
            return Err(invalid(format!("reuse fraction p = {} must lie in [0, 0.5]", self.p)));
        }
        if self.k == 0 || self.d == 0 {
            return Err(invalid("k and d must be positive"));
        }
        Ok(())
    }

    pub fn reused_columns(&self) -> usize {
        (self.d as f64 * self.p).floor() as usize
    }
}

/// Everything step `t` needs from step `t-1`.
#[derive(Debug, Clone)]
pub struct DynamicState {
    /// Index of the last processed graph, starting at 1.
    pub step: usize,
    /// Features the last assignment was computed from.
    pub features: FeatureMatrix,
    pub lambda_k: f64,
    pub filter: FilterPoly,
    pub counter: MatvecCounter,
    n: usize,
    seed: u64,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: usize,
    pub refined: bool,
    pub dichotomy_iters: usize,
    /// Matvecs spent on this step.
    pub matvecs: u64,
    /// Eigencount measured on the fresh columns with the previous filter.
    pub eigencount: Option<f64>,
    pub reused: usize,
    pub lambda_k: f64,
    /// Cost of the assignment on the exact spectral features (oracle only).
    pub cost_on_basis: Option<f64>,
    /// Spectral clustering cost on the same graph (oracle only).
    pub sc_cost: Option<f64>,
    /// `(cost_on_basis - sc_cost) / sc_cost` (oracle only).
    pub cost_excess: Option<f64>,
    pub wall_ms: f64,
    /// Dense spectral clustering time (oracle only).
    pub sc_wall_ms: Option<f64>,
}

/// Static CSC on the first graph; identical to [`crate::csc::csc_assign`]
/// with the same seed.
pub fn dynamic_init(g: &Graph, cfg: &DynamicConfig, seed: u64) -> Result<(Assignment, DynamicState, StepDiagnostics)> {
    cfg.validate()?;
    let start = Instant::now();
    let l = laplacian(g, cfg.variant);
    let counter = MatvecCounter::new();
    let (a, diag, feats) = csc_run(&l, cfg.k, cfg.d, &cfg.csc, seed, &counter)?;
    let dyn_seed = rng::derive(seed, labels::DYNAMIC);
    let state = DynamicState {
        step: 1,
        features: feats.features,
        lambda_k: feats.lambda_k,
        filter: feats.filter,
        counter,
        n: g.n(),
        seed: dyn_seed,
        rng: rng::rng(rng::derive(dyn_seed, labels::SELECT)),
    };
    let mut d = StepDiagnostics {
        t: 1,
        refined: true,
        dichotomy_iters: diag.dichotomy_iters,
        matvecs: diag.matvecs,
        eigencount: None,
        reused: 0,
        lambda_k: diag.lambda_k,
        cost_on_basis: None,
        sc_cost: None,
        cost_excess: None,
        wall_ms: 0.0,
        sc_wall_ms: None,
    };
    d.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    if cfg.oracle {
        attach_oracle(&mut d, &l, &a, cfg, seed)?;
    }
    Ok((a, state, d))
}

/// One step of the dynamic scheme on graph `g`.
pub fn dynamic_step(
    mut state: DynamicState,
    g: &Graph,
    cfg: &DynamicConfig,
) -> Result<(Assignment, DynamicState, StepDiagnostics)> {
    let (a, d) = state.advance(g, cfg)?;
    Ok((a, state, d))
}

impl DynamicState {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Runs [`dynamic_step`] in place.
    pub fn advance(&mut self, g: &Graph, cfg: &DynamicConfig) -> Result<(Assignment, StepDiagnostics)> {
        cfg.validate()?;
        if g.n() != self.n {
            return Err(invalid(format!("graph has {} nodes, sequence has {}", g.n(), self.n)));
        }
        if self.features.d() != cfg.d {
            return Err(invalid(format!(
                "state carries {} feature columns, config asks for d = {}",
                self.features.d(),
                cfg.d
            )));
        }
        let start = Instant::now();
        let before = self.counter.get();
        let t = self.step + 1;
        let l = laplacian(g, cfg.variant);

        // Reuse only columns filtered on the previous graph.
        let reuse = cfg.reused_columns();
        let candidates: Vec<usize> = (0..self.features.d())
            .filter(|&c| self.features.provenance()[c].step == self.step)
            .collect();
        if candidates.len() < reuse {
            return Err(invalid(format!(
                "only {} columns of step {} available for reuse, need {reuse}",
                candidates.len(),
                self.step
            )));
        }
        let mut picked: Vec<usize> = index::sample(&mut self.rng, candidates.len(), reuse)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        picked.sort_unstable();
        let reused = self.features.select_columns(&picked);

        let fresh_count = cfg.d - reuse;
        let step_seed = rng::derive(self.seed, t as u64);
        let raw = signal_block(self.n, 0..fresh_count as u64, cfg.d, step_seed);
        let mut fresh = apply_filter(&l, &self.filter, &raw, &self.counter)?;
        let check = count_estimate(&fresh, cfg.d);
        let target = cfg.k as f64;
        let mut refined = false;
        let mut iters = 0;
        if (check - target).abs() > cfg.csc.eigencount.tol * target {
            refined = true;
            let ec = &cfg.csc.eigencount;
            let mut found = bisect_cutoff(
                &l,
                cfg.k,
                &raw,
                cfg.d,
                &cfg.csc.filter,
                ec,
                warm_interval(&l, self.lambda_k),
                &self.counter,
            )?;
            iters += found.iters;
            if !found.in_band {
                found = bisect_cutoff(&l, cfg.k, &raw, cfg.d, &cfg.csc.filter, ec, cold_interval(&l), &self.counter)?;
                iters += found.iters;
            }
            self.lambda_k = found.lambda_k;
            self.filter = found.poly;
            fresh = found.filtered;
        }

        let tags = (0..fresh_count as u64).map(|s| ColumnTag { step: t, stream: s }).collect();
        let fresh = FeatureMatrix::new(fresh, tags)?;
        let theta = reused.hstack(&fresh)?;
        let kseed = rng::derive(step_seed, labels::KMEANS);
        let a = kmeans(theta.values(), cfg.k, &cfg.csc.kmeans, kseed)?;

        self.features = theta;
        self.step = t;
        let mut d = StepDiagnostics {
            t,
            refined,
            dichotomy_iters: iters,
            matvecs: self.counter.get() - before,
            eigencount: Some(check),
            reused: reuse,
            lambda_k: self.lambda_k,
            cost_on_basis: None,
            sc_cost: None,
            cost_excess: None,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            sc_wall_ms: None,
        };
        if cfg.oracle {
            attach_oracle(&mut d, &l, &a, cfg, step_seed)?;
        }
        Ok((a, d))
    }
}

fn attach_oracle(d: &mut StepDiagnostics, l: &LaplacianMatrix, a: &Assignment, cfg: &DynamicConfig, seed: u64) -> Result<()> {
    let start = Instant::now();
    let (sc, basis) = sc_assign(l, cfg.k, &cfg.csc.kmeans, rng::derive(seed, 0x5c))?;
    d.sc_wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    let cost = evaluate_on_basis(&basis, a)?;
    d.cost_on_basis = Some(cost);
    d.sc_cost = Some(sc.feature_cost);
    d.cost_excess = Some((cost - sc.feature_cost) / sc.feature_cost);
    Ok(())
}

/// Clusters every graph of the sequence, carrying features forward.
pub fn run_sequence(graphs: &[Graph], cfg: &DynamicConfig, seed: u64) -> Result<Vec<(Assignment, StepDiagnostics)>> {
    let (first, rest) = graphs
        .split_first()
        .ok_or_else(|| invalid("the sequence needs at least one graph"))?;
    let wrap = |step: usize| move |e: Error| Error::Step { step, source: Box::new(e) };
    let (a, mut state, d) = dynamic_init(first, cfg, seed).map_err(wrap(1))?;
    let mut out = Vec::with_capacity(graphs.len());
    out.push((a, d));
    for (i, g) in rest.iter().enumerate() {
        out.push(state.advance(g, cfg).map_err(wrap(i + 2))?);
    }
    Ok(out)
}
