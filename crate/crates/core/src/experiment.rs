//! Experiment drivers: the spectral-similarity study under the perturbation
//! models, and dynamic clustering of perturbed block-model sequences. Both
//! are deterministic in the configured seed and emit rows sorted for output.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csc::{csc_assign, CscConfig};
use crate::dynamic::{run_sequence, DynamicConfig, StepDiagnostics};
use crate::error::{invalid, Error, Result};
use crate::graph::{laplacian, perturb_edges, perturb_nodes, sbm_generate, Graph, LaplacianVariant, SbmParams};
use crate::rng;
use crate::spectral::{edge_similarity, eigendecompose_capped, eigengap_alpha, sc_assign, spectral_similarity, DEFAULT_DENSE_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Similarity,
    Dynamic,
    StaticCsc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbModel {
    Edges,
    Nodes,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub n: usize,
    pub k: usize,
    pub s: f64,
    pub e: f64,
}

/// A count that is either fixed or `ceil(factor * ln n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    Fixed(usize),
    Log(f64),
}

impl Scaling {
    pub fn resolve(&self, n: usize) -> usize {
        match *self {
            Scaling::Fixed(v) => v,
            Scaling::Log(f) => (f * (n as f64).ln()).ceil() as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Perturbation {
    pub edge_fraction: f64,
    pub node_fraction: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation {
            edge_fraction: 0.03,
            node_fraction: 0.01,
        }
    }
}

/// Sweep axes; an empty list falls back to the single base value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Sweeps {
    pub p: Vec<f64>,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub fractions: Vec<f64>,
    pub models: Vec<PerturbModel>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub sbm: SbmSpec,
    pub variant: LaplacianVariant,
    pub perturbation: Perturbation,
    pub sweep: Sweeps,
    /// Graphs per sequence.
    pub steps: usize,
    pub replications: usize,
    pub seed: u64,
    /// Number of filtered signals.
    pub d: Scaling,
    /// Overrides `sbm.k` (and the k sweep) with a rule in `n`.
    pub k_rule: Option<Scaling>,
    pub csc: CscConfig,
    /// Dense spectral clustering on every graph; needed for cost excess.
    pub oracle: bool,
    pub dense_cap: usize,
    /// Leave `wall_ms` empty in CSV output so reruns are byte-identical.
    pub record_timing: bool,
    pub output: OutputPaths,
}

pub const PAPER_REPLICATIONS: usize = 200;

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::Dynamic,
            sbm: SbmSpec {
                n: 1000,
                k: 4,
                s: 25.0,
                e: 1.0 / 6.0,
            },
            variant: LaplacianVariant::Normalized,
            perturbation: Perturbation::default(),
            sweep: Sweeps::default(),
            steps: 10,
            replications: 50,
            seed: 1,
            d: Scaling::Log(30.0),
            k_rule: None,
            csc: CscConfig::default(),
            oracle: true,
            dense_cap: DEFAULT_DENSE_CAP,
            record_timing: true,
            output: OutputPaths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn paper_scale(mut self) -> Self {
        self.replications = PAPER_REPLICATIONS;
        self
    }

    pub fn n_values(&self) -> Vec<usize> {
        if self.sweep.n.is_empty() {
            vec![self.sbm.n]
        } else {
            self.sweep.n.clone()
        }
    }

    pub fn k_values(&self, n: usize) -> Vec<usize> {
        match self.k_rule {
            Some(rule) => vec![rule.resolve(n)],
            None if self.sweep.k.is_empty() => vec![self.sbm.k],
            None => self.sweep.k.clone(),
        }
    }

    pub fn p_values(&self) -> Vec<f64> {
        if self.sweep.p.is_empty() {
            vec![0.5]
        } else {
            self.sweep.p.clone()
        }
    }

    pub fn fractions(&self) -> Vec<f64> {
        if self.sweep.fractions.is_empty() {
            vec![self.perturbation.edge_fraction]
        } else {
            self.sweep.fractions.clone()
        }
    }

    pub fn models(&self) -> Vec<PerturbModel> {
        if self.sweep.models.is_empty() {
            vec![PerturbModel::Edges]
        } else {
            self.sweep.models.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        if self.steps == 0 {
            return Err(invalid("steps must be at least 1"));
        }
        let needs_oracle = self.kind == ExperimentKind::Similarity;
        if needs_oracle && !self.oracle {
            return Err(invalid("the similarity study needs the dense oracle enabled"));
        }
        for n in self.n_values() {
            if self.oracle && n > self.dense_cap {
                return Err(invalid(format!(
                    "oracle needs dense eigendecompositions but n = {n} exceeds cap {}",
                    self.dense_cap
                )));
            }
            for k in self.k_values(n) {
                SbmParams::new(n, k, self.sbm.s, self.sbm.e)?;
                if k >= n {
                    return Err(invalid(format!("k = {k} must be below n = {n}")));
                }
            }
            if self.d.resolve(n) == 0 {
                return Err(invalid("d resolves to zero signals"));
            }
        }
        for &p in &self.p_values() {
            if !(0.0..=0.5).contains(&p) {
                return Err(invalid(format!("p = {p} outside [0, 0.5]")));
            }
        }
        let pt = self.perturbation;
        for f in self.fractions().into_iter().chain([pt.edge_fraction, pt.node_fraction]) {
            if !(0.0..=1.0).contains(&f) {
                return Err(invalid(format!("fraction {f} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub model: PerturbModel,
    pub n: usize,
    pub k: usize,
    pub s: f64,
    pub e: f64,
    pub fraction: f64,
    pub rep: usize,
    pub rho: f64,
    pub edge_sim: f64,
    pub alpha: f64,
}

/// Applies one perturbation model. `Combined` reassigns nodes, then redraws
/// edges, both at `fraction`.
pub fn perturb(
    g: &Graph,
    model: PerturbModel,
    fraction: f64,
    params: &SbmParams,
    labels: &crate::graph::LabelVector,
    seed: u64,
) -> Result<(Graph, crate::graph::LabelVector)> {
    match model {
        PerturbModel::Edges => Ok((perturb_edges(g, fraction, params, labels, seed)?, labels.clone())),
        PerturbModel::Nodes => perturb_nodes(g, fraction, params, labels, seed),
        PerturbModel::Combined => {
            let (h, l) = perturb_nodes(g, fraction, params, labels, seed)?;
            let h = perturb_edges(&h, fraction, params, &l, rng::derive(seed, 1))?;
            Ok((h, l))
        }
    }
}

fn job_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(base, |s, &p| rng::derive(s, p))
}

pub fn run_similarity_study(cfg: &ExperimentConfig) -> Result<Vec<SimilarityRow>> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for n in cfg.n_values() {
        for k in cfg.k_values(n) {
            for rep in 0..cfg.replications {
                jobs.push((n, k, rep));
            }
        }
    }
    let fractions = cfg.fractions();
    let models = cfg.models();
    let per_job: Vec<Result<Vec<SimilarityRow>>> = jobs
        .par_iter()
        .map(|&(n, k, rep)| {
            let seed = job_seed(cfg.seed, &[n as u64, k as u64, rep as u64]);
            let params = SbmParams::new(n, k, cfg.sbm.s, cfg.sbm.e)?;
            let (g, labels) = sbm_generate(&params, seed);
            let l0 = laplacian(&g, cfg.variant);
            let b0 = eigendecompose_capped(&l0, k, cfg.dense_cap)?;
            let mut rows = Vec::new();
            for (mi, &model) in models.iter().enumerate() {
                for (fi, &fraction) in fractions.iter().enumerate() {
                    let (h, _) = perturb(&g, model, fraction, &params, &labels, job_seed(seed, &[mi as u64, fi as u64]))?;
                    let (rho, edge_sim, alpha) = if h == g {
                        (0.0, 0.0, eigengap_alpha(&b0, &b0))
                    } else {
                        let l1 = laplacian(&h, cfg.variant);
                        let b1 = eigendecompose_capped(&l1, k, cfg.dense_cap)?;
                        (spectral_similarity(&b0, &b1)?, edge_similarity(&l0, &l1)?, eigengap_alpha(&b0, &b1))
                    };
                    rows.push(SimilarityRow {
                        model,
                        n,
                        k,
                        s: cfg.sbm.s,
                        e: cfg.sbm.e,
                        fraction,
                        rep,
                        rho,
                        edge_sim,
                        alpha,
                    });
                }
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_job {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| {
        (a.model, a.n, a.k)
            .cmp(&(b.model, b.n, b.k))
            .then(a.fraction.total_cmp(&b.fraction))
            .then(a.rep.cmp(&b.rep))
    });
    Ok(rows)
}

/// A `steps`-long sequence: a block-model graph followed by graphs each
/// derived from the previous one by node reassignment then edge redrawing.
pub fn perturbed_sequence(params: &SbmParams, steps: usize, perturbation: &Perturbation, seed: u64) -> Result<Vec<Graph>> {
    let (mut g, mut labels) = sbm_generate(params, seed);
    let mut out = Vec::with_capacity(steps);
    for t in 1..steps {
        out.push(g.clone());
        let s = job_seed(seed, &[t as u64]);
        let (h, l) = if perturbation.node_fraction > 0.0 {
            perturb_nodes(&g, perturbation.node_fraction, params, &labels, s)?
        } else {
            (g.clone(), labels.clone())
        };
        g = perturb_edges(&h, perturbation.edge_fraction, params, &l, rng::derive(s, 1))?;
        labels = l;
    }
    out.push(g);
    Ok(out)
}

/// One CSV row per (sweep point, replication, step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicRow {
    /// Empty for the static baseline.
    pub p: Option<f64>,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub t: usize,
    pub rep: usize,
    pub cost_excess: Option<f64>,
    pub matvecs: u64,
    pub refined: bool,
    pub wall_ms: Option<f64>,
}

/// A step's diagnostics tagged with its sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub p: Option<f64>,
    pub n: usize,
    pub rep: usize,
    #[serde(flatten)]
    pub step: StepDiagnostics,
}

#[derive(Debug, Clone, Default)]
pub struct DynamicOutput {
    pub rows: Vec<DynamicRow>,
    pub records: Vec<StepRecord>,
}

/// Runs dynamic CSC for every `p` (or static CSC on every graph, for
/// [`ExperimentKind::StaticCsc`]) on the same perturbed sequences.
pub fn run_dynamic_experiment(cfg: &ExperimentConfig) -> Result<DynamicOutput> {
    cfg.validate()?;
    if cfg.kind == ExperimentKind::Similarity {
        return Err(invalid("run_dynamic_experiment needs kind dynamic or static-csc"));
    }
    let mut jobs = Vec::new();
    for n in cfg.n_values() {
        for k in cfg.k_values(n) {
            for rep in 0..cfg.replications {
                jobs.push((n, k, rep));
            }
        }
    }
    let results: Vec<Result<Vec<StepRecord>>> = jobs
        .par_iter()
        .map(|&(n, k, rep)| {
            let seed = job_seed(cfg.seed, &[n as u64, k as u64, rep as u64]);
            let params = SbmParams::new(n, k, cfg.sbm.s, cfg.sbm.e)?;
            let graphs = perturbed_sequence(&params, cfg.steps, &cfg.perturbation, seed)?;
            let d = cfg.d.resolve(n);
            let run_seed = rng::derive(seed, 0xd1);
            let mut recs = Vec::new();
            match cfg.kind {
                ExperimentKind::Dynamic => {
                    for p in cfg.p_values() {
                        let dcfg = DynamicConfig {
                            k,
                            d,
                            p,
                            variant: cfg.variant,
                            csc: cfg.csc,
                            oracle: cfg.oracle,
                        };
                        for (_, step) in run_sequence(&graphs, &dcfg, run_seed)? {
                            recs.push(StepRecord { p: Some(p), n, rep, step });
                        }
                    }
                }
                _ => {
                    for (i, g) in graphs.iter().enumerate() {
                        let step = static_step(g, i + 1, k, d, cfg, job_seed(run_seed, &[i as u64]))
                            .map_err(|e| Error::Step { step: i + 1, source: Box::new(e) })?;
                        recs.push(StepRecord { p: None, n, rep, step });
                    }
                }
            }
            Ok(recs)
        })
        .collect();

    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    records.sort_by(|a, b| {
        a.n.cmp(&b.n)
            .then(a.p.unwrap_or(-1.0).total_cmp(&b.p.unwrap_or(-1.0)))
            .then(a.rep.cmp(&b.rep))
            .then(a.step.t.cmp(&b.step.t))
    });
    let rows = records
        .iter()
        .map(|r| {
            let k = cfg.k_values(r.n)[0];
            DynamicRow {
                p: r.p,
                n: r.n,
                k,
                d: cfg.d.resolve(r.n),
                t: r.step.t,
                rep: r.rep,
                cost_excess: r.step.cost_excess,
                matvecs: r.step.matvecs,
                refined: r.step.refined,
                wall_ms: cfg.record_timing.then_some(r.step.wall_ms),
            }
        })
        .collect();
    Ok(DynamicOutput { rows, records })
}

fn static_step(g: &Graph, t: usize, k: usize, d: usize, cfg: &ExperimentConfig, seed: u64) -> Result<StepDiagnostics> {
    let l = laplacian(g, cfg.variant);
    let (a, diag) = csc_assign(&l, k, d, &cfg.csc, seed)?;
    let mut step = StepDiagnostics {
        t,
        refined: true,
        dichotomy_iters: diag.dichotomy_iters,
        matvecs: diag.matvecs,
        eigencount: None,
        reused: 0,
        lambda_k: diag.lambda_k,
        cost_on_basis: None,
        sc_cost: None,
        cost_excess: None,
        wall_ms: diag.wall_ms,
        sc_wall_ms: None,
    };
    if cfg.oracle {
        let start = std::time::Instant::now();
        let (sc, basis) = sc_assign(&l, k, &cfg.csc.kmeans, rng::derive(seed, 0x5c))?;
        step.sc_wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        let cost = crate::cluster::evaluate_on_basis(&basis, &a)?;
        step.cost_on_basis = Some(cost);
        step.sc_cost = Some(sc.feature_cost);
        step.cost_excess = Some((cost - sc.feature_cost) / sc.feature_cost);
    }
    Ok(step)
}

pub fn write_csv<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => invalid(format!("csv: {other:?}")),
    }
}

pub fn write_json_lines<W: Write, T: Serialize>(records: &[T], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| invalid(format!("json: {e}")))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            out[p] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation, ties given average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// Mean wall time per step against `n`, for the compressive steps and for
/// the dense baseline, with their log-log slopes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSummary {
    pub n: Vec<usize>,
    pub csc_ms: Vec<f64>,
    pub sc_ms: Vec<f64>,
    pub csc_slope: f64,
    pub sc_slope: f64,
}

pub fn scaling_summary(records: &[StepRecord]) -> Option<ScalingSummary> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 2 {
        return None;
    }
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let mut csc_ms = Vec::new();
    let mut sc_ms = Vec::new();
    for &n in &ns {
        let rs: Vec<&StepRecord> = records.iter().filter(|r| r.n == n).collect();
        csc_ms.push(mean(rs.iter().map(|r| r.step.wall_ms).collect()));
        sc_ms.push(mean(rs.iter().filter_map(|r| r.step.sc_wall_ms).collect()));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let sc_ok = sc_ms.iter().all(|v| *v > 0.0);
    Some(ScalingSummary {
        csc_slope: loglog_slope(&xs, &csc_ms),
        sc_slope: if sc_ok { loglog_slope(&xs, &sc_ms) } else { f64::NAN },
        n: ns,
        csc_ms,
        sc_ms,
    })
}
