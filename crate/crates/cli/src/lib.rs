//! `dcsc` command-line harness.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on
//! runtime failures. Set `DCSC_WORKERS` to bound the worker pool.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dcsc::cluster::KmeansConfig;
use dcsc::csc::{csc_assign, CscConfig};
use dcsc::dynamic::{run_sequence, DynamicConfig};
use dcsc::experiment::{self, ExperimentConfig, ExperimentKind};
use dcsc::graph::{self, laplacian, Graph, LaplacianVariant, SbmParams};
use dcsc::spectral::sc_assign;

pub const WORKERS_ENV: &str = "DCSC_WORKERS";

pub const CONFIG_SCHEMA: &str = r#"Experiment config (JSON object, every field optional):
  kind           "similarity" | "dynamic" | "static-csc"       (dynamic)
  sbm            {"n": 1000, "k": 4, "s": 25.0, "e": 0.1667}
  variant        "normalized" | "combinatorial"                (normalized)
  perturbation   {"edge_fraction": 0.03, "node_fraction": 0.01}
  sweep          {"p": [..], "n": [..], "k": [..], "fractions": [..],
                  "models": ["edges" | "nodes" | "combined", ..]}
  steps          graphs per sequence                           (10)
  replications   runs per sweep point                          (50)
  seed           master seed                                   (1)
  d              {"fixed": 64} | {"log": 30.0} = ceil(30 ln n)  ({"log": 30.0})
  k_rule         null | {"fixed": k} | {"log": 2.0}            (null)
  csc            {"filter": {"order": 100, "damping": "jackson"|"none",
                             "response": {"kind": "step"}},
                  "eigencount": {"tol": 0.1, "interval_tol": 0.001, "max_iters": 20},
                  "kmeans": {"restarts": 10, "max_iters": 100, "tol": 1e-6},
                  "t": 2.0}
  oracle         dense spectral clustering baseline            (true)
  dense_cap      largest n for dense eigendecompositions       (5000)
  record_timing  fill the wall_ms CSV column                   (true)
  output         {"csv": path, "diagnostics": path}"#;

#[derive(Parser, Debug)]
#[command(name = "dcsc", version, about = "Dynamic compressive spectral clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a stochastic block model graph.
    Generate(GenerateArgs),
    /// Perturb a block-model graph by redrawing edges and/or reassigning nodes.
    Perturb(PerturbArgs),
    /// Exact spectral clustering (dense eigendecomposition).
    ClusterSc(ClusterScArgs),
    /// Compressive spectral clustering.
    ClusterCsc(ClusterCscArgs),
    /// Dynamic compressive spectral clustering over a graph sequence.
    ClusterDynamic(ClusterDynamicArgs),
    /// Spectral similarity study under graph perturbations.
    #[command(after_help = CONFIG_SCHEMA)]
    Similarity(ExperimentArgs),
    /// Dynamic or static clustering benchmark on perturbed sequences.
    #[command(after_help = CONFIG_SCHEMA)]
    Bench(ExperimentArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Variant {
    Normalized,
    Combinatorial,
}

impl From<Variant> for LaplacianVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Normalized => LaplacianVariant::Normalized,
            Variant::Combinatorial => LaplacianVariant::Combinatorial,
        }
    }
}

#[derive(Args, Debug)]
struct SbmArgs {
    #[arg(long)]
    k: usize,
    /// Average degree.
    #[arg(long)]
    s: f64,
    /// Ratio of inter- to intra-cluster edge probability.
    #[arg(long)]
    e: f64,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    sbm: SbmArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the planted labels.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PerturbArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[command(flatten)]
    sbm: SbmArgs,
    /// Fraction of nodes reassigned to another cluster.
    #[arg(long, default_value_t = 0.0)]
    node_fraction: f64,
    /// Fraction of edges removed and redrawn.
    #[arg(long, default_value_t = 0.0)]
    edge_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ClusterCommon {
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Variant::Normalized)]
    variant: Variant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON file with clustering settings (csc block of the experiment schema).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ClusterScArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    common: ClusterCommon,
}

#[derive(Args, Debug)]
struct ClusterCscArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    d: usize,
    #[command(flatten)]
    common: ClusterCommon,
}

#[derive(Args, Debug)]
struct ClusterDynamicArgs {
    /// Edge lists in sequence order.
    #[arg(long, num_args = 1.., required = true)]
    graphs: Vec<PathBuf>,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Report cost excess against dense spectral clustering.
    #[arg(long)]
    oracle: bool,
    /// Per-step diagnostics as JSON lines.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    #[command(flatten)]
    common: ClusterCommon,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment config; see `--help` of this subcommand for the schema.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// 200 replications per sweep point.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    replications: Option<usize>,
    /// Leave wall_ms empty so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

/// Errors the user can fix by changing arguments or config.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if let Err(e) = init_workers() {
        eprintln!("error: {e:#}");
        return 1;
    }
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e:#}\n\n{CONFIG_SCHEMA}");
            1
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn init_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| usage(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?;
    if n == 0 {
        return Err(usage(format!("{WORKERS_ENV} must be positive")));
    }
    // Fails only if a pool already exists, which is harmless here.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Perturb(a) => perturb(a),
        Command::ClusterSc(a) => cluster_sc(a),
        Command::ClusterCsc(a) => cluster_csc(a),
        Command::ClusterDynamic(a) => cluster_dynamic(a),
        Command::Similarity(a) => similarity(a),
        Command::Bench(a) => bench(a),
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temporary file in {}", dir.display()))?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        f(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_graph(path: &Path) -> Result<Graph> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    graph::read_edge_list(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn sbm_params(n: usize, a: &SbmArgs) -> Result<SbmParams> {
    SbmParams::new(n, a.k, a.s, a.e).map_err(|e| usage(e.to_string()))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let params = sbm_params(a.n, &a.sbm)?;
    let (g, labels) = graph::sbm_generate(&params, a.seed);
    write_atomic(&a.output, |w| Ok(graph::write_edge_list(&g, w)?))?;
    if let Some(p) = &a.labels {
        write_atomic(p, |w| Ok(graph::write_labels(&labels, w)?))?;
    }
    Ok(())
}

fn perturb(a: PerturbArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let params = sbm_params(g.n(), &a.sbm)?;
    let f = File::open(&a.labels).with_context(|| format!("opening {}", a.labels.display()))?;
    let labels = graph::read_labels(BufReader::new(f), a.sbm.k)?;
    let (mut h, mut l) = (g, labels);
    if a.node_fraction > 0.0 {
        (h, l) = graph::perturb_nodes(&h, a.node_fraction, &params, &l, a.seed)?;
    }
    if a.edge_fraction > 0.0 {
        h = graph::perturb_edges(&h, a.edge_fraction, &params, &l, dcsc::rng::derive(a.seed, 1))?;
    }
    write_atomic(&a.output, |w| Ok(graph::write_edge_list(&h, w)?))?;
    if let Some(p) = &a.labels_out {
        write_atomic(p, |w| Ok(graph::write_labels(&l, w)?))?;
    }
    Ok(())
}

fn csc_config(path: &Option<PathBuf>) -> Result<CscConfig> {
    match path {
        Some(p) => read_json(p),
        None => Ok(CscConfig::default()),
    }
}

fn write_json_value(path: &Path, v: &serde_json::Value) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, v)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn cluster_sc(a: ClusterScArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let c = &a.common;
    let kcfg: KmeansConfig = csc_config(&c.config)?.kmeans;
    let (assign, basis) = sc_assign(&laplacian(&g, c.variant.into()), c.k, &kcfg, c.seed)?;
    write_json_value(
        &c.output,
        &json!({
            "method": "sc",
            "n": g.n(),
            "k": c.k,
            "labels": assign.labels,
            "cluster_sizes": assign.cluster_sizes,
            "cost": assign.feature_cost,
            "eigenvalues": basis.eigenvalues,
            "lambda_k_plus_1": basis.next_eigenvalue,
        }),
    )
}

fn cluster_csc(a: ClusterCscArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let c = &a.common;
    let cfg = csc_config(&c.config)?;
    let (assign, diag) = csc_assign(&laplacian(&g, c.variant.into()), c.k, a.d, &cfg, c.seed)?;
    write_json_value(
        &c.output,
        &json!({
            "method": "csc",
            "n": g.n(),
            "k": c.k,
            "d": a.d,
            "labels": assign.labels,
            "cluster_sizes": assign.cluster_sizes,
            "cost": assign.feature_cost,
            "lambda_k": diag.lambda_k,
            "dichotomy_iters": diag.dichotomy_iters,
            "matvecs": diag.matvecs,
            "undersampled": diag.undersampled,
            "cost_bound": diag.cost_bound,
        }),
    )
}

fn cluster_dynamic(a: ClusterDynamicArgs) -> Result<()> {
    let graphs = a.graphs.iter().map(|p| read_graph(p)).collect::<Result<Vec<_>>>()?;
    let c = &a.common;
    let cfg = DynamicConfig {
        k: c.k,
        d: a.d,
        p: a.p,
        variant: c.variant.into(),
        csc: csc_config(&c.config)?,
        oracle: a.oracle,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let out = run_sequence(&graphs, &cfg, c.seed)?;
    let steps: Vec<_> = out
        .iter()
        .map(|(assign, d)| {
            json!({
                "t": d.t,
                "labels": assign.labels,
                "cost": assign.feature_cost,
                "refined": d.refined,
                "dichotomy_iters": d.dichotomy_iters,
                "matvecs": d.matvecs,
                "reused": d.reused,
                "lambda_k": d.lambda_k,
                "cost_excess": d.cost_excess,
            })
        })
        .collect();
    write_json_value(
        &c.output,
        &json!({"method": "dynamic-csc", "k": c.k, "d": a.d, "p": a.p, "steps": steps}),
    )?;
    if let Some(p) = &a.diagnostics {
        let recs: Vec<_> = out.into_iter().map(|(_, d)| d).collect();
        write_atomic(p, |w| Ok(experiment::write_json_lines(&recs, w)?))?;
    }
    Ok(())
}

fn experiment_config(a: &ExperimentArgs, kind: Option<ExperimentKind>) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(k) = kind {
        cfg.kind = k;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.paper_scale {
        cfg = cfg.paper_scale();
    }
    if let Some(r) = a.replications {
        cfg.replications = r;
    }
    if a.no_timing {
        cfg.record_timing = false;
    }
    if a.output.is_some() {
        cfg.output.csv = a.output.clone();
    }
    if a.diagnostics.is_some() {
        cfg.output.diagnostics = a.diagnostics.clone();
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn similarity(a: ExperimentArgs) -> Result<()> {
    let cfg = experiment_config(&a, Some(ExperimentKind::Similarity))?;
    let rows = experiment::run_similarity_study(&cfg)?;
    match &cfg.output.csv {
        Some(p) => write_atomic(p, |w| Ok(experiment::write_csv(&rows, w)?)),
        None => Ok(experiment::write_csv(&rows, std::io::stdout().lock())?),
    }
}

fn bench(a: ExperimentArgs) -> Result<()> {
    let mut cfg = experiment_config(&a, None)?;
    if cfg.kind == ExperimentKind::Similarity {
        cfg.kind = ExperimentKind::Dynamic;
    }
    let out = experiment::run_dynamic_experiment(&cfg)?;
    match &cfg.output.csv {
        Some(p) => write_atomic(p, |w| Ok(experiment::write_csv(&out.rows, w)?))?,
        None => experiment::write_csv(&out.rows, std::io::stdout().lock())?,
    }
    if let Some(p) = &cfg.output.diagnostics {
        write_atomic(p, |w| Ok(experiment::write_json_lines(&out.records, w)?))?;
    }
    if let Some(s) = experiment::scaling_summary(&out.records) {
        eprintln!("{}", serde_json::to_string(&s)?);
    }
    Ok(())
}
