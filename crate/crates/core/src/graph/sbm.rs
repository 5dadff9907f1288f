use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Edge, Graph, LabelVector};
use crate::error::{invalid, Result};
use crate::rng::{self, labels as stream};

/// Stochastic block model with `k` planted clusters of near-equal size.
///
/// Parameterized by the target mean degree `s` and the clusterability ratio
/// `e = q2 / q1`; the intra- and inter-cluster edge probabilities are derived
/// from `s = q1 (n/k - 1) + q2 n (k-1) / k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub n: usize,
    pub k: usize,
    pub s: f64,
    pub e: f64,
    pub q1: f64,
    pub q2: f64,
}

impl SbmParams {
    pub fn new(n: usize, k: usize, s: f64, e: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if n < k {
            return Err(invalid(format!("n = {n} must be at least k = {k}")));
        }
        if !(s.is_finite() && s >= 0.0) {
            return Err(invalid(format!("average degree s = {s} must be non-negative")));
        }
        if !(0.0..=1.0).contains(&e) {
            return Err(invalid(format!("ratio e = {e} must lie in [0, 1]")));
        }
        let (nf, kf) = (n as f64, k as f64);
        let denom = (nf / kf - 1.0) + e * nf * (kf - 1.0) / kf;
        let q1 = if s == 0.0 {
            0.0
        } else if denom <= 0.0 {
            return Err(invalid(format!(
                "no edge can be drawn with n = {n}, k = {k}, e = {e}, yet s = {s} > 0"
            )));
        } else {
            s / denom
        };
        if q1 > 1.0 {
            return Err(invalid(format!(
                "derived intra-cluster probability q1 = {q1:.4} exceeds 1 (s = {s} too large for n = {n}, k = {k}, e = {e})"
            )));
        }
        Ok(SbmParams {
            n,
            k,
            s,
            e,
            q1,
            q2: e * q1,
        })
    }

    /// Edge probability between nodes with the given cluster ids.
    pub fn prob(&self, a: usize, b: usize) -> f64 {
        if a == b {
            self.q1
        } else {
            self.q2
        }
    }
}

/// Draws every node pair independently. Labels are contiguous balanced blocks.
pub fn sbm_generate(params: &SbmParams, seed: u64) -> (Graph, LabelVector) {
    let labels = LabelVector::balanced(params.n, params.k);
    let mut rng = rng::rng(seed);
    let mut edges = Vec::new();
    for i in 0..params.n {
        let li = labels.get(i);
        for j in (i + 1)..params.n {
            let p = params.prob(li, labels.get(j));
            if rng.random::<f64>() < p {
                edges.push(Edge { i, j, w: 1.0 });
            }
        }
    }
    (Graph::from_canonical(params.n, edges), labels)
}

/// Removes `round(fraction * m)` uniformly chosen edges, then draws the same
/// number of new unit edges from the block model (rejection sampling over
/// node pairs). A removed edge may be drawn again.
pub fn perturb_edges(
    g: &Graph,
    fraction: f64,
    params: &SbmParams,
    labels: &LabelVector,
    seed: u64,
) -> Result<Graph> {
    check_fraction(fraction)?;
    check_labels(g, params, labels)?;
    let m = g.edge_count();
    let count = (fraction * m as f64).round() as usize;
    if count == 0 {
        return Ok(g.clone());
    }
    let mut rng = rng::rng(rng::derive(seed, stream::PERTURB_EDGES));
    let mut removed = vec![false; m];
    for idx in index::sample(&mut rng, m, count) {
        removed[idx] = true;
    }
    let mut kept: Vec<Edge> = g
        .edges()
        .iter()
        .zip(&removed)
        .filter(|(_, &r)| !r)
        .map(|(e, _)| *e)
        .collect();
    let mut present: HashSet<(usize, usize)> = kept.iter().map(|e| (e.i, e.j)).collect();

    let n = g.n();
    let pmax = params.q1.max(params.q2);
    if pmax <= 0.0 || n < 2 {
        return Err(invalid("block model assigns zero probability to every pair"));
    }
    let budget = 1000 * count + 1_000_000;
    let mut added = 0;
    let mut attempts = 0;
    while added < count {
        attempts += 1;
        if attempts > budget {
            return Err(invalid(format!(
                "could not place {count} new edges after {budget} draws; graph too dense"
            )));
        }
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        let p = params.prob(labels.get(i), labels.get(j));
        if rng.random::<f64>() * pmax >= p || present.contains(&(i, j)) {
            continue;
        }
        present.insert((i, j));
        kept.push(Edge { i, j, w: 1.0 });
        added += 1;
    }
    kept.sort_by(|x, y| (x.i, x.j).cmp(&(y.i, y.j)));
    Ok(Graph::from_canonical(n, kept))
}

/// Picks `round(fraction * n)` nodes, deletes their incident edges, moves
/// each to a uniformly chosen different cluster, and reconnects it to every
/// other node with the block-model probability for its new label.
pub fn perturb_nodes(
    g: &Graph,
    fraction: f64,
    params: &SbmParams,
    labels: &LabelVector,
    seed: u64,
) -> Result<(Graph, LabelVector)> {
    check_fraction(fraction)?;
    check_labels(g, params, labels)?;
    if params.k < 2 {
        return Err(invalid("node reassignment needs k >= 2: no other class exists"));
    }
    let n = g.n();
    let count = (fraction * n as f64).round() as usize;
    if count == 0 {
        return Ok((g.clone(), labels.clone()));
    }
    let mut rng = rng::rng(rng::derive(seed, stream::PERTURB_NODES));
    let mut picked: Vec<usize> = index::sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    let mut selected = vec![false; n];
    for &v in &picked {
        selected[v] = true;
    }

    let mut new_labels = labels.clone();
    for &v in &picked {
        let old = labels.get(v);
        let mut l = rng.random_range(0..params.k - 1);
        if l >= old {
            l += 1;
        }
        new_labels.set(v, l);
    }

    let mut edges: Vec<Edge> = g
        .edges()
        .iter()
        .filter(|e| !selected[e.i] && !selected[e.j])
        .copied()
        .collect();
    for &u in &picked {
        let lu = new_labels.get(u);
        for v in 0..n {
            // Pairs of two picked nodes are drawn once, from the smaller id.
            if v == u || (selected[v] && v < u) {
                continue;
            }
            if rng.random::<f64>() < params.prob(lu, new_labels.get(v)) {
                let (i, j) = if u < v { (u, v) } else { (v, u) };
                edges.push(Edge { i, j, w: 1.0 });
            }
        }
    }
    edges.sort_by(|x, y| (x.i, x.j).cmp(&(y.i, y.j)));
    Ok((Graph::from_canonical(n, edges), new_labels))
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(invalid(format!("perturbation fraction {fraction} must lie in [0, 1]")));
    }
    Ok(())
}

fn check_labels(g: &Graph, params: &SbmParams, labels: &LabelVector) -> Result<()> {
    if labels.len() != g.n() || params.n != g.n() {
        return Err(invalid(format!(
            "graph has {} nodes, labels {}, model {}",
            g.n(),
            labels.len(),
            params.n
        )));
    }
    if labels.k() != params.k {
        return Err(invalid(format!(
            "labels use k = {}, model k = {}",
            labels.k(),
            params.k
        )));
    }
    Ok(())
}
