//! Baseline seed selectors. Every selector breaks ties toward the smallest node id.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{estimate_spread, Coupling, DiffusionConfig};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

pub const DEFAULT_HORIZON: usize = 3;
pub const DEFAULT_DENSE_CAP: usize = 20_000;
const EIGEN_TOL: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    /// Distinct node ids in selection order.
    pub nodes: Vec<NodeId>,
    /// Algorithm label and parameters.
    pub origin: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Heuristic {
    /// Max degree, with chosen seeds removed before degrees are recomputed.
    Degree,
    /// Top-k eigenvector centrality.
    Eigen { weighted: bool },
    /// Monte Carlo greedy on marginal spread.
    Greedy,
    /// Degree discount with a scalar propagation probability; `None` uses the mean
    /// edge weight.
    DegreeDiscount { p: Option<f64> },
    /// Row sums of `Σ_{τ=1..t} A^τ`.
    Sigma { horizon: usize },
    /// Row sums of `J - ⊙Π_{r=1..t} (J - A^r)`.
    Pi { horizon: usize, dense_cap: usize },
}

impl Heuristic {
    pub const LABELS: [&'static str; 6] = ["deg", "eig", "grd", "dd", "sigma", "pi"];

    pub fn label(&self) -> &'static str {
        match self {
            Heuristic::Degree => "deg",
            Heuristic::Eigen { .. } => "eig",
            Heuristic::Greedy => "grd",
            Heuristic::DegreeDiscount { .. } => "dd",
            Heuristic::Sigma { .. } => "sigma",
            Heuristic::Pi { .. } => "pi",
        }
    }

    /// Runs the selector. `cfg` is only used by [`Heuristic::Greedy`].
    pub fn select(&self, g: &Graph, k: usize, cfg: &DiffusionConfig) -> Result<SeedSet> {
        match *self {
            Heuristic::Degree => select_degree(g, k),
            Heuristic::Eigen { weighted } => select_eigen(g, k, weighted),
            Heuristic::Greedy => select_greedy(g, k, cfg),
            Heuristic::DegreeDiscount { p } => select_degree_discount(g, k, p.unwrap_or_else(|| g.mean_weight())),
            Heuristic::Sigma { horizon } => select_sigma(g, k, horizon),
            Heuristic::Pi { horizon, dense_cap } => select_pi(g, k, horizon, dense_cap),
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Heuristic::Degree | Heuristic::Greedy => write!(f, "{}", self.label()),
            Heuristic::Eigen { weighted } => write!(f, "eig(weighted={weighted})"),
            Heuristic::DegreeDiscount { p: Some(p) } => write!(f, "dd(p={p})"),
            Heuristic::DegreeDiscount { p: None } => write!(f, "dd(p=mean weight)"),
            Heuristic::Sigma { horizon } => write!(f, "sigma(t={horizon})"),
            Heuristic::Pi { horizon, .. } => write!(f, "pi(t={horizon})"),
        }
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    /// Parses a label with default parameters.
    fn from_str(s: &str) -> Result<Heuristic> {
        Ok(match s {
            "deg" => Heuristic::Degree,
            "eig" => Heuristic::Eigen { weighted: false },
            "grd" => Heuristic::Greedy,
            "dd" => Heuristic::DegreeDiscount { p: None },
            "sigma" => Heuristic::Sigma { horizon: DEFAULT_HORIZON },
            "pi" => Heuristic::Pi { horizon: DEFAULT_HORIZON, dense_cap: DEFAULT_DENSE_CAP },
            other => return Err(Error::UnknownHeuristic(other.to_string())),
        })
    }
}

fn check_budget(g: &Graph, k: usize) -> Result<()> {
    if k > g.node_count() {
        return Err(Error::BudgetTooLarge { k, n: g.node_count() });
    }
    Ok(())
}

/// First `k` ids by descending score, ties to the smaller id.
fn top_k(scores: &[f64], k: usize) -> Vec<NodeId> {
    let mut ids: Vec<NodeId> = (0..scores.len()).collect();
    ids.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ids.truncate(k);
    ids
}

/// Index of the maximal score among `allowed`, ties to the smaller id.
fn argmax<F: Fn(NodeId) -> bool>(scores: &[f64], allowed: F) -> Option<NodeId> {
    let mut best: Option<NodeId> = None;
    for v in (0..scores.len()).filter(|&v| allowed(v)) {
        if best.is_none_or(|b| scores[v] > scores[b]) {
            best = Some(v);
        }
    }
    best
}

pub fn select_degree(g: &Graph, k: usize) -> Result<SeedSet> {
    check_budget(g, k)?;
    let mut degree: Vec<f64> = (0..g.node_count()).map(|u| g.degree(u) as f64).collect();
    let mut chosen = vec![false; g.node_count()];
    let mut nodes = Vec::with_capacity(k);
    for _ in 0..k {
        let u = argmax(&degree, |v| !chosen[v]).expect("k <= n");
        chosen[u] = true;
        nodes.push(u);
        for v in g.neighbors(u) {
            degree[v] -= 1.0;
        }
    }
    Ok(SeedSet { nodes, origin: "deg".into() })
}

/// Eigenvector centrality by power iteration on `A + I`; the shift keeps bipartite
/// graphs from oscillating without changing the eigenvectors.
pub fn eigenvector_centrality(g: &Graph, weighted: bool) -> Result<Vec<f64>> {
    let n = g.node_count();
    let norm = |x: &mut Vec<f64>| {
        let l2 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if l2 > 0.0 {
            x.iter_mut().for_each(|v| *v /= l2);
        }
    };
    let mut x = vec![1.0; n];
    norm(&mut x);
    for _ in 0..EIGEN_MAX_ITER {
        let mut next: Vec<f64> = (0..n)
            .map(|u| x[u] + g.weighted_neighbors(u).map(|(v, w)| if weighted { w * x[v] } else { x[v] }).sum::<f64>())
            .collect();
        norm(&mut next);
        let change = next.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        x = next;
        if change <= EIGEN_TOL {
            return Ok(x);
        }
    }
    Err(Error::NotConverged { iterations: EIGEN_MAX_ITER })
}

pub fn select_eigen(g: &Graph, k: usize, weighted: bool) -> Result<SeedSet> {
    check_budget(g, k)?;
    let c = eigenvector_centrality(g, weighted)?;
    Ok(SeedSet { nodes: top_k(&c, k), origin: format!("eig(weighted={weighted})") })
}

/// Greedy on Monte Carlo marginal spread, `cfg.rounds` cascades per evaluation.
///
/// Every trial set draws its own worlds regardless of `cfg.coupling`, so candidate
/// comparisons share no correlation structure.
pub fn select_greedy(g: &Graph, k: usize, cfg: &DiffusionConfig) -> Result<SeedSet> {
    check_budget(g, k)?;
    cfg.validate()?;
    let cfg = &DiffusionConfig { coupling: Coupling::PerSeedSet, ..*cfg };
    let n = g.node_count();
    let mut nodes: Vec<NodeId> = Vec::with_capacity(k);
    let mut base = 0.0;
    for _ in 0..k {
        let gains: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|v| {
                if nodes.contains(&v) {
                    return Ok(f64::NEG_INFINITY);
                }
                let mut trial = nodes.clone();
                trial.push(v);
                Ok(estimate_spread(g, &trial, cfg)?.mean - base)
            })
            .collect::<Result<_>>()?;
        let best = argmax(&gains, |v| !nodes.contains(&v)).expect("k <= n");
        base += gains[best];
        nodes.push(best);
    }
    Ok(SeedSet { nodes, origin: format!("grd(r={})", cfg.rounds) })
}

pub fn select_degree_discount(g: &Graph, k: usize, p: f64) -> Result<SeedSet> {
    check_budget(g, k)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("propagation probability {p} outside [0, 1]")));
    }
    let n = g.node_count();
    let degree: Vec<f64> = (0..n).map(|u| g.degree(u) as f64).collect();
    let mut score = degree.clone();
    let mut seeded_neighbors = vec![0.0; n];
    let mut chosen = vec![false; n];
    let mut nodes = Vec::with_capacity(k);
    for _ in 0..k {
        let u = argmax(&score, |v| !chosen[v]).expect("k <= n");
        chosen[u] = true;
        nodes.push(u);
        for v in g.neighbors(u).filter(|&v| !chosen[v]) {
            seeded_neighbors[v] += 1.0;
            let (d, t) = (degree[v], seeded_neighbors[v]);
            score[v] = d - 2.0 * t - (d - t) * t * p;
        }
    }
    Ok(SeedSet { nodes, origin: format!("dd(p={p})") })
}

fn weighted_product(g: &Graph, x: &[f64]) -> Vec<f64> {
    (0..g.node_count()).map(|u| g.weighted_neighbors(u).map(|(v, w)| w * x[v]).sum()).collect()
}

/// `Σ_{τ=1..t} A^τ · 1`.
pub fn sigma_scores(g: &Graph, horizon: usize) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let n = g.node_count();
    let mut power = vec![1.0; n];
    let mut acc = vec![0.0; n];
    for _ in 0..horizon {
        power = weighted_product(g, &power);
        acc.iter_mut().zip(&power).for_each(|(a, p)| *a += p);
    }
    Ok(acc)
}

pub fn select_sigma(g: &Graph, k: usize, horizon: usize) -> Result<SeedSet> {
    check_budget(g, k)?;
    let s = sigma_scores(g, horizon)?;
    Ok(SeedSet { nodes: top_k(&s, k), origin: format!("sigma(t={horizon})") })
}

/// Row sums of `J - ⊙Π_{r=1..t} (J - A^r)`, one row at a time (`A` is symmetric, so
/// row `i` of `A^r` is `A^r e_i`).
pub fn pi_scores(g: &Graph, horizon: usize, dense_cap: usize) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let n = g.node_count();
    if n > dense_cap {
        return Err(Error::DenseCapExceeded { n, cap: dense_cap });
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            let mut keep = vec![1.0; n];
            for _ in 0..horizon {
                row = weighted_product(g, &row);
                keep.iter_mut().zip(&row).for_each(|(q, a)| *q *= 1.0 - a);
            }
            keep.iter().map(|q| 1.0 - q).sum()
        })
        .collect())
}

pub fn select_pi(g: &Graph, k: usize, horizon: usize, dense_cap: usize) -> Result<SeedSet> {
    check_budget(g, k)?;
    let s = pi_scores(g, horizon, dense_cap)?;
    Ok(SeedSet { nodes: top_k(&s, k), origin: format!("pi(t={horizon})") })
}
