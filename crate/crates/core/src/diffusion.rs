//! Independent cascade (IC) and linear threshold (LT) diffusion.
//!
//! Randomness is counter-based: in a round with seed `s`, the coin of the directed
//! half-edge stored at CSR slot `e` is `draw(s, e)` and the LT threshold of node `v`
//! is drawn from `draw(s, THRESHOLD_DOMAIN + v)`. A round seed therefore fixes a
//! complete live-edge world (IC) or threshold assignment (LT), independent of the
//! order in which the cascade visits nodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng::{draw, mix, set_hash};

const THRESHOLD_DOMAIN: u64 = 1 << 62;

/// Maximum number of uncertain edges [`exact_ic_spread`] will enumerate.
pub const EXACT_EDGE_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Model {
    /// Independent cascade; edge weights are activation probabilities.
    Ic,
    /// Linear threshold with per-round thresholds uniform on `[threshold_lo, threshold_hi]`.
    /// Edge weights are ignored.
    Lt { threshold_lo: f64, threshold_hi: f64 },
}

/// How per-round seeds are derived for different seed sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// Round `j` uses the same world for every seed set (common random numbers).
    #[default]
    Shared,
    /// Round seeds also depend on the seed set's content.
    PerSeedSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    #[serde(flatten)]
    pub model: Model,
    pub rounds: usize,
    /// `None` runs every cascade to quiescence.
    pub max_steps: Option<usize>,
    pub master_seed: u64,
    #[serde(default)]
    pub coupling: Coupling,
}

impl DiffusionConfig {
    pub fn ic(rounds: usize, master_seed: u64) -> DiffusionConfig {
        DiffusionConfig { model: Model::Ic, rounds, max_steps: None, master_seed, coupling: Coupling::Shared }
    }

    pub fn lt(threshold_lo: f64, threshold_hi: f64, rounds: usize, master_seed: u64) -> DiffusionConfig {
        DiffusionConfig {
            model: Model::Lt { threshold_lo, threshold_hi },
            rounds,
            max_steps: None,
            master_seed,
            coupling: Coupling::Shared,
        }
    }

    pub fn with_rounds(self, rounds: usize) -> DiffusionConfig {
        DiffusionConfig { rounds, ..self }
    }

    /// Same configuration on an independent seed stream.
    pub fn substream(self, tag: u64) -> DiffusionConfig {
        DiffusionConfig { master_seed: mix(self.master_seed, tag), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidParameter("rounds must be at least 1".into()));
        }
        if let Model::Lt { threshold_lo, threshold_hi } = self.model {
            if !(0.0 <= threshold_lo && threshold_lo <= threshold_hi && threshold_hi <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "threshold range [{threshold_lo}, {threshold_hi}] not within [0, 1]"
                )));
            }
        }
        if self.max_steps == Some(0) {
            return Err(Error::InvalidParameter("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Seed of round `round` for the seed set `seeds`.
    pub fn round_seed(&self, seeds: &[NodeId], round: usize) -> u64 {
        let stream = match self.coupling {
            Coupling::Shared => mix(self.master_seed, 0),
            Coupling::PerSeedSet => mix(self.master_seed, set_hash(seeds)),
        };
        mix(stream, round as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadEstimate {
    pub mean: f64,
    /// Sample standard deviation of the cascade sizes (zero for a single round).
    pub std: f64,
    pub rounds: usize,
}

impl SpreadEstimate {
    pub fn from_sizes(sizes: &[usize]) -> SpreadEstimate {
        let rounds = sizes.len();
        if rounds == 0 {
            return SpreadEstimate { mean: 0.0, std: 0.0, rounds: 0 };
        }
        // integer sums are exact, so the result does not depend on round order
        let sum: u128 = sizes.iter().map(|&s| s as u128).sum();
        let mean = sum as f64 / rounds as f64;
        let std = if rounds > 1 {
            let ss: f64 = sizes.iter().map(|&s| (s as f64 - mean).powi(2)).sum();
            (ss / (rounds - 1) as f64).sqrt()
        } else {
            0.0
        };
        SpreadEstimate { mean, std, rounds }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.rounds == 0 {
            0.0
        } else {
            self.std / (self.rounds as f64).sqrt()
        }
    }
}

/// Reusable cascade state. Membership uses epoch stamps so a run costs time
/// proportional to the cascade, not to the graph.
#[derive(Debug, Clone)]
pub struct Cascade {
    stamp: Vec<u32>,
    epoch: u32,
    hits: Vec<u32>,
    touched: Vec<u32>,
    order: Vec<u32>,
    step_ends: Vec<usize>,
}

impl Cascade {
    pub fn new(n: usize) -> Cascade {
        Cascade {
            stamp: vec![0; n],
            epoch: 0,
            hits: vec![0; n],
            touched: Vec::new(),
            order: Vec::new(),
            step_ends: Vec::new(),
        }
    }

    fn reset(&mut self, n: usize) {
        if self.stamp.len() != n {
            *self = Cascade::new(n);
        }
        for &v in &self.touched {
            self.hits[v as usize] = 0;
        }
        self.touched.clear();
        self.order.clear();
        self.step_ends.clear();
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    #[inline]
    fn is_active(&self, v: usize) -> bool {
        self.stamp[v] == self.epoch
    }

    #[inline]
    fn activate(&mut self, v: usize) {
        self.stamp[v] = self.epoch;
        self.order.push(v as u32);
    }

    fn seed(&mut self, seeds: &[NodeId]) {
        for &s in seeds {
            if !self.is_active(s) {
                self.activate(s);
            }
        }
        self.step_ends.push(self.order.len());
    }

    /// Nodes activated by the last run, in activation order.
    pub fn activated(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.order.iter().map(|&v| v as usize)
    }

    /// Cumulative activated count after step 0 (the seeds), step 1, ...
    pub fn trajectory(&self) -> &[usize] {
        &self.step_ends
    }

    /// Number of steps in which at least one node was activated.
    pub fn steps(&self) -> usize {
        self.step_ends.len().saturating_sub(1)
    }

    /// Runs an IC cascade and returns its size.
    pub fn run_ic(&mut self, g: &Graph, seeds: &[NodeId], rng_seed: u64, max_steps: Option<usize>) -> usize {
        self.reset(g.node_count());
        self.seed(seeds);
        let (offsets, targets, weights) = g.csr();
        let mut frontier = 0..self.order.len();
        let limit = max_steps.unwrap_or(usize::MAX);
        while !frontier.is_empty() && self.steps() < limit {
            let start = self.order.len();
            for i in frontier {
                let u = self.order[i] as usize;
                for e in offsets[u]..offsets[u + 1] {
                    let v = targets[e] as usize;
                    if !self.is_active(v) && draw(rng_seed, e as u64) < weights[e] {
                        self.activate(v);
                    }
                }
            }
            frontier = start..self.order.len();
            if !frontier.is_empty() {
                self.step_ends.push(self.order.len());
            }
        }
        self.order.len()
    }

    /// Runs an LT cascade with thresholds uniform on `[lo, hi]` and returns its size.
    /// A node activates once the fraction of its active neighbors strictly exceeds its
    /// threshold; isolated non-seed nodes never activate.
    #[allow(clippy::too_many_arguments)]
    pub fn run_lt(
        &mut self,
        g: &Graph,
        seeds: &[NodeId],
        rng_seed: u64,
        lo: f64,
        hi: f64,
        max_steps: Option<usize>,
    ) -> usize {
        self.reset(g.node_count());
        self.seed(seeds);
        let threshold = |v: usize| lo + (hi - lo) * draw(rng_seed, THRESHOLD_DOMAIN + v as u64);
        let mut frontier = 0..self.order.len();
        let limit = max_steps.unwrap_or(usize::MAX);
        let mut candidates: Vec<u32> = Vec::new();
        while !frontier.is_empty() && self.steps() < limit {
            candidates.clear();
            for i in frontier {
                let u = self.order[i] as usize;
                for v in g.neighbors(u) {
                    if self.is_active(v) {
                        continue;
                    }
                    if self.hits[v] == 0 {
                        self.touched.push(v as u32);
                    }
                    self.hits[v] += 1;
                    candidates.push(v as u32);
                }
            }
            let start = self.order.len();
            candidates.sort_unstable();
            candidates.dedup();
            for &v in &candidates {
                let v = v as usize;
                if self.is_active(v) {
                    continue;
                }
                let fraction = self.hits[v] as f64 / g.degree(v) as f64;
                if fraction > threshold(v) {
                    self.activate(v);
                }
            }
            frontier = start..self.order.len();
            if !frontier.is_empty() {
                self.step_ends.push(self.order.len());
            }
        }
        self.order.len()
    }

    pub fn run(&mut self, g: &Graph, seeds: &[NodeId], rng_seed: u64, model: Model, max_steps: Option<usize>) -> usize {
        match model {
            Model::Ic => self.run_ic(g, seeds, rng_seed, max_steps),
            Model::Lt { threshold_lo, threshold_hi } => {
                self.run_lt(g, seeds, rng_seed, threshold_lo, threshold_hi, max_steps)
            }
        }
    }
}

fn check_seeds(g: &Graph, seeds: &[NodeId]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("seed set is empty".into()));
    }
    let n = g.node_count();
    if let Some(&bad) = seeds.iter().find(|&&s| s >= n) {
        return Err(Error::NodeOutOfRange { node: bad, n });
    }
    Ok(())
}

/// One IC cascade; returns the activated nodes sorted ascending.
pub fn simulate_ic(g: &Graph, seeds: &[NodeId], rng_seed: u64, max_steps: Option<usize>) -> Result<Vec<NodeId>> {
    check_seeds(g, seeds)?;
    let mut c = Cascade::new(g.node_count());
    c.run_ic(g, seeds, rng_seed, max_steps);
    let mut out: Vec<_> = c.activated().collect();
    out.sort_unstable();
    Ok(out)
}

/// One LT cascade; returns the activated nodes sorted ascending.
pub fn simulate_lt(
    g: &Graph,
    seeds: &[NodeId],
    rng_seed: u64,
    lo: f64,
    hi: f64,
    max_steps: Option<usize>,
) -> Result<Vec<NodeId>> {
    check_seeds(g, seeds)?;
    let mut c = Cascade::new(g.node_count());
    c.run_lt(g, seeds, rng_seed, lo, hi, max_steps);
    let mut out: Vec<_> = c.activated().collect();
    out.sort_unstable();
    Ok(out)
}

/// Cascade sizes of every round, in round order.
pub fn spread_samples(g: &Graph, seeds: &[NodeId], cfg: &DiffusionConfig) -> Result<Vec<usize>> {
    check_seeds(g, seeds)?;
    cfg.validate()?;
    let n = g.node_count();
    Ok((0..cfg.rounds)
        .into_par_iter()
        .map_init(
            || Cascade::new(n),
            |c, round| c.run(g, seeds, cfg.round_seed(seeds, round), cfg.model, cfg.max_steps),
        )
        .collect())
}

/// Monte Carlo estimate of the expected spread over `cfg.rounds` cascades.
pub fn estimate_spread(g: &Graph, seeds: &[NodeId], cfg: &DiffusionConfig) -> Result<SpreadEstimate> {
    Ok(SpreadEstimate::from_sizes(&spread_samples(g, seeds, cfg)?))
}

/// Exact expected IC spread by enumerating live-edge worlds.
///
/// Only edges with weight strictly inside `(0, 1)` are enumerated; weight-0 edges
/// are always dead and weight-1 edges always live.
pub fn exact_ic_spread(g: &Graph, seeds: &[NodeId]) -> Result<f64> {
    check_seeds(g, seeds)?;
    let edges: Vec<_> = g.edges().collect();
    let uncertain: Vec<usize> = (0..edges.len()).filter(|&i| edges[i].2 > 0.0 && edges[i].2 < 1.0).collect();
    if uncertain.len() > EXACT_EDGE_LIMIT {
        return Err(Error::EdgeBudgetExceeded { edges: uncertain.len(), limit: EXACT_EDGE_LIMIT });
    }
    let n = g.node_count();
    let mut adj = vec![Vec::new(); n];
    let mut total = 0.0;
    let mut seen = vec![false; n];
    let mut stack = Vec::new();
    for world in 0u64..(1 << uncertain.len()) {
        let mut p = 1.0;
        for (bit, &i) in uncertain.iter().enumerate() {
            let w = edges[i].2;
            p *= if world >> bit & 1 == 1 { w } else { 1.0 - w };
        }
        adj.iter_mut().for_each(Vec::clear);
        let mut bit = 0;
        for &(u, v, w) in &edges {
            let live = if w >= 1.0 {
                true
            } else if w <= 0.0 {
                false
            } else {
                bit += 1;
                world >> (bit - 1) & 1 == 1
            };
            if live {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        seen.iter_mut().for_each(|s| *s = false);
        let mut reached = 0usize;
        for &s in seeds {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
        while let Some(u) = stack.pop() {
            reached += 1;
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        total += p * reached as f64;
    }
    Ok(total)
}
