//! Over-select-then-prune seed selection.
//!
//! A base heuristic collects `⌈a·k⌉` candidates. While more than `k` remain, a
//! subset spread table is built over the remaining candidates and the one with the
//! smallest total index is dropped. Totals are recomputed after every removal.

use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionConfig;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::heuristics::{Heuristic, SeedSet};
use crate::rng::stream;
use crate::sobol::{
    build_subset_table_cached, is_degenerate, moments, total_index, SpreadCache, SubsetMask, SubsetSpreadTable,
    MAX_WIDTH,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub k: usize,
    /// Over-selection factor `a > 1`.
    pub over_selection: f64,
    pub base: Heuristic,
    /// Diffusion settings for index estimation (and for a greedy base heuristic).
    pub diffusion: DiffusionConfig,
    /// Reuse spread estimates across pruning iterations.
    pub reuse_cache: bool,
}

impl SimConfig {
    pub fn new(k: usize, base: Heuristic, diffusion: DiffusionConfig) -> SimConfig {
        SimConfig { k, over_selection: 2.0, base, diffusion, reuse_cache: true }
    }

    pub fn candidate_count(&self) -> usize {
        candidate_count(self.k, self.over_selection)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("budget k must be at least 1".into()));
        }
        if !(self.over_selection > 1.0) || !self.over_selection.is_finite() {
            return Err(Error::InvalidParameter(format!("over-selection {} must exceed 1", self.over_selection)));
        }
        let c = self.candidate_count();
        if c > MAX_WIDTH {
            return Err(Error::TooManyCandidates { count: c, limit: MAX_WIDTH });
        }
        self.diffusion.validate()
    }
}

/// `⌈a·k⌉`, robust to products like `1.1 × 10` landing a hair above an integer.
pub fn candidate_count(k: usize, a: f64) -> usize {
    let product = a * k as f64;
    let nearest = product.round();
    if (product - nearest).abs() <= 1e-9 * product.max(1.0) {
        nearest as usize
    } else {
        product.ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneStep {
    /// Candidates before the removal, in table order.
    pub remaining: Vec<NodeId>,
    /// Total index per remaining candidate; empty when the fallback was used.
    pub total_indices: Vec<f64>,
    /// Mean marginal spread `Y(Ω) - Y(Ω∖{i})` per remaining candidate.
    pub marginals: Vec<f64>,
    pub var_y: f64,
    pub removed: NodeId,
    /// Cascades simulated during this iteration.
    pub rounds: u64,
    /// The ranking was uninformative and the marginal-spread fallback decided.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneTrace {
    pub k: usize,
    pub collected: Vec<NodeId>,
    pub rounds_per_cell: usize,
    pub reuse_cache: bool,
    pub steps: Vec<PruneStep>,
}

impl PruneTrace {
    pub fn recorded_rounds(&self) -> u64 {
        self.steps.iter().map(|s| s.rounds).sum()
    }

    pub fn used_fallback(&self) -> bool {
        self.steps.iter().any(|s| s.fallback)
    }
}

/// `Σ_{m=k+1}^{c} (2^m − 1)·r`: the pruning cost without reuse, the empty pattern
/// being free.
pub fn analytic_rounds(k: usize, candidates: usize, rounds: usize) -> u64 {
    (k + 1..=candidates).map(|m| ((1u64 << m) - 1) * rounds as u64).sum()
}

/// Total cascades behind a trace. Without reuse the recorded count must match
/// [`analytic_rounds`].
pub fn rounds_ledger(trace: &PruneTrace) -> Result<u64> {
    let recorded = trace.recorded_rounds();
    if trace.reuse_cache {
        return Ok(recorded);
    }
    let expected = analytic_rounds(trace.k, trace.collected.len(), trace.rounds_per_cell);
    if recorded != expected {
        return Err(Error::LedgerMismatch { recorded, expected });
    }
    Ok(expected)
}

/// Which candidate a pruning iteration removes.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneChoice {
    /// Position in the table's candidate list.
    pub position: usize,
    pub total_indices: Vec<f64>,
    pub marginals: Vec<f64>,
    pub var_y: f64,
    pub fallback: bool,
}

/// Chooses the candidate with the smallest total index, ties to the smallest node id.
///
/// When the table has no usable variance, or every total index is identical so the
/// ranking carries no information, the candidate with the smallest mean marginal
/// spread is removed instead (ties again to the smallest node id).
pub fn prune_choice(table: &SubsetSpreadTable) -> Result<PruneChoice> {
    let y = table.function();
    let m = table.width();
    let full = SubsetMask::full(m);
    let marginals: Vec<f64> = (0..m).map(|i| y.value(full) - y.value(full.without(i))).collect();
    let mom = moments(&y);
    let totals = if is_degenerate(&y, &mom) {
        None
    } else {
        let t: Vec<f64> = (0..m).map(|i| total_index(&y, i)).collect::<Result<_>>()?;
        (!t.iter().all(|&v| v == t[0]) || m == 1).then_some(t)
    };
    let (keys, fallback) = match &totals {
        Some(t) => (t, false),
        None => (&marginals, true),
    };
    let position = (0..m)
        .min_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(table.candidates[a].cmp(&table.candidates[b])))
        .ok_or_else(|| Error::InvalidParameter("empty table".into()))?;
    Ok(PruneChoice { position, total_indices: totals.unwrap_or_default(), marginals, var_y: mom.variance, fallback })
}

/// Collecting stage: `⌈a·k⌉` candidates from the base heuristic.
pub fn collect(g: &Graph, cfg: &SimConfig) -> Result<SeedSet> {
    cfg.validate()?;
    let c = cfg.candidate_count();
    if c > g.node_count() {
        return Err(Error::BudgetTooLarge { k: c, n: g.node_count() });
    }
    cfg.base.select(g, c, &cfg.diffusion.substream(stream::SELECTION))
}

/// Pruning stage: removes candidates one at a time until `k` remain.
pub fn prune(g: &Graph, collected: &SeedSet, cfg: &SimConfig) -> Result<(SeedSet, PruneTrace)> {
    cfg.validate()?;
    let mut remaining = collected.nodes.clone();
    if remaining.len() > MAX_WIDTH {
        return Err(Error::TooManyCandidates { count: remaining.len(), limit: MAX_WIDTH });
    }
    let mut cache = cfg.reuse_cache.then(SpreadCache::new);
    let mut steps = Vec::new();
    while remaining.len() > cfg.k {
        let (table, rounds) = build_subset_table_cached(g, &remaining, &cfg.diffusion, cache.as_mut())?;
        let choice = prune_choice(&table)?;
        let removed = remaining.remove(choice.position);
        steps.push(PruneStep {
            remaining: table.candidates,
            total_indices: choice.total_indices,
            marginals: choice.marginals,
            var_y: choice.var_y,
            removed,
            rounds,
            fallback: choice.fallback,
        });
    }
    let trace = PruneTrace {
        k: cfg.k,
        collected: collected.nodes.clone(),
        rounds_per_cell: cfg.diffusion.rounds,
        reuse_cache: cfg.reuse_cache,
        steps,
    };
    let seeds = SeedSet {
        nodes: remaining,
        origin: format!("sim({}, a={}, r={})", collected.origin, cfg.over_selection, cfg.diffusion.rounds),
    };
    Ok((seeds, trace))
}

pub fn sim_select(g: &Graph, cfg: &SimConfig) -> Result<(SeedSet, PruneTrace)> {
    let collected = collect(g, cfg)?;
    prune(g, &collected, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::SpreadEstimate;

    fn star(w: f64) -> Graph {
        Graph::from_edges(5, (1..5).map(|l| (0, l, w))).unwrap()
    }

    #[test]
    fn ceiling_arithmetic() {
        assert_eq!(candidate_count(2, 1.01), 3);
        assert_eq!(candidate_count(5, 2.0), 10);
        assert_eq!(candidate_count(10, 1.1), 11);
        assert_eq!(candidate_count(3, 1.5), 5);
    }

    #[test]
    fn analytic_counts() {
        assert_eq!(analytic_rounds(1, 2, 100), 300);
        assert_eq!(analytic_rounds(2, 4, 1), 22);
    }

    #[test]
    fn star_keeps_the_center() {
        let cfg = SimConfig::new(1, Heuristic::Degree, DiffusionConfig::ic(2000, 4));
        let (seeds, trace) = sim_select(&star(0.5), &cfg).unwrap();
        assert_eq!(trace.collected, vec![0, 1]);
        assert_eq!(seeds.nodes, vec![0]);
        assert_eq!(trace.steps.len(), 1);
        let t = &trace.steps[0].total_indices;
        assert!(t[1] < t[0]);
    }

    #[test]
    fn one_pruning_iteration_for_three_candidates() {
        let g = crate::graph::GraphGenSpec::er(40, 4.0, 0.1, 0.3, 3).generate().unwrap();
        let cfg =
            SimConfig { over_selection: 1.01, ..SimConfig::new(2, Heuristic::Degree, DiffusionConfig::ic(20, 1)) };
        let (seeds, trace) = sim_select(&g, &cfg).unwrap();
        assert_eq!(trace.collected.len(), 3);
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(seeds.nodes.len(), 2);
        assert!(seeds.nodes.iter().all(|n| trace.collected.contains(n)));
    }

    #[test]
    fn symmetric_zero_weight_candidates_use_the_tie_rule() {
        let g = crate::graph::GraphGenSpec::ws(20, 4, 0.0, 0.0, 0.0, 1).generate().unwrap();
        let cfg = SimConfig::new(2, Heuristic::Degree, DiffusionConfig::ic(10, 1));
        let (seeds, trace) = sim_select(&g, &cfg).unwrap();
        // degree picks 0, then 3, 6, 9 once neighbors are discounted
        assert_eq!(trace.collected, vec![0, 3, 6, 9]);
        assert_eq!(trace.steps.iter().map(|s| s.removed).collect::<Vec<_>>(), vec![0, 3]);
        assert_eq!(seeds.nodes, vec![6, 9]);
        assert!(trace.steps.iter().all(|s| s.fallback));
    }

    #[test]
    fn constant_table_falls_back_to_marginals() {
        let cell = |mean| SpreadEstimate { mean, std: 0.0, rounds: 1 };
        let table = SubsetSpreadTable { candidates: vec![7, 3], cells: vec![cell(5.0); 4], config: None };
        let choice = prune_choice(&table).unwrap();
        assert!(choice.fallback);
        assert_eq!(choice.position, 1);
        assert!(choice.total_indices.is_empty());
    }

    #[test]
    fn ledger_and_cache() {
        let g = crate::graph::GraphGenSpec::er(60, 5.0, 0.1, 0.3, 8).generate().unwrap();
        let base = SimConfig::new(2, Heuristic::Degree, DiffusionConfig::ic(10, 2));
        let (cached_seeds, cached) = sim_select(&g, &base).unwrap();
        let (plain_seeds, plain) = sim_select(&g, &SimConfig { reuse_cache: false, ..base }).unwrap();
        assert_eq!(cached_seeds.nodes, plain_seeds.nodes);
        assert_eq!(rounds_ledger(&plain).unwrap(), analytic_rounds(2, 4, 10));
        assert_eq!(rounds_ledger(&cached).unwrap(), 15 * 10);

        let mut broken = plain.clone();
        broken.steps[0].rounds += 1;
        assert!(matches!(rounds_ledger(&broken), Err(Error::LedgerMismatch { .. })));
    }

    #[test]
    fn config_validation() {
        let cfg = SimConfig::new(2, Heuristic::Degree, DiffusionConfig::ic(10, 2));
        assert!(SimConfig { over_selection: 1.0, ..cfg }.validate().is_err());
        assert!(SimConfig { k: 0, ..cfg }.validate().is_err());
        assert!(SimConfig { k: 17, ..cfg }.validate().is_err());
        assert!(sim_select(&star(0.5), &SimConfig { k: 3, ..cfg }).is_err());
    }
}
