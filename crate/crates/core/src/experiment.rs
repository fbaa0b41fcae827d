//! Experiment harness: configuration, graph loading, benchmark runs with and without
//! pruning, case studies and decomposition reports.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diffusion::{spread_samples, Coupling, DiffusionConfig, Model, SpreadEstimate};
use crate::error::{Error, Result};
use crate::graph::{
    bfs_distance, largest_connected_component, load_edge_list, Graph, GraphGenSpec, NodeId, NodeLabels,
};
use crate::heuristics::{Heuristic, DEFAULT_DENSE_CAP, DEFAULT_HORIZON};
use crate::rng::{mix, stream};
use crate::sim::{collect, prune, rounds_ledger, PruneTrace, SimConfig};
use crate::sobol::{build_subset_table, full_decomposition, SobolDecomposition, SubsetMask, SubsetSpreadTable};
use crate::stats::spearman;

/// Largest seed set a case study decomposes.
pub const CASE_STUDY_LIMIT: usize = 10;
/// Largest seed set `decompose` builds a table for.
pub const DECOMPOSE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum GraphSource {
    File {
        path: PathBuf,
        #[serde(default = "default_weight")]
        default_weight: f64,
        /// Re-draw every edge weight uniformly from this range at load time.
        #[serde(default)]
        weight_range: Option<[f64; 2]>,
        #[serde(default = "yes")]
        largest_component: bool,
    },
    Generate(GraphGenSpec),
}

fn default_weight() -> f64 {
    0.1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Ic,
    Lt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    pub model: ModelKind,
    pub threshold_lo: f64,
    pub threshold_hi: f64,
    pub max_steps: Option<usize>,
    pub coupling: Coupling,
    pub heuristics: Vec<String>,
    /// Horizon for Sigma and Pi.
    pub horizon: usize,
    /// Degree-discount probability; mean edge weight when absent.
    pub dd_p: Option<f64>,
    pub k: usize,
    pub a: f64,
    pub r_select: usize,
    pub r_eval: usize,
    pub master_seed: u64,
    pub reuse_cache: bool,
    pub out_dir: PathBuf,
    pub dump_raw: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            graph: GraphSource::Generate(GraphGenSpec::er(300, 10.0, 0.05, 0.20, 1)),
            model: ModelKind::Ic,
            threshold_lo: 0.01,
            threshold_hi: 0.20,
            max_steps: None,
            coupling: Coupling::Shared,
            heuristics: vec!["deg".into()],
            horizon: DEFAULT_HORIZON,
            dd_p: None,
            k: 5,
            a: 2.0,
            r_select: 100,
            r_eval: 1000,
            master_seed: 0,
            reuse_cache: true,
            out_dir: PathBuf::from("out"),
            dump_raw: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_eval == 0 || self.r_select == 0 {
            return Err(Error::Config("r_eval and r_select must be at least 1".into()));
        }
        self.heuristic_list()?;
        self.diffusion(1).validate()?;
        self.sim_config(Heuristic::Degree).validate()
    }

    pub fn diffusion(&self, rounds: usize) -> DiffusionConfig {
        let model = match self.model {
            ModelKind::Ic => Model::Ic,
            ModelKind::Lt => Model::Lt { threshold_lo: self.threshold_lo, threshold_hi: self.threshold_hi },
        };
        DiffusionConfig {
            model,
            rounds,
            max_steps: self.max_steps,
            master_seed: self.master_seed,
            coupling: self.coupling,
        }
    }

    /// Selection-side settings; evaluation uses a disjoint stream.
    pub fn selection_diffusion(&self) -> DiffusionConfig {
        self.diffusion(self.r_select).substream(stream::SELECTION)
    }

    pub fn evaluation_diffusion(&self) -> DiffusionConfig {
        self.diffusion(self.r_eval).substream(stream::EVALUATION)
    }

    pub fn heuristic(&self, label: &str) -> Result<Heuristic> {
        Ok(match label.parse::<Heuristic>()? {
            Heuristic::DegreeDiscount { .. } => Heuristic::DegreeDiscount { p: self.dd_p },
            Heuristic::Sigma { .. } => Heuristic::Sigma { horizon: self.horizon },
            Heuristic::Pi { .. } => Heuristic::Pi { horizon: self.horizon, dense_cap: DEFAULT_DENSE_CAP },
            other => other,
        })
    }

    pub fn heuristic_list(&self) -> Result<Vec<Heuristic>> {
        if self.heuristics.is_empty() {
            return Err(Error::Config("no heuristics listed".into()));
        }
        self.heuristics.iter().map(|h| self.heuristic(h)).collect()
    }

    pub fn sim_config(&self, base: Heuristic) -> SimConfig {
        SimConfig {
            k: self.k,
            over_selection: self.a,
            base,
            diffusion: self.selection_diffusion(),
            reuse_cache: self.reuse_cache,
        }
    }
}

/// Loads or generates the experiment graph. File graphs keep their largest
/// component by default and may have their weights re-drawn.
pub fn load_graph(source: &GraphSource, master_seed: u64) -> Result<(Graph, NodeLabels)> {
    match source {
        GraphSource::Generate(spec) => {
            let g = spec.generate()?;
            let labels = NodeLabels::identity(g.node_count());
            Ok((g, labels))
        }
        GraphSource::File { path, default_weight, weight_range, largest_component } => {
            let file = File::open(path)?;
            let (mut g, mut labels) = load_edge_list(BufReader::new(file), *default_weight)?;
            if *largest_component {
                let (h, map) = largest_connected_component(&g)?;
                labels = labels.restrict(&map);
                g = h;
            }
            if let Some([lo, hi]) = weight_range {
                g = g.with_random_weights(*lo, *hi, mix(master_seed, stream::WEIGHTS))?;
            }
            Ok((g, labels))
        }
    }
}

pub fn resolve_labels(labels: &NodeLabels, names: &[String]) -> Result<Vec<NodeId>> {
    names
        .iter()
        .map(|s| labels.id(s).ok_or_else(|| Error::InvalidParameter(format!("node `{s}` is not in the graph"))))
        .collect()
}

fn label_all(labels: &NodeLabels, nodes: &[NodeId]) -> Vec<String> {
    nodes.iter().map(|&n| labels.label(n).to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub threads: usize,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Environment {
        Environment {
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "W/O")]
    Without,
    #[serde(rename = "W")]
    With,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Without => "W/O",
            Variant::With => "W",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub heuristic: String,
    pub variant: Variant,
    pub mean: f64,
    pub std: f64,
    pub rounds: usize,
    pub seeds: Vec<String>,
    pub collect_seconds: f64,
    pub prune_seconds: f64,
    pub evaluate_seconds: f64,
    /// Per-round cascade sizes, kept only when raw dumping is enabled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PruneTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: ExperimentConfig,
    pub nodes: usize,
    pub edges: usize,
    pub rows: Vec<BenchRow>,
    pub environment: Environment,
}

impl BenchReport {
    pub fn row(&self, heuristic: &str, variant: Variant) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.heuristic == heuristic && r.variant == variant)
    }

    /// `heuristic,variant,mean,std,rounds,seeds,collect_s,prune_s,evaluate_s`.
    /// Everything before the timing columns is deterministic.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "heuristic,variant,mean,std,rounds,seeds,collect_s,prune_s,evaluate_s")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.6},{:.6},{},{},{:.6},{:.6},{:.6}",
                r.heuristic,
                r.variant.as_str(),
                r.mean,
                r.std,
                r.rounds,
                r.seeds.join(" "),
                r.collect_seconds,
                r.prune_seconds,
                r.evaluate_seconds
            )?;
        }
        Ok(())
    }

    /// `heuristic,variant,round,size`, one row per evaluation cascade.
    pub fn write_raw_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "heuristic,variant,round,size")?;
        for r in &self.rows {
            for (i, s) in r.raw.iter().flatten().enumerate() {
                writeln!(out, "{},{},{i},{s}", r.heuristic, r.variant.as_str())?;
            }
        }
        Ok(())
    }

    pub fn write_files(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_csv(BufWriter::new(File::create(dir.join("bench.csv"))?))?;
        write_json(&dir.join("report.json"), self)?;
        if self.config.dump_raw {
            self.write_raw_csv(BufWriter::new(File::create(dir.join("raw.csv"))?))?;
        }
        Ok(())
    }
}

fn evaluate(g: &Graph, seeds: &[NodeId], cfg: &ExperimentConfig) -> Result<(SpreadEstimate, Vec<usize>, f64)> {
    let start = Instant::now();
    let sizes = spread_samples(g, seeds, &cfg.evaluation_diffusion())?;
    Ok((SpreadEstimate::from_sizes(&sizes), sizes, start.elapsed().as_secs_f64()))
}

/// Runs every configured heuristic with and without pruning and evaluates both seed
/// sets on the evaluation stream.
pub fn run_bench(cfg: &ExperimentConfig, g: &Graph, labels: &NodeLabels) -> Result<BenchReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (label, h) in cfg.heuristics.iter().zip(cfg.heuristic_list()?) {
        let ctx = |e: Error| {
            if e.is_numerical() {
                e
            } else {
                Error::InvalidParameter(format!("heuristic `{label}`: {e}"))
            }
        };
        let start = Instant::now();
        let plain = h.select(g, cfg.k, &cfg.selection_diffusion()).map_err(ctx)?;
        let plain_collect = start.elapsed().as_secs_f64();
        let (est, raw, eval_s) = evaluate(g, &plain.nodes, cfg)?;
        rows.push(BenchRow {
            heuristic: label.clone(),
            variant: Variant::Without,
            mean: est.mean,
            std: est.std,
            rounds: est.rounds,
            seeds: label_all(labels, &plain.nodes),
            collect_seconds: plain_collect,
            prune_seconds: 0.0,
            evaluate_seconds: eval_s,
            raw: cfg.dump_raw.then_some(raw),
            trace: None,
        });

        let sim_cfg = cfg.sim_config(h);
        let start = Instant::now();
        let collected = collect(g, &sim_cfg).map_err(ctx)?;
        let collect_s = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let (pruned, trace) = prune(g, &collected, &sim_cfg).map_err(ctx)?;
        let prune_s = start.elapsed().as_secs_f64();
        let (est, raw, eval_s) = evaluate(g, &pruned.nodes, cfg)?;
        rows.push(BenchRow {
            heuristic: label.clone(),
            variant: Variant::With,
            mean: est.mean,
            std: est.std,
            rounds: est.rounds,
            seeds: label_all(labels, &pruned.nodes),
            collect_seconds: collect_s,
            prune_seconds: prune_s,
            evaluate_seconds: eval_s,
            raw: cfg.dump_raw.then_some(raw),
            trace: Some(trace),
        });
    }
    Ok(BenchReport {
        config: cfg.clone(),
        nodes: g.node_count(),
        edges: g.edge_count(),
        rows,
        environment: Environment::current(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seeds: Vec<String>,
    pub collected: Vec<String>,
    pub removed: Vec<String>,
    pub rounds: u64,
    pub fallback: bool,
    pub trace: PruneTrace,
}

pub fn run_sim(g: &Graph, labels: &NodeLabels, cfg: &SimConfig) -> Result<SimReport> {
    let collected = collect(g, cfg)?;
    let (seeds, trace) = prune(g, &collected, cfg)?;
    Ok(SimReport {
        seeds: label_all(labels, &seeds.nodes),
        collected: label_all(labels, &collected.nodes),
        removed: trace.steps.iter().map(|s| labels.label(s.removed).to_string()).collect(),
        rounds: rounds_ledger(&trace)?,
        fallback: trace.used_fallback(),
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeReport {
    pub candidates: Vec<String>,
    pub decomposition: SobolDecomposition,
    /// Per-cell standard deviations, to judge the significance of small indices.
    pub cell_std: Vec<f64>,
    #[serde(skip)]
    pub table: Option<SubsetSpreadTable>,
}

impl DecomposeReport {
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("report.json"), self)?;
        if let Some(table) = &self.table {
            table.write_csv(BufWriter::new(File::create(dir.join("table.csv"))?))?;
        }
        Ok(())
    }
}

pub fn decompose_table(table: SubsetSpreadTable, candidates: Vec<String>, max_order: usize) -> Result<DecomposeReport> {
    let decomposition = full_decomposition(&table.function(), max_order)?;
    Ok(DecomposeReport {
        candidates,
        decomposition,
        cell_std: table.cells.iter().map(|c| c.std).collect(),
        table: Some(table),
    })
}

pub fn decompose(
    g: &Graph,
    labels: &NodeLabels,
    seeds: &[NodeId],
    cfg: &DiffusionConfig,
    max_order: usize,
) -> Result<DecomposeReport> {
    if seeds.len() > DECOMPOSE_LIMIT {
        return Err(Error::TooManyCandidates { count: seeds.len(), limit: DECOMPOSE_LIMIT });
    }
    let table = build_subset_table(g, seeds, cfg)?;
    decompose_table(table, label_all(labels, seeds), max_order)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedContribution {
    pub node: String,
    pub total_index: f64,
    /// `Y(Ω) - Y(Ω∖{i})`.
    pub marginal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairInteraction {
    pub a: String,
    pub b: String,
    pub index: f64,
    /// `index · Var(Y)`.
    pub variance: f64,
    /// Hop distance; `None` when unreachable.
    pub distance: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyReport {
    pub seeds: Vec<SeedContribution>,
    /// Spearman correlation of total index and marginal contribution; `None` when
    /// either column is constant.
    pub spearman: Option<f64>,
    /// Sorted by distance (unreachable last), then by seed order.
    pub pairs: Vec<PairInteraction>,
    pub decomposition: SobolDecomposition,
}

pub fn case_study(g: &Graph, labels: &NodeLabels, seeds: &[NodeId], cfg: &DiffusionConfig) -> Result<CaseStudyReport> {
    if seeds.len() > CASE_STUDY_LIMIT {
        return Err(Error::TooManyCandidates { count: seeds.len(), limit: CASE_STUDY_LIMIT });
    }
    let table = build_subset_table(g, seeds, cfg)?;
    case_study_from_table(g, labels, &table)
}

pub fn case_study_from_table(g: &Graph, labels: &NodeLabels, table: &SubsetSpreadTable) -> Result<CaseStudyReport> {
    let m = table.width();
    let y = table.function();
    let d = full_decomposition(&y, m.min(2))?;
    let full = SubsetMask::full(m);
    let rows: Vec<SeedContribution> = (0..m)
        .map(|i| SeedContribution {
            node: labels.label(table.candidates[i]).to_string(),
            total_index: d.total[i],
            marginal: y.value(full) - y.value(full.without(i)),
        })
        .collect();
    let totals: Vec<f64> = rows.iter().map(|r| r.total_index).collect();
    let marginals: Vec<f64> = rows.iter().map(|r| r.marginal).collect();
    let mut pairs: Vec<(usize, usize, PairInteraction)> = d
        .higher_order
        .iter()
        .filter(|h| h.members.len() == 2)
        .map(|h| {
            let (i, j) = (h.members[0], h.members[1]);
            let (u, v) = (table.candidates[i], table.candidates[j]);
            let pair = PairInteraction {
                a: labels.label(u).to_string(),
                b: labels.label(v).to_string(),
                index: h.index,
                variance: h.variance,
                distance: bfs_distance(g, u, v),
            };
            (i, j, pair)
        })
        .collect();
    pairs.sort_by_key(|(i, j, p)| (p.distance.unwrap_or(usize::MAX), *i, *j));
    Ok(CaseStudyReport {
        seeds: rows,
        spearman: spearman(&totals, &marginals),
        pairs: pairs.into_iter().map(|(_, _, p)| p).collect(),
        decomposition: d,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}
