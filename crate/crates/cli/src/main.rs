//! `sobol-im`: generate graphs, select seeds, decompose influence and run benchmarks.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use sobol_im::experiment::{
    case_study, decompose, decompose_table, load_graph, resolve_labels, run_bench, run_sim, write_json,
    ExperimentConfig, GraphSource, ModelKind,
};
use sobol_im::graph::NodeLabels;
use sobol_im::*;

#[derive(Parser, Debug)]
#[command(name = "sobol-im", version, about = "Sobol-index influence maximization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic graph as an edge list.
    Gen(GenArgs),
    /// Select a seed set with a heuristic.
    Select(SelectArgs),
    /// Decompose the spread of a seed set into Sobol indices.
    Decompose(DecomposeArgs),
    /// Run a heuristic followed by Sobol pruning.
    Sim(SimArgs),
    /// Compare heuristics with and without pruning.
    Bench(BenchArgs),
    /// Total indices, marginal contributions and pair interactions for a seed set.
    CaseStudy(CaseStudyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum GenKind {
    Er,
    Ws,
}

#[derive(Args, Debug)]
struct GenArgs {
    kind: GenKind,
    #[arg(long)]
    n: usize,
    /// Mean degree (ER).
    #[arg(long, default_value_t = 10.0)]
    avg_deg: f64,
    /// Ring neighbours per node, even (WS).
    #[arg(long, default_value_t = 10)]
    ring_degree: usize,
    /// Rewiring probability (WS).
    #[arg(long, default_value_t = 0.1)]
    rewire: f64,
    #[arg(long, default_value_t = 0.05)]
    weight_lo: f64,
    #[arg(long, default_value_t = 0.2)]
    weight_hi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GraphArgs {
    /// Edge list: `u v [w]` per line, `#` comments.
    #[arg(long, short)]
    graph: PathBuf,
    /// Weight for edges without one.
    #[arg(long, default_value_t = 0.1)]
    default_weight: f64,
    /// Re-draw every weight uniformly from `lo,hi` (seeded by --seed).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    weight_range: Option<Vec<f64>>,
    /// Keep every node instead of the largest connected component.
    #[arg(long)]
    all_components: bool,
}

impl GraphArgs {
    fn source(&self) -> GraphSource {
        GraphSource::File {
            path: self.graph.clone(),
            default_weight: self.default_weight,
            weight_range: self.weight_range.as_ref().map(|r| [r[0], r[1]]),
            largest_component: !self.all_components,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CouplingArg {
    Shared,
    PerSeedSet,
}

impl From<CouplingArg> for Coupling {
    fn from(c: CouplingArg) -> Coupling {
        match c {
            CouplingArg::Shared => Coupling::Shared,
            CouplingArg::PerSeedSet => Coupling::PerSeedSet,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelArg {
    Ic,
    Lt,
}

#[derive(Args, Debug)]
struct DiffusionArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Ic)]
    model: ModelArg,
    #[arg(long, default_value_t = 0.01)]
    threshold_lo: f64,
    #[arg(long, default_value_t = 0.2)]
    threshold_hi: f64,
    /// Monte Carlo cascades per estimate.
    #[arg(long, short, default_value_t = 100)]
    rounds: usize,
    /// Cap on cascade steps; unbounded when absent.
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = CouplingArg::Shared)]
    coupling: CouplingArg,
}

impl DiffusionArgs {
    fn config(&self) -> DiffusionConfig {
        let model = match self.model {
            ModelArg::Ic => Model::Ic,
            ModelArg::Lt => Model::Lt { threshold_lo: self.threshold_lo, threshold_hi: self.threshold_hi },
        };
        DiffusionConfig {
            model,
            rounds: self.rounds,
            max_steps: self.max_steps,
            master_seed: self.seed,
            coupling: self.coupling.into(),
        }
    }
}

#[derive(Args, Debug)]
struct HeuristicArgs {
    /// Horizon for sigma and pi.
    #[arg(long, default_value_t = heuristics::DEFAULT_HORIZON)]
    horizon: usize,
    /// Degree-discount probability; mean edge weight when absent.
    #[arg(long)]
    dd_p: Option<f64>,
    /// Use edge weights in eigenvector centrality.
    #[arg(long)]
    weighted_eig: bool,
}

impl HeuristicArgs {
    fn resolve(&self, label: &str) -> Result<Heuristic> {
        Ok(match label.parse::<Heuristic>()? {
            Heuristic::Eigen { .. } => Heuristic::Eigen { weighted: self.weighted_eig },
            Heuristic::DegreeDiscount { .. } => Heuristic::DegreeDiscount { p: self.dd_p },
            Heuristic::Sigma { .. } => Heuristic::Sigma { horizon: self.horizon },
            Heuristic::Pi { dense_cap, .. } => Heuristic::Pi { horizon: self.horizon, dense_cap },
            other => other,
        })
    }
}

#[derive(Args, Debug)]
struct SelectArgs {
    /// One of deg, eig, grd, dd, sigma, pi.
    heuristic: String,
    #[arg(long, short)]
    k: usize,
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    diffusion: DiffusionArgs,
    #[command(flatten)]
    tuning: HeuristicArgs,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Seeds given explicitly or picked by a heuristic.
#[derive(Args, Debug)]
struct SeedArgs {
    /// Comma-separated node labels.
    #[arg(long, value_delimiter = ',', conflicts_with = "top")]
    seeds: Vec<String>,
    /// Pick this many seeds with --heuristic instead.
    #[arg(long)]
    top: Option<usize>,
    #[arg(long, default_value = "deg")]
    heuristic: String,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    /// Decompose a spread table (`mask,mean,std,rounds`) instead of simulating.
    #[arg(long, conflicts_with_all = ["graph", "seeds", "top"])]
    table: Option<PathBuf>,
    #[arg(long, short)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    default_weight: f64,
    #[arg(long, value_delimiter = ',', num_args = 2)]
    weight_range: Option<Vec<f64>>,
    #[arg(long)]
    all_components: bool,
    #[command(flatten)]
    seeds: SeedArgs,
    #[command(flatten)]
    diffusion: DiffusionArgs,
    #[command(flatten)]
    tuning: HeuristicArgs,
    /// Highest interaction order; every order when absent.
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long, default_value = "deg")]
    heuristic: String,
    #[arg(long, short)]
    k: usize,
    /// Over-selection ratio: ceil(a*k) candidates are collected.
    #[arg(long, short, default_value_t = 2.0)]
    a: f64,
    /// Re-simulate every table instead of reusing cached patterns.
    #[arg(long)]
    no_cache: bool,
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    diffusion: DiffusionArgs,
    #[command(flatten)]
    tuning: HeuristicArgs,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct CaseStudyArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    seeds: SeedArgs,
    #[command(flatten)]
    diffusion: DiffusionArgs,
    #[command(flatten)]
    tuning: HeuristicArgs,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// TOML experiment file; flags below override its keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Edge-list file replacing the configured graph source.
    #[arg(long, short)]
    graph: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    heuristics: Option<Vec<String>>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long)]
    threshold_lo: Option<f64>,
    #[arg(long)]
    threshold_hi: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, value_enum)]
    coupling: Option<CouplingArg>,
    #[arg(long, short)]
    k: Option<usize>,
    #[arg(long, short)]
    a: Option<f64>,
    #[arg(long)]
    r_select: Option<usize>,
    #[arg(long)]
    r_eval: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    dd_p: Option<f64>,
    #[arg(long)]
    no_cache: bool,
    /// Also write per-round cascade sizes to raw.csv.
    #[arg(long)]
    dump_raw: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl BenchArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.graph {
            cfg.graph = GraphSource::File {
                path: path.clone(),
                default_weight: 0.1,
                weight_range: None,
                largest_component: true,
            };
        }
        if let Some(h) = &self.heuristics {
            cfg.heuristics = h.clone();
        }
        if let Some(m) = self.model {
            cfg.model = match m {
                ModelArg::Ic => ModelKind::Ic,
                ModelArg::Lt => ModelKind::Lt,
            };
        }
        set(&mut cfg.threshold_lo, self.threshold_lo);
        set(&mut cfg.threshold_hi, self.threshold_hi);
        if self.max_steps.is_some() {
            cfg.max_steps = self.max_steps;
        }
        set(&mut cfg.coupling, self.coupling.map(Coupling::from));
        set(&mut cfg.k, self.k);
        set(&mut cfg.a, self.a);
        set(&mut cfg.r_select, self.r_select);
        set(&mut cfg.r_eval, self.r_eval);
        set(&mut cfg.master_seed, self.seed);
        set(&mut cfg.horizon, self.horizon);
        if self.dd_p.is_some() {
            cfg.dd_p = self.dd_p;
        }
        cfg.reuse_cache &= !self.no_cache;
        cfg.dump_raw |= self.dump_raw;
        set(&mut cfg.out_dir, self.out_dir.clone());
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn resolve_seeds(
    g: &Graph,
    labels: &NodeLabels,
    seeds: &SeedArgs,
    tuning: &HeuristicArgs,
    cfg: &DiffusionConfig,
) -> Result<Vec<NodeId>> {
    match seeds.top {
        Some(k) => Ok(tuning.resolve(&seeds.heuristic)?.select(g, k, cfg)?.nodes),
        None if seeds.seeds.is_empty() => Err(Error::InvalidParameter("give --seeds or --top".into())),
        None => resolve_labels(labels, &seeds.seeds),
    }
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let spec = match args.kind {
        GenKind::Er => GraphGenSpec::er(args.n, args.avg_deg, args.weight_lo, args.weight_hi, args.seed),
        GenKind::Ws => {
            GraphGenSpec::ws(args.n, args.ring_degree, args.rewire, args.weight_lo, args.weight_hi, args.seed)
        }
    };
    let g = spec.generate()?;
    info!("generated {} nodes, {} edges", g.node_count(), g.edge_count());
    let mut out = output(args.out.as_deref())?;
    g.write_edge_list(&mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let cfg = args.diffusion.config();
    let (g, labels) = load_graph(&args.graph.source(), cfg.master_seed)?;
    let seeds = args.tuning.resolve(&args.heuristic)?.select(&g, args.k, &cfg)?;
    let names: Vec<&str> = seeds.nodes.iter().map(|&v| labels.label(v)).collect();
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "{}", names.join(" "))?;
    out.flush()?;
    Ok(())
}

fn cmd_decompose(args: &DecomposeArgs) -> Result<()> {
    let report = if let Some(path) = &args.table {
        let table = SubsetSpreadTable::read_csv(BufReader::new(File::open(path)?))?;
        let names = table.candidates.iter().map(|c| c.to_string()).collect();
        let order = args.max_order.unwrap_or(table.width());
        decompose_table(table, names, order)?
    } else {
        let path = args.graph.clone().ok_or_else(|| Error::InvalidParameter("give --graph or --table".into()))?;
        let source = GraphSource::File {
            path,
            default_weight: args.default_weight,
            weight_range: args.weight_range.as_ref().map(|r| [r[0], r[1]]),
            largest_component: !args.all_components,
        };
        let cfg = args.diffusion.config();
        let (g, labels) = load_graph(&source, cfg.master_seed)?;
        let seeds = resolve_seeds(&g, &labels, &args.seeds, &args.tuning, &cfg)?;
        decompose(&g, &labels, &seeds, &cfg, args.max_order.unwrap_or(seeds.len()))?
    };
    report.write_files(&args.out_dir)?;

    let d = &report.decomposition;
    println!("candidate\tfirst_order\ttotal");
    for (i, name) in report.candidates.iter().enumerate() {
        println!("{name}\t{:.6}\t{:.6}", d.first_order[i], d.total[i]);
    }
    println!("var_y {:.6}", d.var_y);
    if let Some(r) = d.closure_residual {
        println!("closure residual {r:.3e}");
    }
    Ok(())
}

fn cmd_sim(args: &SimArgs) -> Result<()> {
    let diffusion = args.diffusion.config();
    let (g, labels) = load_graph(&args.graph.source(), diffusion.master_seed)?;
    let cfg = SimConfig {
        k: args.k,
        over_selection: args.a,
        base: args.tuning.resolve(&args.heuristic)?,
        diffusion,
        reuse_cache: !args.no_cache,
    };
    let report = run_sim(&g, &labels, &cfg)?;
    fs::create_dir_all(&args.out_dir)?;
    write_json(&args.out_dir.join("trace.json"), &report)?;
    if report.fallback {
        log::warn!("pruning fell back to marginal spread in at least one step");
    }
    println!("{}", report.seeds.join(" "));
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let cfg = args.config()?;
    let (g, labels) = load_graph(&cfg.graph, cfg.master_seed)?;
    info!("bench on {} nodes, {} edges", g.node_count(), g.edge_count());
    let report = run_bench(&cfg, &g, &labels)?;
    report.write_files(&cfg.out_dir)?;
    let traces: Vec<_> = report.rows.iter().filter_map(|r| r.trace.as_ref().map(|t| (&r.heuristic, t))).collect();
    write_json(&cfg.out_dir.join("trace.json"), &traces)?;
    report.write_csv(io::stdout().lock())?;
    Ok(())
}

fn cmd_case_study(args: &CaseStudyArgs) -> Result<()> {
    let cfg = args.diffusion.config();
    let (g, labels) = load_graph(&args.graph.source(), cfg.master_seed)?;
    let seeds = resolve_seeds(&g, &labels, &args.seeds, &args.tuning, &cfg)?;
    let report = case_study(&g, &labels, &seeds, &cfg)?;
    fs::create_dir_all(&args.out_dir)?;
    write_json(&args.out_dir.join("report.json"), &report)?;

    println!("seed\ttotal\tmarginal");
    for s in &report.seeds {
        println!("{}\t{:.6}\t{:.4}", s.node, s.total_index, s.marginal);
    }
    match report.spearman {
        Some(rho) => println!("spearman {rho:.4}"),
        None => println!("spearman undefined (constant column)"),
    }
    println!("a\tb\tdistance\tindex\tvariance");
    for p in &report.pairs {
        let dist = p.distance.map_or("inf".to_string(), |d| d.to_string());
        println!("{}\t{}\t{dist}\t{:.6}\t{:.4}", p.a, p.b, p.index, p.variance);
    }
    Ok(())
}

/// 1 for bad invocations, 2 for bad data, 3 for numerical degeneracy.
fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        return 3;
    }
    match e {
        Error::InvalidParameter(_)
        | Error::BudgetTooLarge { .. }
        | Error::TooManyCandidates { .. }
        | Error::UnknownHeuristic(_)
        | Error::Config(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Select(a) => cmd_select(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Sim(a) => cmd_sim(a),
        Command::Bench(a) => cmd_bench(a),
        Command::CaseStudy(a) => cmd_case_study(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
