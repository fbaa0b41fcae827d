//! Acceptance gate. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are run at their stated settings and still
//! print FAIL when they fail; they do not set the exit code. Any other failure does,
//! and so does a known failure that starts passing, so the list cannot go stale.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sobol_im::experiment::{case_study, run_bench, ExperimentConfig, Variant};
use sobol_im::graph::NodeLabels;
use sobol_im::heuristics::select_degree;
use sobol_im::sim::{analytic_rounds, candidate_count, prune_choice, rounds_ledger};
use sobol_im::sobol::{
    anova_oracle, definitional, first_order_index, full_decomposition, higher_order_index, subset_first_order,
    total_index,
};
use sobol_im::*;

const KNOWN_FAILURES: &[u32] = &[6, 8];

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_tables(count: usize, widths: &[usize], seed: u64) -> Vec<SetFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|j| {
            let m = widths[j % widths.len()];
            SetFunction::from_fn(m, |mask| if mask.is_empty() { 0.0 } else { rng.gen_range(0.0..20.0) }).unwrap()
        })
        .collect()
}

fn max_dev(a: f64, b: f64, worst: &mut f64) {
    *worst = worst.max((a - b).abs());
}

fn completeness() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for y in random_tables(100, &[2, 3, 4, 5], 1) {
        let d = full_decomposition(&y, y.width()).unwrap();
        let sum = d.first_order.iter().sum::<f64>() + d.higher_order.iter().map(|h| h.index).sum::<f64>();
        max_dev(sum, 1.0, &mut worst);
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(1),
        format!("max |sum - 1| = {worst:.2e} over 100 tables, {elapsed:.2?} (< 1 s)"),
    )
}

fn closed_forms() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for y in random_tables(100, &[2, 3, 4, 5], 1) {
        let anova = anova_oracle(&y).unwrap();
        for i in 0..y.width() {
            let s = first_order_index(&y, i).unwrap();
            max_dev(s, definitional::first_order(&y, i).unwrap(), &mut worst);
            max_dev(s, anova.first_order(i), &mut worst);
            let t = total_index(&y, i).unwrap();
            max_dev(t, definitional::total(&y, i).unwrap(), &mut worst);
            max_dev(t, anova.total(i), &mut worst);
        }
        for p in 1..(1u32 << y.width()) {
            let psi = SubsetMask(p);
            max_dev(
                subset_first_order(&y, psi).unwrap(),
                definitional::subset_first_order(&y, psi).unwrap(),
                &mut worst,
            );
            if psi.len() >= 2 {
                max_dev(higher_order_index(&y, psi).unwrap(), anova.index(psi), &mut worst);
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(5),
        format!("max deviation {worst:.2e} against definitional and ANOVA forms, {elapsed:.2?} (< 5 s)"),
    )
}

fn total_identity() -> Outcome {
    let mut worst = 0.0f64;
    for y in random_tables(100, &[2, 3, 4, 5, 6], 2) {
        let d = full_decomposition(&y, y.width()).unwrap();
        for i in 0..y.width() {
            let containing = d.first_order[i]
                + d.higher_order.iter().filter(|h| h.members.contains(&i)).map(|h| h.index).sum::<f64>();
            max_dev(d.total[i], containing, &mut worst);
        }
    }
    outcome(worst <= 1e-9, format!("max |S^T - sum over containing subsets| = {worst:.2e}, m <= 6"))
}

fn fixtures() -> Outcome {
    let and = SetFunction::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
    let d = full_decomposition(&and, 2).unwrap();
    let got = [d.first_order[0], d.first_order[1], d.interaction(&[0, 1]).unwrap(), d.total[0]];
    let want = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0];
    let mut worst = got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);

    for w in [vec![1.0, 2.0], vec![3.0, 1.0, 2.0], vec![0.5, 1.5, 2.5, 4.0]] {
        let y = SetFunction::from_fn(w.len(), |m| m.members().iter().map(|&i| w[i]).sum()).unwrap();
        let d = full_decomposition(&y, w.len()).unwrap();
        let norm: f64 = w.iter().map(|x| x * x).sum();
        for (i, wi) in w.iter().enumerate() {
            max_dev(d.first_order[i], wi * wi / norm, &mut worst);
        }
        for h in &d.higher_order {
            max_dev(h.index, 0.0, &mut worst);
        }
    }
    outcome(worst <= 1e-12, format!("AND (1/3, 1/3, 1/3, 2/3) and additive fixtures, max deviation {worst:.2e}"))
}

fn random_small_graph(rng: &mut ChaCha8Rng) -> Graph {
    let n = rng.gen_range(3..=8);
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let m = rng.gen_range(1..=pairs.len().min(12));
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (u, v) = pairs.swap_remove(rng.gen_range(0..pairs.len()));
        edges.push((u, v, rng.gen_range(0.0..1.0)));
    }
    Graph::from_edges(n, edges).unwrap()
}

fn estimator_band() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let r = 10_000;
    let mut misses = 0;
    for j in 0..50 {
        let g = random_small_graph(&mut rng);
        let seeds: Vec<usize> = (0..rng.gen_range(1..=2)).collect();
        let exact = exact_ic_spread(&g, &seeds).unwrap();
        let est = estimate_spread(&g, &seeds, &DiffusionConfig::ic(r, 1000 + j)).unwrap();
        if (est.mean - exact).abs() > 3.0 * est.std / (r as f64).sqrt() {
            misses += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        misses <= 2 && elapsed < Duration::from_secs(60),
        format!("{misses}/50 outside the 3-sigma band (<= 2 allowed), {elapsed:.2?} (< 1 min)"),
    )
}

fn case_study_correlation() -> Outcome {
    let start = Instant::now();
    let mut rhos = Vec::new();
    let mut undefined = 0;
    for seed in 0..5 {
        let g = GraphGenSpec::er(500, 10.0, 0.4, 0.8, seed).generate().unwrap();
        let seeds = select_degree(&g, 5).unwrap().nodes;
        let report =
            case_study(&g, &NodeLabels::identity(500), &seeds, &DiffusionConfig::ic(1000, 100 + seed)).unwrap();
        match report.spearman {
            Some(rho) => rhos.push(rho),
            None => {
                undefined += 1;
                rhos.push(0.0);
            }
        }
    }
    let mean = rhos.iter().sum::<f64>() / rhos.len() as f64;
    let elapsed = start.elapsed();
    outcome(
        mean >= 0.9 && elapsed < Duration::from_secs(300),
        format!(
            "mean Spearman {mean:.3} (>= 0.9), {undefined}/5 graphs with a constant column scored 0, {elapsed:.2?} (< 5 min)"
        ),
    )
}

fn barbell() -> Graph {
    let mut edges = Vec::new();
    for base in [0, 6] {
        for u in base..base + 6 {
            for v in u + 1..base + 6 {
                edges.push((u, v, 1.0));
            }
        }
    }
    let path = [5, 12, 13, 14, 15, 16, 6];
    for w in path.windows(2) {
        edges.push((w[0], w[1], 0.5));
    }
    Graph::from_edges(17, edges).unwrap()
}

fn interaction_vs_distance() -> Outcome {
    let start = Instant::now();
    let g = barbell();
    let candidates = [0, 1, 7];
    let y = SetFunction::from_fn(3, |mask| {
        let nodes: Vec<usize> = mask.members().iter().map(|&j| candidates[j]).collect();
        if nodes.is_empty() {
            0.0
        } else {
            exact_ic_spread(&g, &nodes).unwrap()
        }
    })
    .unwrap();
    let d = full_decomposition(&y, 2).unwrap();
    let near = d.interaction(&[0, 1]).unwrap().abs();
    let far = d.interaction(&[0, 2]).unwrap().abs();
    let ratio = near / far;
    let elapsed = start.elapsed();
    outcome(
        ratio >= 10.0 && elapsed < Duration::from_secs(60),
        format!("|S^H| adjacent {near:.4e} vs cross-barbell {far:.4e}, ratio {ratio:.1} (>= 10), {elapsed:.2?}"),
    )
}

fn sim_effectiveness() -> Outcome {
    let start = Instant::now();
    let mut wins = 0;
    let mut gain = 0.0;
    for seed in 0..20 {
        let g = GraphGenSpec::er(300, 10.0, 0.05, 0.20, seed).generate().unwrap();
        let cfg = ExperimentConfig {
            k: 5,
            a: 2.0,
            r_select: 100,
            r_eval: 1000,
            master_seed: seed,
            ..ExperimentConfig::default()
        };
        let report = run_bench(&cfg, &g, &NodeLabels::identity(300)).unwrap();
        let plain = report.row("deg", Variant::Without).unwrap().mean;
        let pruned = report.row("deg", Variant::With).unwrap().mean;
        gain += (pruned - plain) / plain / 20.0;
        if pruned >= plain {
            wins += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        wins >= 15 && elapsed < Duration::from_secs(1800),
        format!("DEG+SIM >= DEG on {wins}/20 graphs (>= 15), mean relative gain {:+.2}%, {elapsed:.2?}", gain * 100.0),
    )
}

fn ledger() -> Outcome {
    let g = GraphGenSpec::er(60, 6.0, 0.05, 0.3, 9).generate().unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    for (k, a, r) in [(1, 2.0, 10), (2, 2.0, 10), (3, 2.0, 5)] {
        let run = |cache: bool| {
            let cfg =
                SimConfig { reuse_cache: cache, ..SimConfig::new(k, Heuristic::Degree, DiffusionConfig::ic(r, 17)) };
            sim_select(&g, &cfg).unwrap()
        };
        let (off_seeds, off) = run(false);
        let (on_seeds, on) = run(true);
        let c = candidate_count(k, a);
        let expected = analytic_rounds(k, c, r);
        let closed: u64 = (k + 1..=c).map(|m| ((1u64 << m) - 1) * r as u64).sum();
        let cap = ((1u64 << c) - 1) * r as u64;
        let ok = off.recorded_rounds() == expected
            && expected == closed
            && rounds_ledger(&off).is_ok()
            && on.recorded_rounds() <= cap
            && on_seeds.nodes == off_seeds.nodes;
        pass &= ok;
        notes.push(format!(
            "({k},{a},{r}): off {} = {closed}, on {} <= {cap}",
            off.recorded_rounds(),
            on.recorded_rounds()
        ));
    }
    outcome(pass, notes.join("; "))
}

fn degenerate() -> Outcome {
    let g = GraphGenSpec::er(80, 8.0, 0.05, 0.2, 4).generate().unwrap().with_uniform_weight(0.0).unwrap();
    let cfg = SimConfig::new(3, Heuristic::Degree, DiffusionConfig::ic(50, 2));
    let (seeds, trace) = match sim_select(&g, &cfg) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("weights-0 graph failed: {e}")),
    };
    let finite = trace.steps.iter().all(|s| s.var_y.is_finite() && s.marginals.iter().all(|m| m.is_finite()));
    let all_flagged = trace.steps.iter().all(|s| s.fallback);

    let flat = SubsetSpreadTable {
        candidates: vec![3, 1, 2],
        cells: vec![SpreadEstimate { mean: 0.0, std: 0.0, rounds: 1 }; 8],
        config: None,
    };
    let zero_var = prune_choice(&flat);
    let zero_ok = matches!(&zero_var, Ok(c) if c.fallback && flat.candidates[c.position] == 1);
    outcome(
        seeds.nodes.len() == 3 && finite && all_flagged && trace.used_fallback() && zero_ok,
        format!(
            "weights-0 graph: {} pruning steps, all flagged: {all_flagged}; var_Y = 0 table handled: {zero_ok}",
            trace.steps.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "ANOVA completeness", completeness),
        (2, "closed forms vs definitions", closed_forms),
        (3, "total-effect identity", total_identity),
        (4, "analytic fixtures", fixtures),
        (5, "IC estimator vs exact oracle", estimator_band),
        (6, "case-study correlation", case_study_correlation),
        (7, "interaction vs distance", interaction_vs_distance),
        (8, "SIM effectiveness", sim_effectiveness),
        (9, "simulation-count ledger", ledger),
        (10, "degenerate handling", degenerate),
    ];
    let mut blocking = 0;
    for (id, name, run) in criteria {
        let o = run();
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (o.pass, known) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as known failure)",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag} criterion {id} {name}: {}", o.detail);
        if o.pass == known {
            blocking += 1;
        }
    }
    if blocking > 0 {
        println!("{blocking} criterion outcome(s) differ from expectations");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
