use proptest::prelude::*;

use sobol_im::diffusion::spread_samples;
use sobol_im::graph::load_edge_list;
use sobol_im::heuristics::{select_degree, select_degree_discount, select_eigen, select_pi, select_sigma};
use sobol_im::rng::set_hash;
use sobol_im::sobol::{
    anova_oracle, definitional, first_order_index, first_order_index_abs, full_decomposition, higher_order_index,
    moments, subset_first_order, total_index,
};
use sobol_im::*;

const TOL: f64 = 1e-9;

fn table(max_width: usize) -> impl Strategy<Value = SetFunction> {
    (1..=max_width)
        .prop_flat_map(|m| prop::collection::vec(-10.0f64..10.0, 1usize << m))
        .prop_map(|mut v| {
            v[0] = 0.0;
            SetFunction::new(v).unwrap()
        })
        .prop_filter("needs spread", |y| moments(y).variance > 1e-6)
}

/// Monotone by construction: non-negative Möbius coefficients.
fn monotone_table(max_width: usize) -> impl Strategy<Value = SetFunction> {
    (1..=max_width)
        .prop_flat_map(|m| (Just(m), prop::collection::vec(0.0f64..5.0, 1usize << m)))
        .prop_map(|(m, c)| SetFunction::from_fn(m, |mask| mask.submasks().map(|z| c[z.0 as usize]).sum()).unwrap())
        .prop_filter("needs spread", |y| moments(y).variance > 1e-6)
}

fn permutation(m: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..m).collect::<Vec<_>>()).prop_shuffle()
}

fn small_graph() -> impl Strategy<Value = Graph> {
    (3usize..9)
        .prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
            (Just(n), prop::sample::subsequence(pairs.clone(), 1..=pairs.len().min(12)))
        })
        .prop_flat_map(|(n, pairs)| {
            let k = pairs.len();
            (Just(n), Just(pairs), prop::collection::vec(0.0f64..=1.0, k))
        })
        .prop_map(|(n, pairs, w)| Graph::from_edges(n, pairs.into_iter().zip(w).map(|((u, v), w)| (u, v, w))).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn closed_forms_match_definitions_and_anova(y in table(6)) {
        let anova = anova_oracle(&y).unwrap();
        for i in 0..y.width() {
            let s = first_order_index(&y, i).unwrap();
            prop_assert!((s - definitional::first_order(&y, i).unwrap()).abs() < TOL);
            prop_assert!((s - anova.first_order(i)).abs() < TOL);
            let t = total_index(&y, i).unwrap();
            prop_assert!((t - definitional::total(&y, i).unwrap()).abs() < TOL);
            prop_assert!((t - anova.total(i)).abs() < TOL);
        }
        for p in 1..(1u32 << y.width()) {
            let psi = SubsetMask(p);
            let closed = subset_first_order(&y, psi).unwrap();
            prop_assert!((closed - definitional::subset_first_order(&y, psi).unwrap()).abs() < TOL);
            let from_anova: f64 = psi.submasks().filter(|z| !z.is_empty()).map(|z| anova.index(z)).sum();
            prop_assert!((closed - from_anova).abs() < TOL);
            if psi.len() >= 2 {
                prop_assert!((higher_order_index(&y, psi).unwrap() - anova.index(psi)).abs() < TOL);
            }
        }
    }

    #[test]
    fn full_decomposition_is_complete(y in table(6)) {
        let d = full_decomposition(&y, y.width()).unwrap();
        let sum = d.first_order.iter().sum::<f64>() + d.higher_order.iter().map(|h| h.index).sum::<f64>();
        prop_assert!((sum - 1.0).abs() < TOL);
        prop_assert!(d.closure_residual.unwrap().abs() < TOL);
    }

    #[test]
    fn total_is_sum_over_containing_subsets(y in table(6)) {
        let d = full_decomposition(&y, y.width()).unwrap();
        for i in 0..y.width() {
            let containing = d.first_order[i]
                + d.higher_order.iter().filter(|h| h.members.contains(&i)).map(|h| h.index).sum::<f64>();
            prop_assert!((d.total[i] - containing).abs() < TOL);
            prop_assert!(d.total[i] + TOL >= d.first_order[i]);
        }
    }

    #[test]
    fn exact_indices_are_non_negative(y in table(5)) {
        let d = full_decomposition(&y, y.width()).unwrap();
        prop_assert!(d.first_order.iter().all(|&s| s >= -TOL));
        prop_assert!(d.higher_order.iter().all(|h| h.index >= -TOL));
        prop_assert!(d.total.iter().all(|&t| t <= 1.0 + TOL));
    }

    #[test]
    fn relabeling_permutes_indices(
        (y, perm) in table(5).prop_flat_map(|y| { let m = y.width(); (Just(y), permutation(m)) })
    ) {
        let before = full_decomposition(&y, y.width()).unwrap();
        let after = full_decomposition(&y.permuted(&perm), y.width()).unwrap();
        for (j, &p) in perm.iter().enumerate() {
            prop_assert!((after.first_order[j] - before.first_order[p]).abs() < TOL);
            prop_assert!((after.total[j] - before.total[p]).abs() < TOL);
        }
        for h in &after.higher_order {
            let mut orig: Vec<usize> = h.members.iter().map(|&j| perm[j]).collect();
            orig.sort_unstable();
            prop_assert!((h.index - before.interaction(&orig).unwrap()).abs() < TOL);
        }
    }

    #[test]
    fn absolute_form_matches_signed_on_monotone_tables(y in monotone_table(5)) {
        for i in 0..y.width() {
            let signed = first_order_index(&y, i).unwrap();
            prop_assert!((signed - first_order_index_abs(&y, i).unwrap()).abs() < TOL);
        }
    }

    #[test]
    fn absolute_form_never_below_signed(y in table(5)) {
        for i in 0..y.width() {
            prop_assert!(first_order_index_abs(&y, i).unwrap() + TOL >= first_order_index(&y, i).unwrap());
        }
    }

    #[test]
    fn bit_strings_round_trip(bits in 0u32..(1 << 12), width in 12usize..=16) {
        let mask = SubsetMask(bits);
        let s = mask.to_bit_string(width);
        prop_assert_eq!(s.len(), width);
        prop_assert_eq!(SubsetMask::parse_bit_string(&s), Some(mask));
    }

    #[test]
    fn set_hash_ignores_order(mut nodes in prop::collection::vec(0usize..1000, 1..8)) {
        let h = set_hash(&nodes);
        nodes.reverse();
        prop_assert_eq!(h, set_hash(&nodes));
    }

    #[test]
    fn edge_list_round_trips(g in small_graph()) {
        prop_assume!((0..g.node_count()).all(|u| g.degree(u) > 0));
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let (h, labels) = load_edge_list(buf.as_slice(), 0.5).unwrap();
        prop_assert_eq!(h.node_count(), g.node_count());
        prop_assert_eq!(h.edge_count(), g.edge_count());
        for (u, v, w) in g.edges() {
            let (a, b) = (labels.id(&u.to_string()).unwrap(), labels.id(&v.to_string()).unwrap());
            prop_assert!((h.weight(a, b).unwrap() - w).abs() <= 5e-7);
        }
    }

    #[test]
    fn budget_prefixes_are_stable(g in small_graph(), k in 1usize..3) {
        let n = g.node_count();
        prop_assume!(k < n);
        let picks = |k: usize| -> Vec<Vec<usize>> {
            vec![
                select_degree(&g, k).unwrap().nodes,
                select_eigen(&g, k, false).unwrap().nodes,
                select_degree_discount(&g, k, 0.1).unwrap().nodes,
                select_sigma(&g, k, 3).unwrap().nodes,
                select_pi(&g, k, 3, 100).unwrap().nodes,
            ]
        };
        for (short, long) in picks(k).iter().zip(picks(k + 1)) {
            prop_assert_eq!(short.as_slice(), &long[..k]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shared_worlds_are_monotone_and_submodular(g in small_graph(), seed in any::<u64>(), lt in any::<bool>()) {
        let n = g.node_count();
        let cfg = if lt { DiffusionConfig::lt(0.0, 1.0, 64, seed) } else { DiffusionConfig::ic(64, seed) };
        let a = vec![0];
        let b = vec![0, 1];
        let v = n - 1;
        let with = |s: &[usize]| { let mut t = s.to_vec(); t.push(v); spread_samples(&g, &t, &cfg).unwrap() };
        let (ya, yb) = (spread_samples(&g, &a, &cfg).unwrap(), spread_samples(&g, &b, &cfg).unwrap());
        let (yav, ybv) = (with(&a), with(&b));
        for j in 0..cfg.rounds {
            prop_assert!(ya[j] <= yb[j]);
            prop_assert!(yb[j] <= ybv[j]);
            if !lt {
                // reachability in a fixed live-edge world is submodular
                prop_assert!(yav[j] - ya[j] >= ybv[j] - yb[j]);
            }
        }
    }

    #[test]
    fn estimates_are_deterministic(g in small_graph(), seed in any::<u64>()) {
        let cfg = DiffusionConfig { coupling: Coupling::PerSeedSet, ..DiffusionConfig::ic(200, seed) };
        let first = estimate_spread(&g, &[0, 2], &cfg).unwrap();
        prop_assert_eq!(first, estimate_spread(&g, &[2, 0], &cfg).unwrap());
    }
}
