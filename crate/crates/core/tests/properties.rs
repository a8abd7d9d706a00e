use hardcore::glauber::{exact_mixing_time, run_chain, transition_matrix, Chain};
use hardcore::graph::{apply_pinning, boundary};
use hardcore::uniqueness::{
    critical_fugacity, fixed_point, fixed_point_upper_bound, iterate_recurrence,
    proof_functions_at, slack_of_fixed_point, tree_recurrence, HardcoreParams,
};
use hardcore::{Configuration, Graph, Pinning};
use proptest::prelude::*;

fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        proptest::collection::vec(any::<bool>(), pairs.len()).prop_map(move |keep| {
            let edges: Vec<_> = pairs
                .iter()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(&e, _)| e)
                .collect();
            Graph::from_edges(n, &edges).unwrap()
        })
    })
}

/// A graph with a greedy independent set chosen from a vertex order.
fn arb_graph_and_set(max_n: usize) -> impl Strategy<Value = (Graph, Configuration)> {
    arb_graph(max_n).prop_flat_map(|g| {
        let n = g.n();
        (
            Just(g),
            Just(n),
            proptest::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(g, n, want)| {
                let mut c = Configuration::empty(n);
                for (v, &w) in want.iter().enumerate() {
                    if w && g.neighbors(v).iter().all(|&w| !c.is_occupied(w)) {
                        c.set(v, true);
                    }
                }
                (g, c)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn edge_list_round_trip(g in arb_graph(12)) {
        let back = Graph::parse(&g.to_edge_list()).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn boundary_is_outside_and_adjacent(g in arb_graph(10), pick in any::<u16>()) {
        let s: Vec<usize> = (0..g.n()).filter(|&v| pick >> v & 1 == 1).collect();
        let b = boundary(&g, &s).unwrap();
        for &v in &b {
            prop_assert!(!s.contains(&v));
            prop_assert!(s.iter().any(|&u| g.has_edge(u, v)));
        }
        for &u in &s {
            for &w in g.neighbors(u) {
                prop_assert!(s.contains(&w) || b.contains(&w));
            }
        }
    }

    #[test]
    fn pinning_removes_domain_and_blocked((g, ones) in arb_graph_and_set(10), zeros in any::<u16>()) {
        let mut assign: Vec<(usize, bool)> = ones.occupied_vertices().into_iter().map(|v| (v, true)).collect();
        assign.extend((0..g.n()).filter(|&v| zeros >> v & 1 == 1 && !ones.is_occupied(v)).map(|v| (v, false)));
        let tau = Pinning::new(&g, assign).unwrap();
        let reduced = apply_pinning(&g, &tau).unwrap();
        let blocked = boundary(&g, &tau.ones()).unwrap();
        for w in 0..reduced.n() {
            let v = reduced.label(w);
            prop_assert!(!tau.is_pinned(v) && !blocked.contains(&v));
        }
        prop_assert_eq!(reduced.n() + tau.len() + blocked.iter().filter(|&&v| !tau.is_pinned(v)).count(), g.n());
        for (a, b) in reduced.edges() {
            prop_assert!(g.has_edge(reduced.label(a), reduced.label(b)));
        }
    }

    #[test]
    fn configuration_masks_round_trip(n in 0usize..64, mask in any::<u64>()) {
        let mask = if n == 64 { mask } else { mask & ((1u64 << n) - 1) };
        let c = Configuration::from_mask(n, mask);
        prop_assert_eq!(c.to_mask(), Some(mask));
        prop_assert_eq!(c.popcount(), mask.count_ones() as usize);
    }

    #[test]
    fn chain_stays_independent((g, start) in arb_graph_and_set(9), lambda in 0.05f64..20.0, seed in any::<u64>()) {
        let mut chain = Chain::new(&g, lambda, start, seed, 0).unwrap();
        let mut prev = chain.config().clone();
        for _ in 0..2_000 {
            chain.step();
            prop_assert!(chain.config().is_independent(&g));
            prop_assert!(chain.config().hamming(&prev) <= 1);
            prev = chain.config().clone();
        }
    }

    #[test]
    fn trajectory_popcounts_are_consistent((g, start) in arb_graph_and_set(9), seed in any::<u64>()) {
        let run = run_chain(&g, 1.3, &start, 500, seed, true).unwrap();
        let rows = run.trajectory.unwrap();
        prop_assert_eq!(rows.len(), 500);
        prop_assert_eq!(rows.last().unwrap().popcount, run.state.config.popcount());
        prop_assert!(rows.iter().enumerate().all(|(i, r)| r.step == i as u64 + 1));
        let again = run_chain(&g, 1.3, &start, 500, seed, false).unwrap();
        prop_assert_eq!(again.state, run.state);
    }

    #[test]
    fn transition_matrices_are_reversible(g in arb_graph(8), lambda in 0.05f64..20.0) {
        let p = transition_matrix(&g, lambda).unwrap();
        prop_assert!(p.max_row_sum_error() < 1e-12);
        prop_assert!(p.max_detailed_balance_error() < 1e-12);
        prop_assert!(p.max_stationarity_error() < 1e-12);
        // Errors if TV ever increases along the way.
        let mix = exact_mixing_time(&p).unwrap();
        prop_assert!(mix.t_mix >= 1);
    }

    #[test]
    fn slack_round_trips(d in 2u32..=10, delta in 0.001f64..0.999) {
        let params = HardcoreParams::from_slack(d + 1, delta).unwrap();
        let x = fixed_point(d, params.lambda).unwrap().x_hat;
        prop_assert!((slack_of_fixed_point(d, x).unwrap() - delta).abs() < 1e-9);
        prop_assert!(x <= fixed_point_upper_bound(d, delta).unwrap() + 1e-12);
        prop_assert!((tree_recurrence(d, params.lambda, x).unwrap() - x).abs() < 1e-12);
    }

    #[test]
    fn iterates_bracket_the_fixed_point(d in 2u32..=10, delta in 0.0f64..0.999) {
        let lambda = (1.0 - delta) * critical_fugacity(d + 1).unwrap();
        let x = fixed_point(d, lambda).unwrap().x_hat;
        let mut even = iterate_recurrence(d, lambda, 0.0, 0);
        let mut odd = iterate_recurrence(d, lambda, 0.0, 1);
        for t in 1..=100u64 {
            let e = iterate_recurrence(d, lambda, 0.0, 2 * t);
            let o = iterate_recurrence(d, lambda, 0.0, 2 * t + 1);
            prop_assert!(e >= even && e <= x + 1e-12);
            prop_assert!(o <= odd && o >= x - 1e-12);
            even = e;
            odd = o;
        }
    }

    #[test]
    fn auxiliary_functions_peak_at_the_fixed_point(d in 2u32..=8, delta in 0.01f64..0.99) {
        let lambda = (1.0 - delta) * critical_fugacity(d + 1).unwrap();
        let x_hat = fixed_point(d, lambda).unwrap().x_hat;
        let at = proof_functions_at(d, lambda, x_hat, x_hat).unwrap();
        let phi_star = 1.0 / (1.0 - f64::from(d) * x_hat);
        prop_assert!((at.f - phi_star).abs() < 1e-9 * phi_star);
        prop_assert!((1.0 + f64::from(d) * at.a - phi_star).abs() < 1e-9 * phi_star);
        prop_assert!(at.h.abs() < 1e-12 * lambda.max(1.0));
        for i in 0..=400 {
            let x = f64::from(i) / 400.0;
            let pf = proof_functions_at(d, lambda, x_hat, x).unwrap();
            prop_assert!(pf.validity_lhs < 1.0);
            prop_assert!(pf.f <= at.f * (1.0 + 1e-12));
            prop_assert!(pf.g >= at.g * (1.0 - 1e-12));
            prop_assert!(pf.a <= at.a * (1.0 + 1e-12));
        }
    }
}

#[test]
fn long_runs_visit_only_independent_sets() {
    let petersen = Graph::from_edges(
        10,
        &[
            (0, 1),
            (1, 2),
            (2, 3),
            (3, 4),
            (4, 0),
            (0, 5),
            (1, 6),
            (2, 7),
            (3, 8),
            (4, 9),
            (5, 7),
            (7, 9),
            (9, 6),
            (6, 8),
            (8, 5),
        ],
    )
    .unwrap();
    let grid: Vec<(usize, usize)> = (0..30)
        .flat_map(|v| {
            let (r, c) = (v / 6, v % 6);
            let mut e = Vec::new();
            if c + 1 < 6 {
                e.push((v, v + 1));
            }
            if r + 1 < 5 {
                e.push((v, v + 6));
            }
            e
        })
        .collect();
    let grid = Graph::from_edges(30, &grid).unwrap();
    for (g, lambda) in [(&petersen, 4.0), (&grid, 2.5)] {
        let mut chain = Chain::new(g, lambda, Configuration::empty(g.n()), 99, 3).unwrap();
        for _ in 0..100_000 {
            chain.step();
            assert!(chain.config().is_independent(g));
        }
        assert_eq!(chain.state().step, 100_000);
    }
}
