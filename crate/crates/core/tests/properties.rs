//! Property tests for invariants that should hold on every input.

use nalgebra::DMatrix;
use proptest::prelude::*;

use lfci_core::citest::{alpha_for_threshold, fisher_z_from_rho, partial_correlation, threshold_for_alpha, CiTester};
use lfci_core::discovery::{lfci, skeleton_search, Eta, PoolStrategy, SearchMode, SkeletonOptions};
use lfci_core::projection::{latent_project, latent_project_bruteforce, Partition};
use lfci_core::sem::{covariance, random_sem, short_trek_bound, short_trek_cov, spectral_norm, SemModel};
use lfci_core::separation::{l_gamma, local_graph, m_separated, m_separated_bruteforce};
use lfci_core::simbench::{d_gamma_curve, dshd, generate_graph, random_ancestral_graph, Family, GraphSpec};
use lfci_core::{Mark, MixedGraph, NodeId};

fn mag_strategy(max_nodes: usize) -> impl Strategy<Value = MixedGraph> {
    (4..=max_nodes, 0.2f64..0.5, 0.0f64..0.4, any::<u64>())
        .prop_map(|(p, e, b, seed)| random_ancestral_graph(p, e, b, seed))
}

/// Conditioning set from a bitmask over the nodes other than `i`, `j`.
fn subset(p: usize, i: NodeId, j: NodeId, mask: u32) -> Vec<NodeId> {
    (0..p).filter(|&v| v != i && v != j && mask & (1 << v) != 0).collect()
}

fn pair(p: usize, a: usize, b: usize) -> Option<(NodeId, NodeId)> {
    let (i, j) = (a % p, b % p);
    (i != j).then_some((i, j))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn m_separation_matches_path_enumeration(g in mag_strategy(8), a in 0usize..8, b in 0usize..8, mask in any::<u32>()) {
        let p = g.n_nodes();
        if let Some((i, j)) = pair(p, a, b) {
            let s = subset(p, i, j, mask);
            prop_assert_eq!(m_separated(&g, i, j, &s).unwrap(), m_separated_bruteforce(&g, i, j, &s).unwrap());
        }
    }

    #[test]
    fn m_separation_is_symmetric_and_label_free(
        g in mag_strategy(9),
        a in 0usize..9,
        b in 0usize..9,
        mask in any::<u32>(),
        perm in Just((0..9).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let p = g.n_nodes();
        if let Some((i, j)) = pair(p, a, b) {
            let s = subset(p, i, j, mask);
            let base = m_separated(&g, i, j, &s).unwrap();
            prop_assert_eq!(base, m_separated(&g, j, i, &s).unwrap());
            let perm: Vec<NodeId> = perm.into_iter().filter(|&v| v < p).collect();
            let h = g.relabel(&perm);
            let s2: Vec<NodeId> = s.iter().map(|&v| perm[v]).collect();
            prop_assert_eq!(base, m_separated(&h, perm[i], perm[j], &s2).unwrap());
        }
    }

    #[test]
    fn local_node_sets_grow_with_gamma(g in mag_strategy(10), a in 0usize..10, b in 0usize..10, gamma in 1usize..6) {
        let p = g.n_nodes();
        if let Some((i, j)) = pair(p, a, b) {
            let small = local_graph(&g, i, j, gamma);
            let large = local_graph(&g, i, j, gamma + 1);
            prop_assert!(small.nodes.iter().all(|v| large.nodes.contains(v)));
            prop_assert!(small.nodes.contains(&i) && small.nodes.contains(&j));
        }
    }

    #[test]
    fn batch_search_equals_sequential(g in mag_strategy(10), gamma in 1usize..5, eta in 0usize..4) {
        let p = g.n_nodes();
        let t = CiTester::local_oracle(g.clone(), gamma);
        let mut opts = SkeletonOptions::new(PoolStrategy::Gamma(gamma), Eta::Bounded(eta));
        let (seq, seq_sep, _) = skeleton_search(&t, p, &opts).unwrap();
        opts.mode = SearchMode::Batch;
        let (bat, bat_sep, _) = skeleton_search(&t, p, &opts).unwrap();
        prop_assert_eq!(seq, bat);
        prop_assert_eq!(seq_sep, bat_sep);
    }

    #[test]
    fn lfci_oracle_skeleton_is_exact_when_separators_are_small(g in mag_strategy(9), gamma in 2usize..5) {
        let eta = 3;
        if matches!(l_gamma(&g, gamma, eta), Ok(l) if l <= eta) {
            let out = lfci(&CiTester::local_oracle(g.clone(), gamma), g.n_nodes(), eta, gamma).unwrap();
            prop_assert_eq!(out.graph.skeleton(), g.skeleton());
            prop_assert!(out.stats.m_reach <= eta);
        }
    }

    #[test]
    fn fisher_z_is_monotone_in_alpha(rho in -0.99f64..0.99, n in 10usize..2000, s in 0usize..5, a1 in 1e-8f64..0.5, a2 in 1e-8f64..0.5) {
        let (lo, hi) = (a1.min(a2), a1.max(a2));
        // rejecting at a small alpha implies rejecting at every larger alpha
        let dep_lo = !fisher_z_from_rho(rho, n, s, lo).unwrap();
        let dep_hi = !fisher_z_from_rho(rho, n, s, hi).unwrap();
        prop_assert!(!dep_lo || dep_hi);
    }

    #[test]
    fn alpha_and_threshold_are_inverse(t in 0.001f64..0.95, n in 20usize..5000, s in 0usize..5) {
        let alpha = alpha_for_threshold(t, n, s);
        if alpha > 1e-300 {
            let back = threshold_for_alpha(alpha, n, s);
            prop_assert!((back - t).abs() <= 1e-6 * t.max(1e-3), "{} vs {}", back, t);
        }
    }

    #[test]
    fn partial_correlation_ignores_argument_order(seed in any::<u64>(), a in 0usize..6, b in 0usize..6, mask in any::<u32>()) {
        let g = generate_graph(&GraphSpec { family: Family::ER, p: 6, avg_degree: 2.5 }, seed);
        let sigma = covariance(&random_sem(&g, 0.2, 1.0, (1.0, 2.0), seed).unwrap()).unwrap();
        if let Some((i, j)) = pair(6, a, b) {
            let s = subset(6, i, j, mask);
            let mut rev = s.clone();
            rev.reverse();
            let r1 = partial_correlation(&sigma, i, j, &s).unwrap();
            let r2 = partial_correlation(&sigma, j, i, &rev).unwrap();
            prop_assert!((r1 - r2).abs() < 1e-10);
            prop_assert!(r1.abs() <= 1.0);
        }
    }

    #[test]
    fn dshd_is_a_symmetric_distance(g in mag_strategy(7), h in mag_strategy(7)) {
        if g.n_nodes() == h.n_nodes() {
            let d = dshd(&g, &h).unwrap();
            prop_assert_eq!(d, dshd(&h, &g).unwrap());
            prop_assert_eq!(dshd(&g, &g).unwrap(), 0.0);
            let adjacency = (0..g.n_nodes())
                .flat_map(|a| (a + 1..g.n_nodes()).map(move |b| (a, b)))
                .filter(|&(a, b)| g.is_adjacent(a, b) != h.is_adjacent(a, b))
                .count();
            prop_assert!(d >= adjacency as f64);
        }
    }

    #[test]
    fn projection_matches_bruteforce(seed in any::<u64>(), p in 5usize..9, latent_mask in any::<u32>()) {
        let dag = generate_graph(&GraphSpec { family: Family::ER, p, avg_degree: 2.5 }, seed);
        let latent: Vec<NodeId> = (0..p).filter(|&v| latent_mask & (1 << v) != 0).take(p - 2).collect();
        let part = Partition::new(p, &latent, &[]).unwrap();
        prop_assert_eq!(latent_project(&dag, &part).unwrap(), latent_project_bruteforce(&dag, &part).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn short_trek_error_respects_bound(seed in any::<u64>(), p in 3usize..12, scale in 0.1f64..0.9, gamma in 0usize..8) {
        let g = generate_graph(&GraphSpec { family: Family::PL, p, avg_degree: 2.0 }, seed);
        let m = random_sem(&g, 0.1, 1.0, (1.0, 2.0), seed).unwrap();
        let norm = spectral_norm(&m.b);
        prop_assume!(norm > 0.0);
        let b: DMatrix<f64> = &m.b * (scale / norm);
        let m = SemModel { b, ..m };
        let err = spectral_norm(&(covariance(&m).unwrap() - short_trek_cov(&m, gamma)));
        prop_assert!(err <= short_trek_bound(spectral_norm(&m.omega), scale, gamma) + 1e-10);
    }

    #[test]
    fn short_trek_curve_ends_exact(seed in any::<u64>(), p in 3usize..15) {
        let g = generate_graph(&GraphSpec { family: Family::ER, p, avg_degree: 2.0 }, seed);
        let m = random_sem(&g, 0.1, 1.0, (1.0, 2.0), seed).unwrap();
        let curve = d_gamma_curve(&m).unwrap();
        prop_assert!(curve.len() <= p);
        prop_assert!(*curve.last().unwrap() < 1e-9);
    }

    #[test]
    fn generated_mags_have_only_directed_and_bidirected_edges(g in mag_strategy(10)) {
        for e in g.edges() {
            prop_assert!(e.mark_at_a != Mark::Circle && e.mark_at_b != Mark::Circle);
            prop_assert!(e.mark_at_a == Mark::Head || e.mark_at_b == Mark::Head);
        }
    }
}
