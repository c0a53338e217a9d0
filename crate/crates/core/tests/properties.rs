use std::collections::BTreeSet;

use fdc_core::optimizer::{minimize_slem, objective, OptConfig};
use fdc_core::sim::{average_drift, monte_carlo_matrices, run_consensus, InitDistribution};
use fdc_core::spectral::{eig_sym, slem_of, stratify, ClosedFormNetwork};
use fdc_core::topology::{build_branch, compose_star, edge_orbits, random_connected_core, BranchKind};
use fdc_core::weighting::{closed_form_weights, heuristic_weights, HeuristicParams};
use fdc_core::{BranchSpec, Edge, EdgeWeights, Network, SimConfig, WeightMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn spec_strategy() -> impl Strategy<Value = BranchSpec> {
    prop_oneof![
        (1usize..8).prop_map(BranchSpec::path),
        (2usize..7, 1usize..5).prop_map(|(m, n)| BranchSpec::lollipop(m, n)),
        (3usize..7, 1usize..4, 1usize..4).prop_map(|(m, a, b)| BranchSpec::semi_complete(m, a, b)),
        (1usize..4, 0usize..3, 0usize..3).prop_map(|(m, a, b)| BranchSpec::ladder(m, a, b)),
        (1usize..5, 1usize..6).prop_map(|(m, k)| BranchSpec::palm(m, k)),
    ]
}

fn core_strategy() -> impl Strategy<Value = Network> {
    (2usize..8, 0.0f64..0.8, any::<u64>()).prop_map(|(n, p, seed)| random_connected_core(n, p, seed).unwrap())
}

/// The core with node `i` renamed `perm[i]`.
fn relabel(net: &Network, perm: &[usize]) -> Network {
    let edges: Vec<Edge> = net.edges.iter().map(|e| Edge::new(perm[e.u], perm[e.v])).collect();
    Network::from_core(net.node_count, &edges).unwrap()
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut s = seed;
    for i in (1..n).rev() {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        p.swap(i, (s >> 33) as usize % (i + 1));
    }
    p
}

fn average_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, n, 1.0 / n as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn branches_are_connected_and_deterministic(spec in spec_strategy()) {
        let a = build_branch(&spec).unwrap();
        let b = build_branch(&spec).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.node_count, spec.node_count());
        prop_assert_eq!(a.edges.len(), spec.internal_edge_count());
        let net = Network::standalone(&spec).unwrap();
        prop_assert!(net.is_connected());
        let classes = edge_orbits(&a);
        let covered: usize = classes.iter().map(|c| c.edges.len()).sum();
        prop_assert_eq!(covered, a.edges.len());
        let union: BTreeSet<Edge> = classes.iter().flat_map(|c| c.edges.iter().copied()).collect();
        prop_assert_eq!(union.len(), a.edges.len());
    }

    #[test]
    fn star_counts(spec in spec_strategy(), count in 1usize..5) {
        let net = compose_star(&spec, count).unwrap();
        prop_assert_eq!(net.node_count, 1 + count * spec.node_count());
        prop_assert_eq!(net.edges.len(), count * (spec.internal_edge_count() + 1));
    }

    #[test]
    fn heuristic_matrices_are_valid(core in core_strategy(), which in 0usize..3) {
        let params = [HeuristicParams::metropolis(), HeuristicParams::max_degree(), HeuristicParams::best_constant()][which];
        let w = heuristic_weights(&core, params).unwrap();
        let n = core.node_count;
        for i in 0..n {
            prop_assert!((w.row_sums()[i] - 1.0).abs() <= 1e-12);
            for j in 0..n {
                prop_assert_eq!(w.get(i, j), w.get(j, i));
                if i != j && !core.has_edge(Edge::new(i, j)) {
                    prop_assert_eq!(w.get(i, j), 0.0);
                }
            }
            if which < 2 {
                prop_assert!(w.get(i, i) >= 0.0);
            }
        }
    }

    #[test]
    fn heuristics_are_permutation_equivariant(core in core_strategy(), seed in any::<u64>(), which in 0usize..3) {
        let params = [HeuristicParams::metropolis(), HeuristicParams::max_degree(), HeuristicParams::best_constant()][which];
        let perm = permutation(core.node_count, seed);
        let moved = relabel(&core, &perm);
        let w = heuristic_weights(&core, params).unwrap();
        let wp = heuristic_weights(&moved, params).unwrap();
        for i in 0..core.node_count {
            for j in 0..core.node_count {
                prop_assert!((w.get(i, j) - wp.get(perm[i], perm[j])).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn spectrum_invariants(core in core_strategy()) {
        let w = heuristic_weights(&core, HeuristicParams::metropolis()).unwrap();
        let s = eig_sym(&w).unwrap();
        let n = core.node_count;
        let norm = w.entries().norm();
        for i in 0..n {
            let v = s.eigenvectors.column(i);
            let r = (w.entries() * v - v * s.eigenvalues[i]).norm();
            prop_assert!(r <= 1e-10 * norm.max(1.0));
        }
        let gram = s.eigenvectors.transpose() * &s.eigenvectors - DMatrix::<f64>::identity(n, n);
        prop_assert!(gram.amax() <= 1e-10);
        prop_assert!((s.eigenvalues[0] - 1.0).abs() <= 1e-10);
        prop_assert!(s.eigenvalues.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn slem_equals_deviation_norm(core in core_strategy(), which in 0usize..3) {
        let params = [HeuristicParams::metropolis(), HeuristicParams::max_degree(), HeuristicParams::best_constant()][which];
        let w = heuristic_weights(&core, params).unwrap();
        let n = core.node_count;
        let by_eigen = slem_of(&w).unwrap();
        let by_svd = (w.entries() - average_matrix(n)).singular_values().max();
        prop_assert!((by_eigen - by_svd).abs() <= 1e-10);
    }

    #[test]
    fn objective_is_convex(core in core_strategy(), seed in any::<u64>()) {
        let mut s = seed;
        let mut draw = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.25
        };
        let a: EdgeWeights = core.edges.iter().map(|e| (*e, draw())).collect();
        let b: EdgeWeights = core.edges.iter().map(|e| (*e, draw())).collect();
        let mid: EdgeWeights = a.iter().map(|(e, v)| (*e, 0.5 * (v + b[e]))).collect();
        let n = core.node_count;
        let fa = objective(n, &a).unwrap();
        let fb = objective(n, &b).unwrap();
        prop_assert!(objective(n, &mid).unwrap() <= 0.5 * (fa + fb) + 1e-12);
    }

    #[test]
    fn consensus_conserves_the_average(core in core_strategy(), seed in any::<u64>()) {
        let w = heuristic_weights(&core, HeuristicParams::best_constant()).unwrap();
        let config = SimConfig { seed, ..SimConfig::default() };
        let x0 = fdc_core::sim::initial_values(&config, 0, core.node_count);
        let run = run_consensus(&w, &x0, 200).unwrap();
        prop_assert!(average_drift(&run) <= 1e-12);
        prop_assert!(run.errors.iter().all(|e| *e >= 0.0));
    }

    #[test]
    fn stratification_preserves_spectrum(spec in spec_strategy(), seed in any::<u64>()) {
        let branch = build_branch(&spec).unwrap();
        let mut w = closed_form_weights(&branch);
        let mut s = seed;
        for v in w.values.values_mut() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = 0.6 * ((s >> 11) as f64 / (1u64 << 53) as f64);
        }
        let form = stratify(&branch, &w, 0.3).unwrap();
        let r = fdc_core::verify_block_structure(&form, &form.matrix).unwrap();
        prop_assert!(r.max_off_block <= 1e-10);
        prop_assert!(r.spectrum_deviation <= 1e-9);
        prop_assert!(r.orthonormality <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn optimizer_is_permutation_invariant(core in core_strategy(), seed in any::<u64>()) {
        let perm = permutation(core.node_count, seed);
        let moved = relabel(&core, &perm);
        let config = OptConfig::default();
        let all = |n: &Network| n.edges.iter().copied().collect::<BTreeSet<Edge>>();
        let a = minimize_slem(&core, &EdgeWeights::new(), &all(&core), &config).unwrap();
        let b = minimize_slem(&moved, &EdgeWeights::new(), &all(&moved), &config).unwrap();
        prop_assert!((a.slem - b.slem).abs() <= 1e-8);
    }
}

#[test]
fn decoupled_multiplicities_over_sweep() {
    for m in 3..=7 {
        for k in 1..=5 {
            for spec in [
                BranchSpec::lollipop(m, 2),
                BranchSpec::semi_complete(m, 1, 2),
                BranchSpec::ladder(m, 1, 1),
                BranchSpec::palm(m, k),
            ] {
                let branch = build_branch(&spec).unwrap();
                let form = stratify(&branch, &closed_form_weights(&branch), 0.25).unwrap();
                let expected = match spec.kind {
                    BranchKind::Lollipop => m - 2,
                    BranchKind::SemiComplete => m - 3,
                    BranchKind::Ladder => m + 1,
                    BranchKind::Palm => k - 1,
                    BranchKind::Path => 0,
                };
                assert_eq!(form.decoupled_multiplicity(), expected, "{spec}");
            }
        }
    }
}

#[test]
fn optimizer_never_beats_known_optima() {
    let config = OptConfig::default();
    for n in 3..=6 {
        let edges: Vec<Edge> = (0..n - 1).map(|i| Edge::new(i, i + 1)).collect();
        let net = Network::from_core(n, &edges).unwrap();
        let free: BTreeSet<Edge> = net.edges.iter().copied().collect();
        let r = minimize_slem(&net, &EdgeWeights::new(), &free, &config).unwrap();
        assert!(r.slem >= (std::f64::consts::PI / n as f64).cos() - 1e-9);
    }
    // closed-form weights are optimal on these networks
    for kind in [
        ClosedFormNetwork::Barbell { m1: 4, m2: 3, n: 2 },
        ClosedFormNetwork::SemiComplete { m: 4, n1: 1, n2: 2 },
    ] {
        let (net, weights) = fdc_core::experiments::closed_form_network(kind).unwrap();
        let optimum = objective(net.node_count, &weights).unwrap();
        let free: BTreeSet<Edge> = net.edges.iter().copied().collect();
        let r = minimize_slem(&net, &EdgeWeights::new(), &free, &config).unwrap();
        assert!(r.slem >= optimum - 1e-9, "{kind:?}: {} < {optimum}", r.slem);
        assert!(r.slem <= optimum + 1e-8, "{kind:?}: {} > {optimum}", r.slem);
    }
}

#[test]
fn monte_carlo_is_thread_count_independent() {
    let net = compose_star(&BranchSpec::palm(2, 3), 4).unwrap();
    let w = heuristic_weights(&net, HeuristicParams::metropolis()).unwrap();
    let matrices = vec![("mh".to_string(), w), ("id".to_string(), WeightMatrix::identity(net.node_count))];
    let config = SimConfig {
        steps: 50,
        trials: 300,
        seed: 9,
        init: InitDistribution::StandardNormal,
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| monte_carlo_matrices(&matrices, &config).unwrap())
    };
    let one = run(1);
    let many = run(4);
    assert_eq!(one, many);
    assert_eq!(one.to_csv(), many.to_csv());
}
