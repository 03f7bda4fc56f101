mod common;

use std::collections::BTreeSet;

use gridcascade::cascade::{
    paralysis_check, redistribute_power, run_cascade, CascadePolicy, RemovalCause,
};
use gridcascade::disturbance::{classify_node, node_poles, NodeVerdict, DEFAULT_POLE_ZERO_TOL};
use gridcascade::dynamics::{
    edge_flow, integrate_swing, swing_energy, SimulationOptions, SwingState,
};
use gridcascade::equilibrium::{jacobian, residual, solve_equilibrium, InitialGuess, SolverConfig};
use gridcascade::grid::connected_components;
use gridcascade::gridfile::{emit_grid, parse_grid};
use gridcascade::overload::{max_transient_flow, transition_flow_at, FlowTransition};
use gridcascade::stability::hessian;
use gridcascade::{EdgeKey, GridTopology, NodeId};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid(seed: u64, n: usize) -> GridTopology {
    common::random_grid(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

fn phases(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn residual_sums_to_total_power(seed: u64, n in 2usize..12, th in phases(12)) {
        let g = grid(seed, n);
        let f = residual(&g, &th[..n]).unwrap();
        let scale: f64 = g.edges().iter().map(|e| e.coupling).sum();
        prop_assert!((f.iter().sum::<f64>() - g.total_power()).abs() < 1e-12 * scale.max(1.0));
    }

    #[test]
    fn jacobian_symmetric_with_zero_row_sums(seed: u64, n in 2usize..12, th in phases(12)) {
        let g = grid(seed, n);
        let j = jacobian(&g, &th[..n]).unwrap();
        prop_assert!((&j - j.transpose()).amax() < 1e-14);
        for r in 0..n {
            prop_assert!(j.row(r).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn hessian_annihilates_ones(seed: u64, n in 2usize..12) {
        let g = grid(seed, n);
        let eq = solve_equilibrium(&g, &InitialGuess::Zeros, &SolverConfig::default()).unwrap();
        prop_assume!(eq.converged);
        prop_assert!(hessian(&g, &eq).unwrap().column_sum().amax() < 1e-10);
    }

    #[test]
    fn poles_obey_vieta(m in 0.01f64..10.0, d in 0.0f64..5.0, beta in -20.0f64..20.0) {
        let (s1, s2) = node_poles(m, d, beta);
        let sum = s1 + s2;
        let prod = s1 * s2;
        prop_assert!((sum.re + d / m).abs() <= 1e-10 * (d / m).max(1e-300) + 1e-300);
        prop_assert!(sum.im.abs() <= 1e-12 * (1.0 + s1.im.abs()));
        prop_assert!((prod.re - beta / m).abs() <= 1e-10 * (beta / m).abs() + 1e-300);
        prop_assert!(s1.re >= s2.re);
    }

    #[test]
    fn exceptional_iff_negative_beta(m in 0.01f64..10.0, d in 0.01f64..5.0, beta in -20.0f64..20.0) {
        prop_assume!(beta.abs() > 1e-6);
        let (s1, s2) = node_poles(m, d, beta);
        let v = classify_node(s1, s2, DEFAULT_POLE_ZERO_TOL);
        prop_assert_eq!(v == NodeVerdict::Exceptional, beta < 0.0);
    }

    #[test]
    fn edge_flow_is_antisymmetric(seed: u64, n in 2usize..12, th in phases(12)) {
        let g = grid(seed, n);
        for e in g.edges() {
            let ab = edge_flow(&g, &th[..n], e.a, e.b).unwrap();
            let ba = edge_flow(&g, &th[..n], e.b, e.a).unwrap();
            prop_assert_eq!(ab, -ba);
            prop_assert!(ab.abs() <= e.coupling);
        }
    }

    #[test]
    fn components_partition_nodes(seed: u64, n in 2usize..14, cuts in prop::collection::vec(any::<prop::sample::Index>(), 0..6)) {
        let mut g = grid(seed, n);
        for c in cuts {
            if g.edge_count() == 0 {
                break;
            }
            let e = g.edges()[c.index(g.edge_count())];
            g = g.remove_edge(e.a, e.b).unwrap();
        }
        let comps = connected_components(&g);
        let total: usize = comps.iter().map(|c| c.len()).sum();
        let union: BTreeSet<NodeId> = comps.iter().flatten().copied().collect();
        prop_assert_eq!(total, n);
        prop_assert_eq!(union, g.node_ids().into_iter().collect::<BTreeSet<_>>());
        for e in g.edges() {
            prop_assert!(comps.iter().any(|c| c.contains(&e.a) && c.contains(&e.b)));
        }
    }

    #[test]
    fn gridfile_round_trip(seed: u64, n in 2usize..12) {
        let g = grid(seed, n);
        prop_assert_eq!(parse_grid(&emit_grid(&g)).unwrap(), g);
    }

    #[test]
    fn overload_flag_monotone_in_alpha(f_old in -1.0f64..1.0, f_new in -1.0f64..1.0, k in 0.1f64..5.0, a1 in 0.01f64..2.0, a2 in 0.01f64..2.0) {
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let key = EdgeKey::new(NodeId(1), NodeId(2));
        let at = |alpha: f64| FlowTransition::new(key, f_old, f_new, alpha * k, 1.0, 0.5).overloaded;
        prop_assert!(!at(hi) || at(lo));
    }

    #[test]
    fn transition_starts_at_old_flow(f_old in -5.0f64..5.0, f_new in -5.0f64..5.0, nu in 0.1f64..5.0, d in 0.0f64..2.0) {
        let tr = FlowTransition::new(EdgeKey::new(NodeId(1), NodeId(2)), f_old, f_new, 1.0, nu, d);
        prop_assert_eq!(transition_flow_at(0.0, &tr, d), f_old);
        prop_assert!((tr.flow_max - max_transient_flow(f_old, f_new)).abs() == 0.0);
    }

    #[test]
    fn redistribution_balances_every_island(seed: u64, n in 3usize..14, picks in prop::collection::vec(any::<prop::sample::Index>(), 1..4)) {
        let g = grid(seed, n);
        let ids = g.node_ids();
        let failed: Vec<NodeId> = picks.iter().map(|p| ids[p.index(n)]).collect::<BTreeSet<_>>().into_iter().collect();
        let r = redistribute_power(&g, &failed).unwrap();
        for c in connected_components(&r.grid) {
            let s: f64 = c.iter().map(|id| r.grid.node(*id).unwrap().power).sum();
            prop_assert!(s.abs() < 1e-9);
        }
        for id in failed.iter().chain(&r.dead_nodes) {
            prop_assert!(r.grid.node(*id).is_none());
        }
        prop_assert_eq!(r.grid.node_count() + failed.len() + r.dead_nodes.len(), n);
        prop_assert_eq!(r.is_unbalanceable(), r.grid.is_empty());
        if r.grid.is_empty() {
            prop_assert!(paralysis_check(&r.grid));
        }
    }

    #[test]
    fn damped_energy_never_grows(seed: u64, n in 2usize..8, kick in -0.5f64..0.5) {
        let g = grid(seed, n);
        let eq = solve_equilibrium(&g, &InitialGuess::Zeros, &SolverConfig::default()).unwrap();
        prop_assume!(eq.converged);
        let mut s = SwingState::at_rest(eq.phases.clone());
        s.phases[0] += kick;
        let opts = SimulationOptions { horizon: 5.0, ..Default::default() };
        let traj = integrate_swing(&g, &s, &opts, &[]).unwrap();
        let e0 = swing_energy(&g, &s).unwrap();
        let e1 = swing_energy(&g, &traj.final_state()).unwrap();
        prop_assert!(e1 <= e0 + 1e-9 * e0.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cascade_accounting(seed: u64, n in 3usize..12, pick: prop::sample::Index, alpha in 0.3f64..2.0) {
        let g = grid(seed, n);
        let attack = g.edges()[pick.index(g.edge_count())].key();
        let policy = CascadePolicy { alpha, rng_seed: seed, ..Default::default() };
        let t = run_cascade(&g, attack, &policy, "prop").unwrap();
        let failed: Vec<NodeId> = t.rounds.iter().flat_map(|r| r.failed_nodes.clone()).collect();
        let dead: Vec<NodeId> = t.rounds.iter().flat_map(|r| r.dead_nodes.clone()).collect();
        let lost: BTreeSet<NodeId> = failed.iter().chain(&dead).copied().collect();
        prop_assert_eq!(lost.len(), failed.len() + dead.len());
        prop_assert_eq!(t.failed_nodes + t.dead_nodes + t.survivors, n);
        let removed: Vec<_> = t.rounds.iter().flat_map(|r| r.removed_edges.clone()).collect();
        let distinct: BTreeSet<EdgeKey> = removed.iter().map(|r| r.edge).collect();
        prop_assert_eq!(distinct.len(), removed.len());
        prop_assert_eq!(removed.iter().filter(|r| r.cause == RemovalCause::Attack).count(), 1);
        prop_assert_eq!(t.failed_edges, removed.len() - 1);
        prop_assert!(t.rounds.len() <= policy.max_rounds);
    }
}
