mod common;

use common::*;
use proptest::prelude::*;
use randswitch::frank_wolfe::{
    fw_gap, hexagon_dual_norm, hexagon_norm, iteration_bound, lmo_top_q, run, smoothness_sample,
};
use randswitch::laplacian::algebraic_connectivity;
use randswitch::oracle::enumerate_optimal;
use randswitch::{exact_phi, DemandVector, Edge, FwConfig, Graph, StepRule, SwitchVector};

/// Small instance with at most `max_free` free edges and a budget strictly
/// between the backbone size and `m`.
fn enumerable(seed: u64, max_n: usize, max_free: usize) -> (Graph, DemandVector, usize) {
    let mut r = rng(seed);
    let n = 3 + (seed as usize % (max_n - 2));
    let extra = 2 + (seed as usize / 7) % (max_free - 1);
    let g = random_graph(&mut r, n, extra);
    let d = random_demand(&mut r, n);
    let q = g.backbone_len() + 1 + (seed as usize / 3) % (extra - 1).max(1);
    (g, d, q)
}

fn brute_force_dual(u: &[f64], q: usize) -> f64 {
    // The polytope {||y||_1 <= 1, ||y||_inf <= 1/q} has its vertices in
    // {-1/q, 0, 1/q}^len, so maximizing over that grid is exact.
    let len = u.len();
    let mut best = 0.0f64;
    for code in 0..3usize.pow(len as u32) {
        let mut c = code;
        let mut val = 0.0;
        let mut l1 = 0.0;
        for &ui in u {
            let y = (c % 3) as f64 - 1.0;
            c /= 3;
            val += ui * y / q as f64;
            l1 += y.abs() / q as f64;
        }
        if l1 <= 1.0 + 1e-12 {
            best = best.max(val);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lmo_is_a_minimizing_vertex(seed in any::<u64>(), extra_q in 0usize..6) {
        let (g, _d, s) = random_instance(seed, 8, 6);
        let grad: Vec<f64> = s.iter().map(|x| -x).collect();
        let q = g.backbone_len() + extra_q;
        let v = lmo_top_q(&grad, &g, q).unwrap();
        prop_assert_eq!(v.iter().sum::<f64>() as usize, q.min(g.m()));
        prop_assert!(g.backbone().iter().all(|&e| v[e] == 1.0));
        // No budget-feasible binary vertex does better.
        let free: Vec<usize> = g.free_edges().collect();
        let value = |x: &[f64]| grad.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        for mask in 0u32..(1 << free.len()) {
            if mask.count_ones() as usize > q - g.backbone_len() {
                continue;
            }
            let mut w = SwitchVector::backbone(&g).into_inner();
            for (k, &e) in free.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    w[e] = 1.0;
                }
            }
            prop_assert!(value(&v) <= value(&w) + 1e-12);
        }
    }

    #[test]
    fn hexagon_dual_matches_brute_force(u in prop::collection::vec(-10.0f64..10.0, 1..=8), q in 1usize..=10) {
        prop_assert!((hexagon_dual_norm(&u, q) - brute_force_dual(&u, q)).abs() < 1e-9);
    }

    #[test]
    fn hexagon_norms_are_dual(u in prop::collection::vec(-10.0f64..10.0, 1..=8), v in prop::collection::vec(-10.0f64..10.0, 8), q in 1usize..=10) {
        // Hoelder: <u, v> <= ||u||_hex * ||v||_hex,*.
        let v = &v[..u.len()];
        let inner: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        prop_assert!(inner <= hexagon_norm(&u, q) * hexagon_dual_norm(v, q) * (1.0 + 1e-12) + 1e-12);
    }
}

#[test]
fn run_invariants_and_soundness() {
    let mut certified_runs = 0;
    for seed in 0..40 {
        let (g, d, q) = enumerable(seed, 8, 12);
        let best = enumerate_optimal(&g, &d, q).unwrap();
        for alpha in [0.05, 0.1, 0.5] {
            for rule in [StepRule::Classic, StepRule::MonotoneGuard] {
                let mut cfg = FwConfig::new(q, alpha);
                cfg.step_rule = rule;
                let out = run(&g, &d, &cfg).unwrap();
                for rec in &out.trace.records {
                    assert!(rec.l1 <= q as f64 + 1e-9);
                    assert!(rec.gap >= -1e-12);
                }
                assert!(g.backbone().iter().all(|&e| out.s[e] == 1.0));
                assert!(out.s.iter().all(|&x| (0.0..=1.0).contains(&x)));
                if rule == StepRule::MonotoneGuard {
                    for w in out.trace.records.windows(2) {
                        assert!(w[1].phi <= w[0].phi);
                    }
                }
                let phi_t = exact_phi(&g, &out.s, &d).unwrap();
                // Convexity: the gap bounds suboptimality against the integral optimum.
                assert!(out.certificate.gap >= phi_t - best.best_phi - 1e-9 * phi_t);
                assert!(out.certificate.lower_bound() <= best.best_phi * (1.0 + 1e-9));
                if out.certificate.certified {
                    certified_runs += 1;
                    assert!(
                        phi_t <= (1.0 + alpha) * best.best_phi * (1.0 + 1e-6),
                        "seed {seed}"
                    );
                }
            }
        }
    }
    assert!(certified_runs > 100);
}

#[test]
fn wheel_graph_certifies_near_optimum() {
    // Hub 0, rim 1..=5; spokes form the backbone.
    let mut edges: Vec<Edge> = (1..=5).map(|i| Edge::new(0, i, 1.0)).collect();
    edges.extend((1..=5).map(|i| Edge::new(i, i % 5 + 1, 1.0)));
    let g = Graph::new(6, edges, (0..5).collect()).unwrap();
    let d = DemandVector::pair(6, 1, 3);
    let out = run(&g, &d, &FwConfig::new(6, 0.1)).unwrap();
    assert!(out.certificate.certified);
    let best = enumerate_optimal(&g, &d, 6).unwrap();
    assert!(out.certificate.phi_value <= 1.1 * best.best_phi);
}

#[test]
fn full_budget_approaches_all_closed() {
    for seed in 0..10 {
        let (g, d, _s) = random_instance(seed, 10, 12);
        let out = run(&g, &d, &FwConfig::new(g.m(), 0.01)).unwrap();
        assert!(out.certificate.certified);
        let floor = exact_phi(&g, &vec![1.0; g.m()], &d).unwrap();
        assert!(out.certificate.phi_value <= 1.01 * floor * (1.0 + 1e-9));
        assert!(out.certificate.phi_value >= floor * (1.0 - 1e-9));
    }
}

#[test]
fn certification_within_iteration_bound() {
    for seed in 0..30 {
        let (g, d, q) = enumerable(seed, 10, 14);
        // Normalize so that d^T L_T^+ d = 1.
        let phi0 = exact_phi(&g, &SwitchVector::backbone(&g), &d).unwrap();
        let d = d.scaled(1.0 / phi0.sqrt());
        for alpha in [0.05, 0.1, 0.5] {
            let bound = iteration_bound(2.0, q, g.backbone_len(), alpha);
            let mut cfg = FwConfig::new(q, alpha);
            cfg.max_iterations = bound;
            let out = run(&g, &d, &cfg).unwrap();
            assert!(out.certificate.certified, "seed {seed} alpha {alpha}");
            assert!(out.iterations <= bound);
        }
    }
}

#[test]
fn smoothness_diagnostics_on_scaled_instances() {
    for seed in 0..40 {
        let (g, d, _s) = random_instance(seed, 8, 10);
        let lam = algebraic_connectivity(&g, &SwitchVector::backbone(&g)).unwrap();
        let g = g.scaled(1.0 / lam);
        let mut r = rng(seed + 1000);
        let s1 = random_switches(&mut r, &g, 0.0);
        let s2 = random_switches(&mut r, &g, 0.0);
        let q = g.backbone_len() + 3;
        let sample = smoothness_sample(&g, &d, &s1, &s2, q).unwrap();
        let phi_max = exact_phi(&g, &SwitchVector::backbone(&g), &d).unwrap();
        assert!(phi_max <= 1.0 + 1e-9);
        assert!(
            sample.euclidean <= 2.0 * phi_max * 1.01,
            "seed {seed}: {sample:?}"
        );
        assert!(sample.hexagon <= 2.0 * phi_max / q as f64 * 1.01);
    }
}

#[test]
fn gap_is_zero_at_the_vertex() {
    let (g, d, _s) = random_instance(5, 6, 4);
    let diff = randswitch::congestion::exact_diff(&g, &SwitchVector::ones(&g), &d).unwrap();
    let v = lmo_top_q(&diff.grad, &g, g.m()).unwrap();
    assert_eq!(fw_gap(&diff.grad, &v, &v), 0.0);
}
