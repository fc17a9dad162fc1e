mod common;

use common::*;
use proptest::prelude::*;
use randswitch::frank_wolfe::run;
use randswitch::oracle::{config_from_mask, enumerate_optimal, exact_phi_all, ENUMERATION_CAP};
use randswitch::{phi, Configuration, Error, FwConfig, SolverConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn best_is_min_of_all_values((g, d, _s) in small_instance(7, 8), slack in 0usize..9) {
        let q = g.backbone_len() + slack;
        let res = enumerate_optimal(&g, &d, q).unwrap();
        let all = res.all_values.as_ref().unwrap();
        prop_assert_eq!(all.len(), res.evaluated_count);
        let min = all.values().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(res.best_phi, min);
        // Smallest mask among the minimizers.
        let first = all.iter().find(|(_, &v)| v == min).map(|(&k, _)| k).unwrap();
        let free: Vec<usize> = g.free_edges().collect();
        prop_assert_eq!(&res.best_config, &config_from_mask(&g, &free, first));
        prop_assert!(res.best_config.closed_count() <= q);
        prop_assert!(rel_err(res.best_phi, phi_oracle(&g, &res.best_config.to_switches(), &d)) < 1e-10);
    }

    #[test]
    fn best_phi_is_monotone_in_budget((g, d, _s) in small_instance(7, 8)) {
        let mut prev = f64::INFINITY;
        for q in g.backbone_len()..=g.m() {
            let best = enumerate_optimal(&g, &d, q).unwrap().best_phi;
            prop_assert!(best <= prev);
            prev = best;
        }
        let all_closed = enumerate_optimal(&g, &d, g.m()).unwrap();
        prop_assert!(rel_err(all_closed.best_phi, phi_oracle(&g, &vec![1.0; g.m()], &d)) < 1e-10);
    }

    #[test]
    fn exact_values_match_solver_path((g, d, _s) in small_instance(10, 10), masks in prop::collection::vec(any::<u64>(), 0..6)) {
        let free: Vec<usize> = g.free_edges().collect();
        let configs: Vec<Configuration> = masks.iter().map(|&m| config_from_mask(&g, &free, m & ((1 << free.len()) - 1))).collect();
        let exact = exact_phi_all(&g, &d, &configs).unwrap();
        prop_assert_eq!(exact.len(), configs.len());
        for (c, v) in configs.iter().zip(&exact) {
            let approx = phi(&g, &c.to_switches(), &d, &SolverConfig::with_epsilon(1e-10)).unwrap();
            prop_assert!(rel_err(approx, *v) < 1e-8);
        }
    }

    #[test]
    fn relaxation_lower_bounds_integral_optimum((g, d, _s) in small_instance(7, 8), slack in 1usize..5) {
        let q = g.backbone_len() + slack;
        let best = enumerate_optimal(&g, &d, q).unwrap();
        let mut cfg = FwConfig::new(q, 0.01);
        cfg.max_iterations = 2000;
        let out = run(&g, &d, &cfg).unwrap();
        prop_assert!(out.certificate.lower_bound() <= best.best_phi * (1.0 + 1e-9));
        if out.certificate.certified {
            // Near-optimal relaxed iterate sits below the integral optimum up to alpha.
            prop_assert!(out.certificate.phi_value <= best.best_phi * 1.01 * (1.0 + 1e-9));
        }
    }
}

#[test]
fn duplicates_and_empty_lists() {
    let (g, d, _s) = random_instance(1, 5, 4);
    assert!(exact_phi_all(&g, &d, &[]).unwrap().is_empty());
    let c = Configuration::backbone(&g);
    let v = exact_phi_all(&g, &d, &[c.clone(), c]).unwrap();
    assert_eq!(v[0], v[1]);
}

#[test]
fn cap_is_enforced() {
    let (g, d, _s) = random_instance(2, 4, ENUMERATION_CAP + 1);
    match enumerate_optimal(&g, &d, g.m()) {
        Err(Error::EnumerationCap { free, cap }) => {
            assert_eq!((free, cap), (ENUMERATION_CAP + 1, ENUMERATION_CAP))
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn backbone_only_budget() {
    let (g, d, _s) = random_instance(3, 6, 5);
    let res = enumerate_optimal(&g, &d, g.backbone_len()).unwrap();
    assert_eq!(res.evaluated_count, 1);
    assert_eq!(res.best_config, Configuration::backbone(&g));
}
