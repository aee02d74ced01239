mod common;

use common::{grid_2x2, quantile_oracle, random_pair_member, vertex_enumeration};
use mixcontract::measures::{euclidean, ParamSpace};
use mixcontract::seeds::rng;
use mixcontract::transport::{transport, wasserstein, wasserstein_1d_oracle, GroundCost};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn line() -> ParamSpace {
    ParamSpace::interval(-5.0, 5.0).unwrap()
}

fn plane() -> ParamSpace {
    ParamSpace::cube(2, -2.0, 2.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn matches_quantile_oracles(seed in any::<u64>(), r in prop_oneof![Just(1.0), Just(2.0)]) {
        let mut rg = rng(seed);
        let g = random_pair_member(&mut rg, &line(), 64);
        let gp = random_pair_member(&mut rg, &line(), 64);
        let w = wasserstein(&g, &gp, r).unwrap();
        let lib = wasserstein_1d_oracle(&g, &gp, r).unwrap();
        let ext = quantile_oracle(&g, &gp, r);
        prop_assert!((w - lib).abs() <= 1e-9 * (1.0 + w));
        prop_assert!((w - ext).abs() <= 1e-9 * (1.0 + w));
    }

    #[test]
    fn matches_brute_force(seed in any::<u64>(), r in prop_oneof![Just(1.0), Just(2.0)], two_d in any::<bool>()) {
        let mut rg = rng(seed);
        let space = if two_d { plane() } else { line() };
        let g = random_pair_member(&mut rg, &space, 3);
        let gp = random_pair_member(&mut rg, &space, 3);
        let res = transport(&g, &gp, &GroundCost::EuclideanPow(r)).unwrap();
        let cost = |i: usize, j: usize| euclidean(g.atom(i), gp.atom(j)).powf(r);
        let exact = vertex_enumeration(g.weights(), gp.weights(), &cost);
        prop_assert!((res.value - exact).abs() <= 2e-4);
        prop_assert!((res.value - exact).abs() <= 1e-9 * (1.0 + exact));
        if g.len() == 2 && gp.len() == 2 {
            prop_assert!((res.value - grid_2x2(g.weights(), gp.weights(), &cost)).abs() <= 2e-4);
        }
    }

    #[test]
    fn metric_axioms(seed in any::<u64>(), r in prop_oneof![Just(1.0), Just(2.0)], two_d in any::<bool>()) {
        let mut rg = rng(seed);
        let space = if two_d { plane() } else { line() };
        let a = random_pair_member(&mut rg, &space, 8);
        let b = random_pair_member(&mut rg, &space, 8);
        let c = random_pair_member(&mut rg, &space, 8);
        let ab = wasserstein(&a, &b, r).unwrap();
        prop_assert!((ab - wasserstein(&b, &a, r).unwrap()).abs() <= 1e-12);
        prop_assert!(wasserstein(&a, &c, r).unwrap() <= ab + wasserstein(&b, &c, r).unwrap() + 1e-9);
        prop_assert!(wasserstein(&a, &a, r).unwrap() <= 1e-12);
        let res = transport(&a, &b, &GroundCost::EuclideanPow(r)).unwrap();
        prop_assert!(res.coupling.marginal_error() <= 1e-10);
        prop_assert!(wasserstein(&a, &b, 1.0).unwrap() <= wasserstein(&a, &b, 2.0).unwrap() + 1e-12);
    }

    #[test]
    fn label_invariance(seed in any::<u64>(), two_d in any::<bool>()) {
        let mut rg = rng(seed);
        let space = if two_d { plane() } else { line() };
        let g = random_pair_member(&mut rg, &space, 10);
        let gp = random_pair_member(&mut rg, &space, 10);
        let mut p: Vec<usize> = (0..g.len()).collect();
        let mut q: Vec<usize> = (0..gp.len()).collect();
        p.shuffle(&mut rg);
        q.shuffle(&mut rg);
        let cost = GroundCost::EuclideanPow(2.0);
        let base = transport(&g, &gp, &cost).unwrap();
        let moved = transport(&g.permuted(&p), &gp.permuted(&q), &cost).unwrap();
        prop_assert!((base.value - moved.value).abs() <= 1e-12);
        // generic atoms give a unique optimal coupling
        for (i, &pi) in p.iter().enumerate() {
            for (j, &qj) in q.iter().enumerate() {
                let a = base.coupling.matrix.get(pi, qj);
                let b = moved.coupling.matrix.get(i, j);
                prop_assert_eq!(a > 0.0, b > 0.0);
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
