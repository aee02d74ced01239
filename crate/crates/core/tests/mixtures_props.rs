mod common;

use common::random_pair_member;
use mixcontract::measures::ParamSpace;
use mixcontract::mixtures::{
    check_domination_pair, component_divergence, mixture_divergence, Divergence, DivergenceMethod,
    LikelihoodFamily, MixtureDensity,
};
use mixcontract::seeds::rng;
use proptest::prelude::*;
use rand::Rng;

fn line() -> ParamSpace {
    ParamSpace::interval(-3.0, 3.0).unwrap()
}

fn family(laplace: bool) -> LikelihoodFamily {
    if laplace {
        LikelihoodFamily::laplace()
    } else {
        LikelihoodFamily::gaussian(1)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn divergence_ordering(seed in any::<u64>(), laplace in any::<bool>()) {
        let mut rg = rng(seed);
        let fam = family(laplace);
        let p = MixtureDensity::new(random_pair_member(&mut rg, &line(), 4), fam.clone()).unwrap();
        let q = MixtureDensity::new(random_pair_member(&mut rg, &line(), 4), fam).unwrap();
        let d = |div| mixture_divergence(&p, &q, div, DivergenceMethod::Quadrature).unwrap().value;
        let (v, h, k) = (d(Divergence::TotalVariation), d(Divergence::HellingerSq), d(Divergence::KullbackLeibler));
        prop_assert!(v * v / 2.0 <= h + 1e-6);
        prop_assert!(h <= v + 1e-6);
        prop_assert!(h <= k / 2.0 + 1e-6);
    }

    #[test]
    fn domination_by_composite(seed in any::<u64>(), laplace in any::<bool>()) {
        let mut rg = rng(seed);
        let fam = family(laplace);
        let g = random_pair_member(&mut rg, &line(), 4);
        let gp = random_pair_member(&mut rg, &line(), 4);
        for div in Divergence::ALL {
            let c = check_domination_pair(&g, &gp, div, &fam).unwrap();
            prop_assert!(c.passed(), "{:?}: {:?}", div, c);
        }
    }

    #[test]
    fn closed_forms_against_quadrature(t in -4.0f64..4.0, laplace in any::<bool>()) {
        let fam = family(laplace);
        let space = ParamSpace::interval(-5.0, 5.0).unwrap();
        let dirac = |x: f64| mixcontract::DiscreteMeasure::dirac(&[x], &space).unwrap();
        let p = MixtureDensity::new(dirac(0.0), fam.clone()).unwrap();
        let q = MixtureDensity::new(dirac(t), fam.clone()).unwrap();
        for div in Divergence::ALL {
            let closed = component_divergence(&fam, div, &[0.0], &[t]).unwrap();
            let quad = mixture_divergence(&p, &q, div, DivergenceMethod::Quadrature).unwrap().value;
            prop_assert!((closed - quad).abs() <= 1e-6, "{:?} {} {}", div, closed, quad);
        }
    }

    #[test]
    fn density_ignores_duplicate_atoms(seed in any::<u64>(), laplace in any::<bool>()) {
        let mut rg = rng(seed);
        let g = random_pair_member(&mut rg, &line(), 4);
        // split every atom into two coincident halves
        let atoms: Vec<f64> = g.atoms_flat().iter().flat_map(|a| [*a, *a]).collect();
        let weights: Vec<f64> = g.weights().iter().flat_map(|w| [w / 2.0, w / 2.0]).collect();
        let split = mixcontract::DiscreteMeasure::from_flat(atoms, weights, &line()).unwrap();
        let merged = split.canonicalize(1e-12);
        let fam = family(laplace);
        let a = MixtureDensity::new(split, fam.clone()).unwrap();
        let b = MixtureDensity::new(merged, fam).unwrap();
        for _ in 0..20 {
            let x: f64 = rg.random_range(-6.0..6.0);
            prop_assert!((a.density(&[x]) - b.density(&[x])).abs() <= 1e-12);
        }
    }
}
