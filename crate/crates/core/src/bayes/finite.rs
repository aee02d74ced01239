use super::{check_sampler_inputs, dirichlet, retained, truncated_normal, ChainDiagnostics, FiniteMixturePrior, Model, PosteriorChain};
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::mixtures::LikelihoodFamily;
use crate::seeds::rng;
use rand::Rng;

/// Rejection budget per conditional update before the previous value is kept.
/// The budget does not depend on the current value, so the update remains a
/// mixture of the exact constrained conditional and the identity kernel.
const UPDATE_REJECTIONS: usize = 10_000;

/// Gibbs sampler for a `k`-atom unit-variance Gaussian location mixture:
/// allocations, then floor-constrained Dirichlet weights, then box-truncated
/// conjugate normal atoms with the separation floor.
pub fn gibbs_finite(
    data: &[Vec<f64>],
    prior: &FiniteMixturePrior,
    family: &LikelihoodFamily,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
) -> Result<PosteriorChain> {
    let space = &prior.space;
    let x = check_sampler_inputs(data, space, family, iterations, burn_in, thin)?;
    let d = space.dim();
    let n = data.len();
    let k = prior.k;
    let mut r = rng(seed);

    let init = prior.sample(&mut r)?;
    let mut atoms = init.atoms_flat().to_vec();
    let mut weights = init.weights().to_vec();
    let mut counts = vec![0usize; k];
    let mut sums = vec![0.0; k * d];
    let mut logp = vec![0.0; k];
    let mut diag = ChainDiagnostics::default();
    let mut draws = Vec::with_capacity((iterations - burn_in) / thin);
    let mut clusters_acc = 0.0;

    for it in 0..iterations {
        // allocations
        let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        counts.iter_mut().for_each(|c| *c = 0);
        sums.iter_mut().for_each(|s| *s = 0.0);
        for i in 0..n {
            let xi = &x[i * d..(i + 1) * d];
            let mut max = f64::NEG_INFINITY;
            for c in 0..k {
                let th = &atoms[c * d..(c + 1) * d];
                let sq: f64 = xi.iter().zip(th).map(|(a, b)| (a - b) * (a - b)).sum();
                logp[c] = log_w[c] - 0.5 * sq;
                max = max.max(logp[c]);
            }
            if !max.is_finite() {
                return Err(Error::NonFiniteLikelihood);
            }
            let total: f64 = logp.iter().map(|l| (l - max).exp()).sum();
            let mut u = r.random::<f64>() * total;
            let mut pick = k - 1;
            for (c, l) in logp.iter().enumerate() {
                u -= (l - max).exp();
                if u <= 0.0 {
                    pick = c;
                    break;
                }
            }
            counts[pick] += 1;
            for j in 0..d {
                sums[pick * d + j] += xi[j];
            }
        }

        // weights
        let alpha: Vec<f64> = counts.iter().map(|c| prior.gamma + *c as f64).collect();
        match (0..UPDATE_REJECTIONS)
            .map(|_| dirichlet(&mut r, &alpha, None))
            .find(|w| prior.weights_ok(w))
        {
            Some(w) => weights = w,
            None => diag.weight_fallbacks += 1,
        }

        // atoms
        for c in 0..k {
            let mut accepted = false;
            for _ in 0..UPDATE_REJECTIONS {
                let cand: Vec<f64> = (0..d)
                    .map(|j| {
                        let (lo, hi) = (space.lower()[j], space.upper()[j]);
                        if counts[c] == 0 {
                            r.random_range(lo..=hi)
                        } else {
                            let nc = counts[c] as f64;
                            truncated_normal(&mut r, sums[c * d + j] / nc, 1.0 / nc.sqrt(), lo, hi)
                        }
                    })
                    .collect();
                if prior.separated(&atoms, &cand, c) {
                    atoms[c * d..(c + 1) * d].copy_from_slice(&cand);
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                diag.atom_fallbacks += 1;
            }
        }

        if retained(it, burn_in, thin) {
            clusters_acc += counts.iter().filter(|c| **c > 0).count() as f64;
            draws.push(DiscreteMeasure::from_flat(atoms.clone(), weights.clone(), space)?);
        }
    }
    diag.mean_clusters = if draws.is_empty() { 0.0 } else { clusters_acc / draws.len() as f64 };
    Ok(PosteriorChain {
        model: Model::FiniteK,
        draws,
        seed,
        n,
        iterations,
        burn_in,
        thin,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::simulate_data;
    use crate::measures::ParamSpace;
    use crate::numeric::{std_normal_cdf, std_normal_pdf};

    fn box1() -> ParamSpace {
        ParamSpace::interval(-3.0, 3.0).unwrap()
    }

    #[test]
    fn deterministic_and_sized() {
        let fam = LikelihoodFamily::gaussian(1);
        let g0 = DiscreteMeasure::on_line(&[-2.0, 2.0], &[0.5, 0.5], &box1()).unwrap();
        let data = simulate_data(&g0, &fam, 200, 1).unwrap();
        let prior = FiniteMixturePrior::new(2, box1()).unwrap();
        let a = gibbs_finite(&data, &prior, &fam, 50, 10, 4, 9).unwrap();
        let b = gibbs_finite(&data, &prior, &fam, 50, 10, 4, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.draws.len(), 10);
        for g in &a.draws {
            assert!(g.weights().iter().all(|w| *w >= 0.05));
        }
    }

    #[test]
    fn conjugate_k1_posterior() {
        let fam = LikelihoodFamily::gaussian(1);
        let space = box1();
        let g0 = DiscreteMeasure::dirac(&[0.7], &space).unwrap();
        let data = simulate_data(&g0, &fam, 500, 3).unwrap();
        let prior = FiniteMixturePrior::new(1, space).unwrap();
        let chain = gibbs_finite(&data, &prior, &fam, 4200, 200, 1, 4).unwrap();
        let xbar = data.iter().map(|v| v[0]).sum::<f64>() / 500.0;
        let sd = (1.0f64 / 500.0).sqrt();
        // truncated-normal mean on [-3, 3] (truncation is negligible here)
        let (a, b) = ((-3.0 - xbar) / sd, (3.0 - xbar) / sd);
        let exact = xbar + sd * (std_normal_pdf(a) - std_normal_pdf(b)) / (std_normal_cdf(b) - std_normal_cdf(a));
        let th: Vec<f64> = chain.draws.iter().map(|g| g.atom(0)[0]).collect();
        let m = th.iter().sum::<f64>() / th.len() as f64;
        let var = th.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (th.len() - 1) as f64;
        assert!((m - exact).abs() < 3.0 * sd / (th.len() as f64).sqrt());
        assert!((var / (sd * sd) - 1.0).abs() < 0.1);
    }

    #[test]
    fn no_data_reproduces_prior() {
        let fam = LikelihoodFamily::gaussian(1);
        let prior = FiniteMixturePrior::new(2, box1()).unwrap();
        let chain = gibbs_finite(&[], &prior, &fam, 4000, 0, 1, 5).unwrap();
        // prior: max weight of a floor-truncated Dir(1,1) is uniform on [0.5, 0.95]
        let mw: Vec<f64> = chain.draws.iter().map(|g| g.weights()[0].max(g.weights()[1])).collect();
        let m = mw.iter().sum::<f64>() / mw.len() as f64;
        let mc_se = (0.45f64 * 0.45 / 12.0 / mw.len() as f64).sqrt();
        // without data each weight update is an independent exact prior draw
        assert!((m - 0.725).abs() < 3.0 * mc_se, "{m}");
    }

    #[test]
    fn rejects_laplace() {
        let prior = FiniteMixturePrior::new(1, box1()).unwrap();
        assert!(gibbs_finite(&[vec![0.0]], &prior, &LikelihoodFamily::laplace(), 2, 0, 1, 0).is_err());
        assert!(matches!(
            gibbs_finite(&[vec![f64::NAN]], &prior, &LikelihoodFamily::gaussian(1), 2, 0, 1, 0),
            Err(Error::NonFiniteLikelihood)
        ));
    }
}
