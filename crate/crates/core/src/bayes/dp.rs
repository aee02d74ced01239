use super::{
    check_sampler_inputs, dirichlet, retained, stick_breaking, truncated_normal, ChainDiagnostics, DPPrior, Model,
    PosteriorChain,
};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, ParamSpace};
use crate::mixtures::LikelihoodFamily;
use crate::numeric::log_normal_interval;
use crate::seeds::rng;
use rand::Rng;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone)]
struct Cluster {
    count: usize,
    sum: Vec<f64>,
}

/// `ln P(θ ∈ box)` for `θ ~ N(m, s² I)`.
fn log_box_mass(space: &ParamSpace, m: &[f64], s: f64) -> f64 {
    (0..space.dim())
        .map(|j| log_normal_interval((space.lower()[j] - m[j]) / s, (space.upper()[j] - m[j]) / s))
        .sum()
}

/// `ln ∫ φ(x − θ) dP₀(θ)` for uniform `P₀` on the box.
fn log_prior_predictive(space: &ParamSpace, x: &[f64]) -> f64 {
    (0..space.dim())
        .map(|j| log_normal_interval(space.lower()[j] - x[j], space.upper()[j] - x[j]) - space.side(j).ln())
        .sum()
}

/// `ln p(x | cluster)` under the box-truncated conjugate posterior of the
/// cluster atom: `N(x; x̄, (1 + 1/n) I) · Z(m′, 1/(n+1)) / Z(x̄, 1/n)`.
fn log_cluster_predictive(space: &ParamSpace, c: &Cluster, x: &[f64]) -> f64 {
    let n = c.count as f64;
    let d = x.len();
    let var = 1.0 + 1.0 / n;
    let mut sq = 0.0;
    let mut mean = vec![0.0; d];
    let mut post = vec![0.0; d];
    for j in 0..d {
        mean[j] = c.sum[j] / n;
        post[j] = (c.sum[j] + x[j]) / (n + 1.0);
        sq += (x[j] - mean[j]).powi(2);
    }
    let log_norm = -0.5 * sq / var - d as f64 * (LN_SQRT_2PI + 0.5 * var.ln());
    log_norm + log_box_mass(space, &post, 1.0 / (n + 1.0).sqrt()) - log_box_mass(space, &mean, 1.0 / n.sqrt())
}

/// Collapsed (Chinese-restaurant) Gibbs sampler for the DP location mixture
/// with unit-variance Gaussian kernel and uniform base measure on the box.
///
/// Each retained sweep is turned into a measure by drawing the occupied
/// cluster atoms from their truncated normal posteriors and the weights
/// `(w₁, …, w_K, w_tail) ~ Dir(n₁, …, n_K, ν)`. The tail mass `w_tail` is
/// spread over a fresh truncated stick-breaking `DP(ν, P₀)` draw, so that
/// without data the draws follow the truncated prior.
pub fn gibbs_dp(
    data: &[Vec<f64>],
    prior: &DPPrior,
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
    let nu = prior.nu;
    let ln_nu = nu.ln();
    let mut r = rng(seed);
    let log_new: Vec<f64> = (0..n).map(|i| log_prior_predictive(space, &x[i * d..(i + 1) * d])).collect();

    let mut clusters: Vec<Cluster> = Vec::new();
    let mut z = vec![usize::MAX; n];
    let mut logp: Vec<f64> = Vec::new();
    let mut diag = ChainDiagnostics::default();
    let mut draws = Vec::with_capacity((iterations - burn_in) / thin);
    let mut clusters_acc = 0.0;

    // seat customers one at a time, then sweep
    for sweep in 0..=iterations {
        for i in 0..n {
            let xi = &x[i * d..(i + 1) * d];
            if z[i] != usize::MAX {
                let c = &mut clusters[z[i]];
                c.count -= 1;
                for j in 0..d {
                    c.sum[j] -= xi[j];
                }
                if c.count == 0 {
                    // swap-remove, relabelling the moved cluster
                    let last = clusters.len() - 1;
                    let old = z[i];
                    clusters.swap_remove(old);
                    if old != last {
                        for zz in z.iter_mut() {
                            if *zz == last {
                                *zz = old;
                            }
                        }
                    }
                }
            }
            logp.clear();
            for c in &clusters {
                logp.push((c.count as f64).ln() + log_cluster_predictive(space, c, xi));
            }
            logp.push(ln_nu + log_new[i]);
            let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return Err(Error::NonFiniteLikelihood);
            }
            let total: f64 = logp.iter().map(|l| (l - max).exp()).sum();
            let mut u = r.random::<f64>() * total;
            let mut pick = logp.len() - 1;
            for (c, l) in logp.iter().enumerate() {
                u -= (l - max).exp();
                if u <= 0.0 {
                    pick = c;
                    break;
                }
            }
            if pick == clusters.len() {
                clusters.push(Cluster {
                    count: 0,
                    sum: vec![0.0; d],
                });
            }
            let c = &mut clusters[pick];
            c.count += 1;
            for j in 0..d {
                c.sum[j] += xi[j];
            }
            z[i] = pick;
        }
        // the seating pass is sweep 0 and is not counted
        if sweep == 0 {
            continue;
        }
        let it = sweep - 1;
        if retained(it, burn_in, thin) {
            clusters_acc += clusters.len() as f64;
            draws.push(posterior_measure(&mut r, &clusters, prior)?);
        }
    }
    diag.mean_clusters = if draws.is_empty() { 0.0 } else { clusters_acc / draws.len() as f64 };
    Ok(PosteriorChain {
        model: Model::Dp,
        draws,
        seed,
        n,
        iterations,
        burn_in,
        thin,
        diagnostics: diag,
    })
}

fn posterior_measure<R: Rng + ?Sized>(r: &mut R, clusters: &[Cluster], prior: &DPPrior) -> Result<DiscreteMeasure> {
    let space = &prior.space;
    let d = space.dim();
    let mut alpha: Vec<f64> = clusters.iter().map(|c| c.count as f64).collect();
    alpha.push(prior.nu);
    let w = dirichlet(r, &alpha, None);
    let mut atoms = Vec::with_capacity((clusters.len() + prior.truncation) * d);
    let mut weights = Vec::with_capacity(clusters.len() + prior.truncation);
    for (c, wc) in clusters.iter().zip(&w) {
        let n = c.count as f64;
        for j in 0..d {
            atoms.push(truncated_normal(r, c.sum[j] / n, 1.0 / n.sqrt(), space.lower()[j], space.upper()[j]));
        }
        weights.push(*wc);
    }
    let w_tail = w[clusters.len()];
    if w_tail > 0.0 {
        let (ta, tw) = stick_breaking(r, prior.nu, space, prior.truncation, w_tail);
        atoms.extend(ta);
        weights.extend(tw);
    }
    DiscreteMeasure::from_flat(atoms, weights, space)
}
