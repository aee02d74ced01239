//! Identifiability ratios `ψ(G, G') = ‖p_G − p_G'‖_∞ / W₂²` and
//! `ψ₁(G, G') = V(p_G, p_G') / W₂²`, and a Monte Carlo probe of their
//! infimum over shrinking `W₂` neighbourhoods.

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, DEFAULT_MERGE_TOL};
use crate::mixtures::{mixture_divergence, Divergence, DivergenceMethod, LikelihoodFamily, MixtureDensity};
use crate::seeds::{derive_seed, rng};
use crate::transport::wasserstein;
use rand::Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiVariant {
    /// Grid maximum of `|p_G − p_G'|`; a lower bound of the essential sup.
    SupNorm,
    /// Total variation by quadrature.
    TotalVariation,
}

/// Uniform evaluation grid spanning the atoms of both measures plus a margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalGrid {
    pub points: usize,
    pub margin: f64,
}

impl Default for EvalGrid {
    fn default() -> Self {
        Self {
            points: 4096,
            margin: 10.0,
        }
    }
}

fn sorted_atoms(g: &DiscreteMeasure) -> Vec<(Vec<f64>, f64)> {
    let c = g.canonicalize(DEFAULT_MERGE_TOL);
    let mut v: Vec<(Vec<f64>, f64)> = c.atoms().map(|a| a.to_vec()).zip(c.weights().iter().copied()).collect();
    v.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    v
}

/// Equality of measures up to atom order and coincident-atom merging.
pub fn same_measure(g: &DiscreteMeasure, gp: &DiscreteMeasure) -> bool {
    let a = sorted_atoms(g);
    let b = sorted_atoms(gp);
    a.len() == b.len()
        && a.iter()
            .zip(&b)
            .all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() <= 1e-15)
}

/// `ψ` or `ψ₁` for a pair of measures. Returns `+∞` when `G = G'`.
pub fn psi_ratio(
    g: &DiscreteMeasure,
    gp: &DiscreteMeasure,
    family: &LikelihoodFamily,
    variant: PsiVariant,
    grid: &EvalGrid,
) -> Result<f64> {
    if same_measure(g, gp) {
        return Ok(f64::INFINITY);
    }
    let w2 = wasserstein(g, gp, 2.0)?;
    if w2 < 1e-12 {
        return Err(Error::DegenerateRatio(format!("W2 = {w2:e} below 1e-12")));
    }
    let p = MixtureDensity::new(g.clone(), family.clone())?;
    let q = MixtureDensity::new(gp.clone(), family.clone())?;
    let numerator = match variant {
        PsiVariant::TotalVariation => {
            mixture_divergence(&p, &q, Divergence::TotalVariation, DivergenceMethod::Quadrature)?.value
        }
        PsiVariant::SupNorm => {
            if family.dim() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    got: family.dim(),
                });
            }
            let (lo, hi) = g
                .atoms_flat()
                .iter()
                .chain(gp.atoms_flat())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
            let (a, b) = (lo - grid.margin, hi + grid.margin);
            let n = grid.points.max(2);
            (0..n)
                .map(|i| {
                    let x = a + (b - a) * i as f64 / (n - 1) as f64;
                    (p.density(&[x]) - q.density(&[x])).abs()
                })
                .fold(0.0, f64::max)
        }
    };
    Ok(numerator / (w2 * w2))
}

/// Minimum observed `ψ₁` at one neighbourhood radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    pub eps: f64,
    pub min_psi: f64,
    pub samples: usize,
}

const MAX_REJECTIONS: usize = 1_000_000;

/// Draws `G ∈ G_k` with `W₂(G₀, G) ≤ eps` by perturbing the atoms of `G₀`
/// (extra atoms split off existing ones) and rejecting outside the ball.
pub fn sample_neighbour<R: Rng + ?Sized>(
    rng: &mut R,
    g0: &DiscreteMeasure,
    k: usize,
    eps: f64,
) -> Result<DiscreteMeasure> {
    let space = g0.space();
    let dim = g0.dim();
    let k0 = g0.len();
    let diam = space.diameter();
    for _ in 0..MAX_REJECTIONS {
        let mut atoms = Vec::with_capacity(k * dim);
        let mut weights = Vec::with_capacity(k);
        // parent assignment: each original atom first, extras at random
        let parents: Vec<usize> = (0..k)
            .map(|i| if i < k0 { i } else { rng.random_range(0..k0) })
            .collect();
        let mut split: Vec<f64> = parents.iter().map(|_| rng.random_range(0.05..1.0)).collect();
        for p in 0..k0 {
            let total: f64 = parents
                .iter()
                .zip(&split)
                .filter(|(q, _)| **q == p)
                .map(|(_, s)| *s)
                .sum();
            for (q, s) in parents.iter().zip(split.iter_mut()) {
                if *q == p {
                    *s /= total;
                }
            }
        }
        for (i, &p) in parents.iter().enumerate() {
            let mut a = g0.atom(p).to_vec();
            for v in a.iter_mut() {
                *v += rng.random_range(-eps..=eps);
            }
            space.clamp(&mut a);
            atoms.extend(a);
            let jitter = rng.random_range(-1.0..=1.0) * eps * eps / (2.0 * diam * diam);
            weights.push((g0.weight(p) * split[i] + jitter).max(0.0));
        }
        let g = match DiscreteMeasure::from_flat(atoms, weights, space) {
            Ok(g) => g,
            Err(_) => continue,
        };
        if wasserstein(g0, &g, 2.0)? <= eps {
            return Ok(g);
        }
    }
    Err(Error::SamplingExhausted(MAX_REJECTIONS))
}

/// For each radius, the smallest `ψ₁(G, G')` over random pairs in the
/// `W₂` ball of that radius around `G₀`.
pub fn strong_identifiability_probe(
    g0: &DiscreteMeasure,
    family: &LikelihoodFamily,
    k: usize,
    eps_schedule: &[f64],
    samples_per_eps: usize,
    seed: u64,
) -> Result<Vec<ProbeRow>> {
    if k == 0 || k < g0.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be at least the number of atoms of G0 ({})",
            g0.len()
        )));
    }
    eps_schedule
        .iter()
        .enumerate()
        .map(|(ei, &eps)| {
            if !(eps > 0.0) {
                return Err(Error::DegenerateRatio(format!("neighbourhood radius {eps} must be positive")));
            }
            let ratios: Vec<f64> = (0..samples_per_eps)
                .into_par_iter()
                .map(|s| {
                    let mut r = rng(derive_seed(seed, &[ei as u64, s as u64]));
                    loop {
                        let g = sample_neighbour(&mut r, g0, k, eps)?;
                        let gp = sample_neighbour(&mut r, g0, k, eps)?;
                        match psi_ratio(&g, &gp, family, PsiVariant::TotalVariation, &EvalGrid::default()) {
                            Ok(v) if v.is_finite() => return Ok(v),
                            Ok(_) | Err(Error::DegenerateRatio(_)) => continue,
                            Err(e) => return Err(e),
                        }
                    }
                })
                .collect::<Result<_>>()?;
            Ok(ProbeRow {
                eps,
                min_psi: ratios.iter().copied().fold(f64::INFINITY, f64::min),
                samples: ratios.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::ParamSpace;
    use crate::numeric::std_normal_cdf;

    fn space() -> ParamSpace {
        ParamSpace::interval(-3.0, 3.0).unwrap()
    }

    #[test]
    fn equal_measures_give_infinity() {
        let g = DiscreteMeasure::on_line(&[0.0, 1.0], &[0.5, 0.5], &space()).unwrap();
        let fam = LikelihoodFamily::gaussian(1);
        for v in [PsiVariant::SupNorm, PsiVariant::TotalVariation] {
            assert_eq!(psi_ratio(&g, &g.permuted(&[1, 0]), &fam, v, &EvalGrid::default()).unwrap(), f64::INFINITY);
        }
    }

    #[test]
    fn dirac_shift_ratios() {
        let fam = LikelihoodFamily::gaussian(1);
        let g0 = DiscreteMeasure::dirac(&[0.0], &space()).unwrap();
        for (t, expected) in [(0.1, 3.988), (0.5, 0.7898)] {
            let g = DiscreteMeasure::dirac(&[t], &space()).unwrap();
            let psi = psi_ratio(&g0, &g, &fam, PsiVariant::TotalVariation, &EvalGrid::default()).unwrap();
            let exact = (2.0 * std_normal_cdf(t / 2.0) - 1.0) / (t * t);
            assert!((psi - exact).abs() < 1e-6 * exact.max(1.0));
            assert!((psi - expected).abs() < 5e-4 * expected);
            let swapped = psi_ratio(&g, &g0, &fam, PsiVariant::TotalVariation, &EvalGrid::default()).unwrap();
            assert!((psi - swapped).abs() < 1e-7);
        }
    }

    #[test]
    fn sup_norm_below_true_sup() {
        let fam = LikelihoodFamily::gaussian(1);
        let g0 = DiscreteMeasure::dirac(&[0.0], &space()).unwrap();
        let g = DiscreteMeasure::dirac(&[0.2], &space()).unwrap();
        let psi = psi_ratio(&g0, &g, &fam, PsiVariant::SupNorm, &EvalGrid::default()).unwrap();
        // sup |φ(x) − φ(x − t)| ≈ t φ(1) for small t
        assert!(psi > 0.9 * 0.2 * 0.242 / 0.04 && psi < 1.1 * 0.2 * 0.242 / 0.04);
    }

    #[test]
    fn probe_rejects_zero_radius() {
        let fam = LikelihoodFamily::gaussian(1);
        let g0 = DiscreteMeasure::dirac(&[0.0], &space()).unwrap();
        assert!(matches!(
            strong_identifiability_probe(&g0, &fam, 1, &[0.0], 4, 1),
            Err(Error::DegenerateRatio(_))
        ));
    }

    #[test]
    fn neighbours_stay_in_ball() {
        let g0 = DiscreteMeasure::on_line(&[-1.0, 1.0], &[0.5, 0.5], &space()).unwrap();
        let mut r = rng(3);
        for _ in 0..50 {
            let g = sample_neighbour(&mut r, &g0, 3, 0.1).unwrap();
            assert_eq!(g.len(), 3);
            assert!(wasserstein(&g0, &g, 2.0).unwrap() <= 0.1);
        }
    }

    #[test]
    fn dirac_probe_minima_bounded_below() {
        let fam = LikelihoodFamily::gaussian(1);
        let g0 = DiscreteMeasure::dirac(&[0.0], &space()).unwrap();
        let rows = strong_identifiability_probe(&g0, &fam, 1, &[0.2, 0.1, 0.05], 64, 5).unwrap();
        for row in &rows {
            assert!(row.min_psi >= 0.3, "{row:?}");
        }
    }
}
