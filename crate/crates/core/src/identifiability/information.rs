//! Hellinger information `Ψ_𝒢(r) = inf { h²(p_G₀, p_G) : G ∈ 𝒢, W₂(G₀, G) ≥ r/2 }`.
//!
//! The infimum has no closed form, so it is estimated from above by a
//! multi-start compass search over atoms and weights that only ever accepts
//! feasible points. Every reported value is attained by the returned witness.

use crate::error::{Error, Result};
use crate::measures::{random_measure, DiscreteMeasure, ParamSpace};
use crate::mixtures::{FamilyKind, LikelihoodFamily};
use crate::numeric::CompensatedSum;
use crate::seeds::{derive_seed, rng};
use crate::transport::{wasserstein, wasserstein_1d_oracle};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKind {
    /// `𝒢_k(Θ)`: at most `k` atoms.
    AtMostK(usize),
    /// Finite truncation of `𝒢̄(Θ)`.
    Truncated(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureClass {
    pub kind: ClassKind,
    pub space: ParamSpace,
}

impl MeasureClass {
    pub fn at_most_k(k: usize, space: ParamSpace) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        Ok(Self {
            kind: ClassKind::AtMostK(k),
            space,
        })
    }

    pub fn truncated(max_atoms: usize, space: ParamSpace) -> Result<Self> {
        if max_atoms == 0 {
            return Err(Error::InvalidArgument("max_atoms must be at least 1".into()));
        }
        Ok(Self {
            kind: ClassKind::Truncated(max_atoms),
            space,
        })
    }

    pub fn atoms(&self) -> usize {
        match self.kind {
            ClassKind::AtMostK(k) | ClassKind::Truncated(k) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiEstimate {
    pub radius: f64,
    /// Reported value (monotone in the radius after profile post-processing).
    pub value: f64,
    /// Best value found by the search at this radius alone.
    pub raw_value: f64,
    pub minimizer: Option<DiscreteMeasure>,
    pub restarts: usize,
    pub feasible: bool,
}

/// `h²(p_G₀, ·)` on a fixed trapezoid grid.
struct HellingerObjective {
    family: LikelihoodFamily,
    grid: Vec<f64>,
    sqrt_p0: Vec<f64>,
    step: f64,
}

impl HellingerObjective {
    fn new(g0: &DiscreteMeasure, family: &LikelihoodFamily, space: &ParamSpace) -> Self {
        let pad = family.tail_halfwidth();
        let (a, b) = (space.lower()[0] - pad, space.upper()[0] + pad);
        // trapezoid is spectrally accurate for the smooth Gaussian integrand;
        // the Laplace kinks need a finer grid
        let step = match family.kind() {
            FamilyKind::GaussianLocation => 0.02,
            FamilyKind::LaplaceLocation => 0.002,
        };
        let n = ((b - a) / step).ceil() as usize;
        let step = (b - a) / n as f64;
        let grid: Vec<f64> = (0..=n).map(|i| a + step * i as f64).collect();
        let sqrt_p0 = grid.iter().map(|x| mix_density(g0, family, *x).sqrt()).collect();
        Self {
            family: family.clone(),
            grid,
            sqrt_p0,
            step,
        }
    }

    fn eval(&self, atoms: &[f64], weights: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        let last = self.grid.len() - 1;
        for (i, x) in self.grid.iter().enumerate() {
            let mut p = 0.0;
            for (a, w) in atoms.iter().zip(weights) {
                p += w * self.family.density(&[*x], &[*a]);
            }
            let d = self.sqrt_p0[i] - p.sqrt();
            let f = d * d;
            acc.add(if i == 0 || i == last { 0.5 * f } else { f });
        }
        (0.5 * acc.value() * self.step).max(0.0)
    }
}

fn mix_density(g: &DiscreteMeasure, family: &LikelihoodFamily, x: f64) -> f64 {
    g.atoms_flat()
        .iter()
        .zip(g.weights())
        .map(|(a, w)| w * family.density(&[x], &[*a]))
        .sum()
}

struct Search<'a> {
    g0: &'a DiscreteMeasure,
    space: &'a ParamSpace,
    objective: &'a HellingerObjective,
    half_radius: f64,
}

impl Search<'_> {
    fn feasible(&self, atoms: &[f64], weights: &[f64]) -> Option<DiscreteMeasure> {
        let g = DiscreteMeasure::from_flat(atoms.to_vec(), weights.to_vec(), self.space).ok()?;
        let w2 = wasserstein_1d_oracle(self.g0, &g, 2.0).ok()?;
        (w2 >= self.half_radius).then_some(g)
    }

    /// Compass search from a feasible start; returns `(value, witness)`.
    fn run(&self, start: DiscreteMeasure, init_step: f64) -> (f64, DiscreteMeasure) {
        let mut atoms = start.atoms_flat().to_vec();
        let mut weights = start.weights().to_vec();
        let mut best = self.objective.eval(&atoms, &weights);
        let mut witness = start;
        let mut step_a = init_step;
        let mut step_w: f64 = 0.1;
        let k = weights.len();
        let (lo, hi) = (self.space.lower()[0], self.space.upper()[0]);
        let mut evals = 0usize;
        while (step_a > 1e-8 || step_w > 1e-10) && evals < 200_000 {
            let mut improved: Option<(f64, Vec<f64>, Vec<f64>, DiscreteMeasure)> = None;
            let mut consider = |a: Vec<f64>, w: Vec<f64>, improved: &mut Option<(f64, Vec<f64>, Vec<f64>, DiscreteMeasure)>| {
                evals += 1;
                let v = self.objective.eval(&a, &w);
                let current = improved.as_ref().map_or(best, |t| t.0);
                if v < current {
                    if let Some(g) = self.feasible(&a, &w) {
                        *improved = Some((v, a, w, g));
                    }
                }
            };
            if step_a > 1e-8 {
                for i in 0..k {
                    for dir in [-1.0, 1.0] {
                        let mut a = atoms.clone();
                        a[i] = (a[i] + dir * step_a).clamp(lo, hi);
                        if a[i] != atoms[i] {
                            consider(a, weights.clone(), &mut improved);
                        }
                    }
                }
            }
            if step_w > 1e-10 {
                for i in 0..k {
                    for j in 0..k {
                        if i == j || weights[i] <= 0.0 {
                            continue;
                        }
                        let mut w = weights.clone();
                        let m = step_w.min(w[i]);
                        w[i] -= m;
                        w[j] += m;
                        consider(atoms.clone(), w, &mut improved);
                    }
                }
            }
            match improved {
                Some((v, a, w, g)) => {
                    best = v;
                    atoms = a;
                    weights = w;
                    witness = g;
                }
                None => {
                    step_a *= 0.5;
                    step_w *= 0.5;
                }
            }
        }
        (best, witness)
    }
}

/// Upper-bound estimate of `Ψ_𝒢(r)`; `r = 0` returns 0 at `G₀`. An empty
/// feasible set is reported with `feasible = false` and `+∞`.
pub fn hellinger_information(
    g0: &DiscreteMeasure,
    cls: &MeasureClass,
    family: &LikelihoodFamily,
    r: f64,
    restarts: usize,
    seed: u64,
) -> Result<PsiEstimate> {
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be nonnegative, got {r}")));
    }
    if cls.space.dim() != 1 || g0.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: cls.space.dim().max(g0.dim()),
        });
    }
    let g0 = &DiscreteMeasure::from_flat(g0.atoms_flat().to_vec(), g0.weights().to_vec(), &cls.space)?;
    if r == 0.0 {
        return Ok(PsiEstimate {
            radius: 0.0,
            value: 0.0,
            raw_value: 0.0,
            minimizer: Some(g0.clone()),
            restarts: 0,
            feasible: true,
        });
    }
    let infeasible = PsiEstimate {
        radius: r,
        value: f64::INFINITY,
        raw_value: f64::INFINITY,
        minimizer: None,
        restarts,
        feasible: false,
    };
    // W₂(G₀, G) never exceeds the diameter of Θ
    if r / 2.0 > cls.space.diameter() {
        return Ok(infeasible);
    }
    let objective = HellingerObjective::new(g0, family, &cls.space);
    let search = Search {
        g0,
        space: &cls.space,
        objective: &objective,
        half_radius: r / 2.0,
    };
    let k = cls.atoms();
    let runs: Vec<Option<(f64, DiscreteMeasure)>> = (0..restarts.max(1))
        .into_par_iter()
        .map(|i| {
            let mut rg = rng(derive_seed(seed, &[i as u64]));
            let start = (0..5_000).find_map(|_| {
                let g = random_measure(&mut rg, &cls.space, k);
                search.feasible(g.atoms_flat(), g.weights())
            })?;
            Some(search.run(start, (r / 4.0).max(1e-3)))
        })
        .collect();
    let best = runs
        .into_iter()
        .flatten()
        .fold(None::<(f64, DiscreteMeasure)>, |acc, cand| match acc {
            Some(a) if a.0 <= cand.0 => Some(a),
            _ => Some(cand),
        });
    Ok(match best {
        Some((v, g)) => {
            // exact W₂ of the witness through the general solver
            debug_assert!(wasserstein(g0, &g, 2.0).map(|w| w >= r / 2.0 - 1e-9).unwrap_or(false));
            PsiEstimate {
                radius: r,
                value: v,
                raw_value: v,
                minimizer: Some(g),
                restarts,
                feasible: true,
            }
        }
        None => infeasible,
    })
}

/// Estimates over a list of radii, made monotone by a suffix minimum: a
/// witness feasible at a larger radius is feasible at every smaller one.
pub fn hellinger_information_profile(
    g0: &DiscreteMeasure,
    cls: &MeasureClass,
    family: &LikelihoodFamily,
    radii: &[f64],
    restarts: usize,
    seed: u64,
) -> Result<Vec<PsiEstimate>> {
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|a, b| radii[*a].total_cmp(&radii[*b]));
    let mut est: Vec<PsiEstimate> = order
        .iter()
        .map(|&i| hellinger_information(g0, cls, family, radii[i], restarts, derive_seed(seed, &[i as u64])))
        .collect::<Result<_>>()?;
    for i in (0..est.len().saturating_sub(1)).rev() {
        if est[i + 1].feasible && est[i + 1].value < est[i].value {
            est[i].value = est[i + 1].value;
            est[i].minimizer = est[i + 1].minimizer.clone();
        }
    }
    Ok(est)
}

/// Fitted constant of a lower envelope for `Ψ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeFit {
    pub c_hat: f64,
    pub positive: bool,
    pub rows: Vec<PsiEstimate>,
}

/// `ĉ = min_r Ψ̂(r) / r^exponent` over positive radii.
pub fn psi_lower_envelope_check(
    g0: &DiscreteMeasure,
    cls: &MeasureClass,
    family: &LikelihoodFamily,
    exponent: f64,
    radii: &[f64],
    restarts: usize,
    seed: u64,
) -> Result<EnvelopeFit> {
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    let rows = hellinger_information_profile(g0, cls, family, radii, restarts, seed)?;
    let c_hat = rows
        .iter()
        .filter(|e| e.feasible)
        .map(|e| e.value / e.radius.powf(exponent))
        .fold(f64::INFINITY, f64::min);
    Ok(EnvelopeFit {
        c_hat,
        positive: c_hat.is_finite() && c_hat > 1e-12,
        rows,
    })
}

/// Supersmooth form: `ĉ = max_r r^β (−log Ψ̂(r))`, so `Ψ̂(r) ≥ exp(−ĉ r^{−β})`
/// on every radius of the profile.
pub fn psi_supersmooth_envelope(
    g0: &DiscreteMeasure,
    cls: &MeasureClass,
    family: &LikelihoodFamily,
    beta: f64,
    radii: &[f64],
    restarts: usize,
    seed: u64,
) -> Result<EnvelopeFit> {
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    let rows = hellinger_information_profile(g0, cls, family, radii, restarts, seed)?;
    let c_hat = rows
        .iter()
        .filter(|e| e.feasible)
        .map(|e| e.radius.powf(beta) * (-e.value.ln()).max(0.0))
        .fold(0.0, f64::max);
    let positive = rows.iter().filter(|e| e.feasible).all(|e| e.value > 0.0);
    Ok(EnvelopeFit { c_hat, positive, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixtures::{mixture_divergence, Divergence, DivergenceMethod, MixtureDensity};

    fn line() -> ParamSpace {
        ParamSpace::interval(-1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_radius_is_zero() {
        let g0 = DiscreteMeasure::dirac(&[0.0], &line()).unwrap();
        let cls = MeasureClass::at_most_k(1, line()).unwrap();
        let e = hellinger_information(&g0, &cls, &LikelihoodFamily::gaussian(1), 0.0, 4, 1).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.minimizer.unwrap(), g0);
    }

    #[test]
    fn dirac_closed_form() {
        let g0 = DiscreteMeasure::dirac(&[0.0], &line()).unwrap();
        let cls = MeasureClass::at_most_k(1, line()).unwrap();
        let e = hellinger_information(&g0, &cls, &LikelihoodFamily::gaussian(1), 1.0, 8, 2).unwrap();
        assert!(e.feasible);
        assert!((e.value - (1.0 - (-1.0f64 / 32.0).exp())).abs() < 1e-6, "{}", e.value);
        // grid-search cross-check over θ ∈ [-1, 1] with |θ| ≥ 1/2
        let grid_min = (0..=20_000)
            .map(|i| -1.0 + 2.0 * i as f64 / 20_000.0)
            .filter(|t: &f64| t.abs() >= 0.5)
            .map(|t| -(-t * t / 8.0f64).exp_m1())
            .fold(f64::INFINITY, f64::min);
        assert!((e.value - grid_min).abs() < 1e-6);
    }

    #[test]
    fn infeasible_radius_flagged() {
        let g0 = DiscreteMeasure::dirac(&[0.0], &line()).unwrap();
        let cls = MeasureClass::at_most_k(1, line()).unwrap();
        let e = hellinger_information(&g0, &cls, &LikelihoodFamily::gaussian(1), 4.0, 4, 3).unwrap();
        assert!(!e.feasible);
        assert_eq!(e.value, f64::INFINITY);
        // between diameter/… and diameter: sampled starts never feasible
        let e = hellinger_information(&g0, &cls, &LikelihoodFamily::gaussian(1), 2.5, 4, 3).unwrap();
        assert!(!e.feasible);
    }

    #[test]
    fn witness_bounds_estimate() {
        let space = ParamSpace::interval(-2.0, 2.0).unwrap();
        let fam = LikelihoodFamily::gaussian(1);
        let g0 = DiscreteMeasure::on_line(&[-1.0, 1.0], &[0.5, 0.5], &space).unwrap();
        let cls = MeasureClass::at_most_k(2, space.clone()).unwrap();
        let e = hellinger_information(&g0, &cls, &fam, 0.6, 8, 4).unwrap();
        let g = e.minimizer.clone().unwrap();
        assert!(wasserstein(&g0, &g, 2.0).unwrap() >= 0.3 - 1e-9);
        // reported value matches an adaptive-quadrature evaluation of the witness
        let p = MixtureDensity::new(g0.clone(), fam.clone()).unwrap();
        let q = MixtureDensity::new(g, fam.clone()).unwrap();
        let h2 = mixture_divergence(&p, &q, Divergence::HellingerSq, DivergenceMethod::Quadrature).unwrap();
        assert!((h2.value - e.value).abs() < 1e-8);
        // any supplied feasible G upper-bounds Ψ
        let other = DiscreteMeasure::on_line(&[-1.0, 1.6], &[0.5, 0.5], &space).unwrap();
        assert!(wasserstein(&g0, &other, 2.0).unwrap() >= 0.3);
        let q = MixtureDensity::new(other, fam).unwrap();
        let h2 = mixture_divergence(&p, &q, Divergence::HellingerSq, DivergenceMethod::Quadrature).unwrap();
        assert!(e.value <= h2.value + 1e-12);
    }

    #[test]
    fn profile_is_monotone() {
        let space = ParamSpace::interval(-2.0, 2.0).unwrap();
        let g0 = DiscreteMeasure::on_line(&[-1.0, 1.0], &[0.5, 0.5], &space).unwrap();
        let cls = MeasureClass::at_most_k(2, space).unwrap();
        let radii = [0.8, 0.2, 0.4];
        let rows = hellinger_information_profile(&g0, &cls, &LikelihoodFamily::gaussian(1), &radii, 6, 9).unwrap();
        for w in rows.windows(2) {
            assert!(w[0].radius < w[1].radius && w[0].value <= w[1].value);
        }
        assert!(rows.iter().all(|e| e.value <= e.raw_value));
    }
}
