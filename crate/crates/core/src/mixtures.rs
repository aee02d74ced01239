//! Location likelihood families, mixture densities `p_G = Σ p_i f(·|θ_i)`
//! and divergences between them.
//!
//! Divergence conventions:
//!
//! | name | definition |
//! |------|------------|
//! | total variation `V` | `½ ∫ |p − q|` |
//! | squared Hellinger `h²` | `½ ∫ (√p − √q)²` |
//! | Kullback–Leibler `K` | `∫ p log(p / q)` |
//!
//! so that `V²/2 ≤ h² ≤ V` and `h² ≤ K/2`.

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::numeric::{compensated_sum, std_normal_cdf, CompensatedSum};
use crate::quadrature::{integrate, QuadratureOptions};
use crate::transport::composite_distance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// Floor applied inside the KL logarithm.
pub const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Divergence {
    TotalVariation,
    HellingerSq,
    KullbackLeibler,
}

impl Divergence {
    pub const ALL: [Divergence; 3] = [
        Divergence::TotalVariation,
        Divergence::HellingerSq,
        Divergence::KullbackLeibler,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Divergence::TotalVariation => "tv",
            Divergence::HellingerSq => "hellinger_sq",
            Divergence::KullbackLeibler => "kl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// `N(θ, I_d)`.
    GaussianLocation,
    /// `½ exp(−|x − θ|)` on the real line.
    LaplaceLocation,
}

/// Fourier-tail class of the component density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothness {
    /// `|f̃(ω)| ≳ exp(−|ω|^β/γ)`.
    Supersmooth { beta: f64 },
    /// `|f̃(ω)| ≳ |ω|^{−β}`.
    Ordinary { beta: f64 },
}

/// Constants in `h(f_i, f'_j) ≤ C₁ ρ^α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderBound {
    pub alpha: f64,
    pub constant: f64,
}

/// Constants in `K(f_i, f'_j) ≤ C ρ^{m₁}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlBound {
    pub exponent: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodFamily {
    kind: FamilyKind,
    dim: usize,
}

impl LikelihoodFamily {
    pub fn gaussian(dim: usize) -> Self {
        Self {
            kind: FamilyKind::GaussianLocation,
            dim: dim.max(1),
        }
    }

    pub fn laplace() -> Self {
        Self {
            kind: FamilyKind::LaplaceLocation,
            dim: 1,
        }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FamilyKind::GaussianLocation => "gaussian",
            FamilyKind::LaplaceLocation => "laplace",
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        match self.kind {
            // f̃(ω) = exp(−ω²/2)
            FamilyKind::GaussianLocation => Smoothness::Supersmooth { beta: 2.0 },
            // f̃(ω) = 1 / (1 + ω²)
            FamilyKind::LaplaceLocation => Smoothness::Ordinary { beta: 2.0 },
        }
    }

    /// Both families satisfy `h² ≤ ρ²/8`.
    pub fn holder(&self) -> HolderBound {
        HolderBound {
            alpha: 1.0,
            constant: 1.0 / 8f64.sqrt(),
        }
    }

    /// Gaussian: `K = ρ²/2` exactly. Laplace: `e^{−ρ} + ρ − 1 ≤ ρ²/2`.
    pub fn kl_holder(&self) -> KlBound {
        KlBound {
            exponent: 2.0,
            constant: 0.5,
        }
    }

    /// Half-width added around the atoms for 1D quadrature windows; the
    /// density mass outside is below 1e-15 for both families.
    pub fn tail_halfwidth(&self) -> f64 {
        match self.kind {
            FamilyKind::GaussianLocation => 10.0,
            FamilyKind::LaplaceLocation => 40.0,
        }
    }

    /// `f(x | θ)`.
    pub fn density(&self, x: &[f64], theta: &[f64]) -> f64 {
        match self.kind {
            FamilyKind::GaussianLocation => {
                let sq: f64 = x.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum();
                (-0.5 * sq).exp() / (2.0 * PI).powf(0.5 * self.dim as f64)
            }
            FamilyKind::LaplaceLocation => 0.5 * (-(x[0] - theta[0]).abs()).exp(),
        }
    }

    /// Draws `x ~ f(·|θ)` into `out`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, theta: &[f64], out: &mut [f64]) {
        match self.kind {
            FamilyKind::GaussianLocation => {
                for (o, t) in out.iter_mut().zip(theta) {
                    let z: f64 = StandardNormal.sample(rng);
                    *o = t + z;
                }
            }
            FamilyKind::LaplaceLocation => {
                let e: f64 = Exp1.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                out[0] = theta[0] + sign * e;
            }
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }
}

/// Closed-form divergence between `f(·|θ)` and `f(·|θ')`.
pub fn component_divergence(
    family: &LikelihoodFamily,
    divergence: Divergence,
    theta: &[f64],
    theta_p: &[f64],
) -> Result<f64> {
    family.check_dim(theta.len())?;
    family.check_dim(theta_p.len())?;
    let sq: f64 = theta
        .iter()
        .zip(theta_p)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let dist = sq.sqrt();
    let v = match (family.kind, divergence) {
        (FamilyKind::GaussianLocation, Divergence::HellingerSq) => -(-sq / 8.0).exp_m1(),
        (FamilyKind::GaussianLocation, Divergence::KullbackLeibler) => 0.5 * sq,
        // reduces to the 1D problem along θ' − θ
        (FamilyKind::GaussianLocation, Divergence::TotalVariation) => {
            2.0 * std_normal_cdf(dist / 2.0) - 1.0
        }
        // Bhattacharyya coefficient e^{−Δ/2}(1 + Δ/2)
        (FamilyKind::LaplaceLocation, Divergence::HellingerSq) => {
            let half = dist / 2.0;
            -(-half).exp_m1() - half * (-half).exp()
        }
        (FamilyKind::LaplaceLocation, Divergence::KullbackLeibler) => (-dist).exp_m1() + dist,
        // the densities cross at the midpoint
        (FamilyKind::LaplaceLocation, Divergence::TotalVariation) => -(-dist / 2.0).exp_m1(),
    };
    Ok(v.max(0.0))
}

/// Mixture density `p_G` for a likelihood family.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDensity {
    mixing: DiscreteMeasure,
    family: LikelihoodFamily,
}

impl MixtureDensity {
    pub fn new(mixing: DiscreteMeasure, family: LikelihoodFamily) -> Result<Self> {
        family.check_dim(mixing.dim())?;
        Ok(Self { mixing, family })
    }

    pub fn mixing(&self) -> &DiscreteMeasure {
        &self.mixing
    }

    pub fn family(&self) -> &LikelihoodFamily {
        &self.family
    }

    /// `Σ p_i f(x | θ_i)` with compensated summation.
    pub fn density(&self, x: &[f64]) -> f64 {
        density(self, x)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let i = pick_index(rng, self.mixing.weights());
        self.family.sample(rng, self.mixing.atom(i), out);
    }

    fn atom_range(&self) -> (f64, f64) {
        self.mixing
            .atoms_flat()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(*v), hi.max(*v))
            })
    }
}

pub fn density(p: &MixtureDensity, x: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (w, a) in p.mixing.weights().iter().zip(p.mixing.atoms()) {
        acc.add(w * p.family.density(x, a));
    }
    acc.value().max(0.0)
}

pub(crate) fn pick_index<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceMethod {
    /// Adaptive quadrature over `[min atom − W, max atom + W]` (d = 1).
    Quadrature,
    /// Importance sampling from `(p + q)/2`.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Estimate together with a half-width (quadrature error estimate or three
/// Monte Carlo standard errors).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceEstimate {
    pub value: f64,
    pub half_width: f64,
}

fn pointwise(divergence: Divergence, p: f64, q: f64) -> Result<f64> {
    Ok(match divergence {
        Divergence::TotalVariation => 0.5 * (p - q).abs(),
        Divergence::HellingerSq => {
            let d = p.sqrt() - q.sqrt();
            0.5 * d * d
        }
        Divergence::KullbackLeibler => {
            if p <= 0.0 {
                0.0
            } else {
                let v = p * (p.max(DENSITY_FLOOR) / q.max(DENSITY_FLOOR)).ln();
                if !v.is_finite() {
                    return Err(Error::NonOverlappingSupport);
                }
                v
            }
        }
    })
}

fn same_setting(p: &MixtureDensity, q: &MixtureDensity) -> Result<()> {
    if p.family != q.family {
        return Err(Error::InvalidArgument(
            "mixtures use different likelihood families".into(),
        ));
    }
    Ok(())
}

/// Integration window and kink locations covering both mixtures.
pub(crate) fn window(p: &MixtureDensity, q: &MixtureDensity) -> (f64, f64, Vec<f64>) {
    let (lp, hp) = p.atom_range();
    let (lq, hq) = q.atom_range();
    let w = p.family.tail_halfwidth();
    let mut breaks: Vec<f64> = p.mixing.atoms_flat().to_vec();
    breaks.extend_from_slice(q.mixing.atoms_flat());
    (lp.min(lq) - w, hp.max(hq) + w, breaks)
}

/// Quadrature divergence with caller-chosen tolerance (d = 1).
pub fn quadrature_divergence(
    p: &MixtureDensity,
    q: &MixtureDensity,
    divergence: Divergence,
    opts: QuadratureOptions,
) -> Result<DivergenceEstimate> {
    same_setting(p, q)?;
    if p.family.dim != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: p.family.dim,
        });
    }
    let (a, b, breaks) = window(p, q);
    let failed = std::cell::Cell::new(false);
    let f = |x: f64| {
        let (px, qx) = (p.density(&[x]), q.density(&[x]));
        pointwise(divergence, px, qx).unwrap_or_else(|_| {
            failed.set(true);
            0.0
        })
    };
    let res = integrate(f, a, b, &breaks, opts)?;
    if failed.get() {
        return Err(Error::NonOverlappingSupport);
    }
    Ok(DivergenceEstimate {
        value: res.value.max(0.0),
        half_width: res.error,
    })
}

/// Divergence `d(p, q)` between two mixture densities.
pub fn mixture_divergence(
    p: &MixtureDensity,
    q: &MixtureDensity,
    divergence: Divergence,
    method: DivergenceMethod,
) -> Result<DivergenceEstimate> {
    same_setting(p, q)?;
    match method {
        DivergenceMethod::Quadrature => quadrature_divergence(p, q, divergence, QuadratureOptions::default()),
        DivergenceMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidArgument("need at least 2 samples".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = vec![0.0; p.family.dim];
            let mut vals = Vec::with_capacity(samples);
            for _ in 0..samples {
                if rng.random::<bool>() {
                    p.sample(&mut rng, &mut x);
                } else {
                    q.sample(&mut rng, &mut x);
                }
                let (px, qx) = (p.density(&x), q.density(&x));
                let m = 0.5 * (px + qx);
                vals.push(if m > 0.0 {
                    pointwise(divergence, px, qx)? / m
                } else {
                    0.0
                });
            }
            let n = samples as f64;
            let mean = compensated_sum(vals.iter().copied()) / n;
            let var = compensated_sum(vals.iter().map(|v| (v - mean).powi(2))) / (n - 1.0);
            Ok(DivergenceEstimate {
                value: mean,
                half_width: 3.0 * (var / n).sqrt(),
            })
        }
    }
}

/// One evaluation of `d(p_G, p_G') ≤ d_{ρ}(G, G')` with the composite cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominationCheck {
    pub mixture: f64,
    pub composite: f64,
    pub tolerance: f64,
}

impl DominationCheck {
    pub fn passed(&self) -> bool {
        self.mixture <= self.composite + self.tolerance
    }

    pub fn excess(&self) -> f64 {
        self.mixture - self.composite
    }
}

pub fn check_domination_pair(
    g: &DiscreteMeasure,
    gp: &DiscreteMeasure,
    divergence: Divergence,
    family: &LikelihoodFamily,
) -> Result<DominationCheck> {
    let p = MixtureDensity::new(g.clone(), family.clone())?;
    let q = MixtureDensity::new(gp.clone(), family.clone())?;
    let lhs = mixture_divergence(&p, &q, divergence, DivergenceMethod::Quadrature)?;
    let rhs = composite_distance(g, gp, divergence, family)?;
    Ok(DominationCheck {
        mixture: lhs.value,
        composite: rhs,
        tolerance: lhs.half_width + 1e-8,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominationReport {
    pub divergence: Divergence,
    pub trials: usize,
    pub violations: usize,
    /// Largest `mixture − composite` seen (negative when always dominated).
    pub max_excess: f64,
}

impl DominationReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Aggregates [`check_domination_pair`] over a corpus of measure pairs.
pub fn check_domination(
    pairs: &[(DiscreteMeasure, DiscreteMeasure)],
    divergence: Divergence,
    family: &LikelihoodFamily,
) -> Result<DominationReport> {
    use rayon::prelude::*;
    let checks: Vec<DominationCheck> = pairs
        .par_iter()
        .map(|(g, gp)| check_domination_pair(g, gp, divergence, family))
        .collect::<Result<_>>()?;
    Ok(DominationReport {
        divergence,
        trials: checks.len(),
        violations: checks.iter().filter(|c| !c.passed()).count(),
        max_excess: checks
            .iter()
            .map(DominationCheck::excess)
            .fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Both sides of the two moment inequalities for a pair of 1D densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    /// `∫ |p − p'| |x|^κ`.
    pub weighted_l1: f64,
    /// `2 ‖p − p'‖₁^{(s−κ)/s} (E_p|X|^s + E_p'|X|^s)^{κ/s}`.
    pub weighted_bound: f64,
    pub l1: f64,
    /// `2 V_d^{s/(d+2s)} (E_p|X|^s + E_p'|X|^s)^{d/(d+2s)} ‖p − p'‖₂^{2s/(d+2s)}`.
    pub l1_bound: f64,
}

impl MomentReport {
    pub fn passed(&self) -> bool {
        self.weighted_l1 <= self.weighted_bound + 1e-6 && self.l1 <= self.l1_bound + 1e-6
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0)
}

pub fn moment_inequality_check(
    p: &MixtureDensity,
    q: &MixtureDensity,
    s: f64,
    kappa: f64,
) -> Result<MomentReport> {
    same_setting(p, q)?;
    if !(kappa > 0.0 && kappa < s) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < kappa < s, got kappa = {kappa}, s = {s}"
        )));
    }
    if p.family.dim != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: p.family.dim,
        });
    }
    let (a, b, breaks) = window(p, q);
    let opts = QuadratureOptions {
        abs_tol: 1e-10,
        ..QuadratureOptions::default()
    };
    let quad = |f: &dyn Fn(f64) -> f64| integrate(f, a, b, &breaks, opts).map(|r| r.value);
    let diff = |x: f64| p.density(&[x]) - q.density(&[x]);
    let weighted_l1 = quad(&|x| diff(x).abs() * x.abs().powf(kappa))?;
    let l1 = quad(&|x| diff(x).abs())?;
    let l2 = quad(&|x| diff(x).powi(2))?.max(0.0).sqrt();
    let moments = quad(&|x| p.density(&[x]) * x.abs().powf(s))?
        + quad(&|x| q.density(&[x]) * x.abs().powf(s))?;
    let d = 1.0;
    let weighted_bound = 2.0 * l1.powf((s - kappa) / s) * moments.powf(kappa / s);
    let l1_bound = 2.0
        * unit_ball_volume(1).powf(s / (d + 2.0 * s))
        * moments.powf(d / (d + 2.0 * s))
        * l2.powf(2.0 * s / (d + 2.0 * s));
    Ok(MomentReport {
        weighted_l1,
        weighted_bound,
        l1,
        l1_bound,
    })
}
