//! Empirical `(V, W₂²)` along sequences of mixing-measure pairs that merge,
//! with one-sided envelopes `W₂² ≤ ĉ V^m` (ordinary smooth) and
//! `W₂² ≤ ĉ (−log V)^{−2/β}` (supersmooth).

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, ParamSpace};
use crate::mixtures::{quadrature_divergence, Divergence, LikelihoodFamily, MixtureDensity, Smoothness};
use crate::numeric::ols;
use crate::quadrature::QuadratureOptions;
use crate::seeds::{derive_seed, rng};
use crate::transport::wasserstein;
use rand::Rng;

/// Exponent of `V` used for ordinary smooth envelopes (any `m < 4/9` holds
/// for `β = 2`, `d = 1`).
pub const ORDINARY_EXPONENT: f64 = 0.44;

/// Pair sequences indexed by `t = 0.5·2^{−j}`, `j = 0, …, steps − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSchedule {
    /// `½δ₋₁ + ½δ₁` against both atoms moved inward by `t`.
    ShiftBoth,
    /// `δ₀` against `δ_t`.
    DiracShift,
    /// `δ₀` against `½δ₋ₜ + ½δₜ`.
    Split,
    /// `½δ₋₁ + ½δ₁` against weights `(½ + t/4, ½ − t/4)`.
    WeightTransfer,
    /// `½δ₋ₜ + ½δₜ` against `¼δ₋₂ₜ + ½δ₀ + ¼δ₂ₜ` (equal first three moments).
    MomentMatched,
    /// Seeded random pairs in `𝒢₃` at `W₂` scale `t`.
    Random,
}

impl PairSchedule {
    pub const ALL: [PairSchedule; 6] = [
        PairSchedule::ShiftBoth,
        PairSchedule::DiracShift,
        PairSchedule::Split,
        PairSchedule::WeightTransfer,
        PairSchedule::MomentMatched,
        PairSchedule::Random,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PairSchedule::ShiftBoth => "shift_both",
            PairSchedule::DiracShift => "dirac_shift",
            PairSchedule::Split => "split",
            PairSchedule::WeightTransfer => "weight_transfer",
            PairSchedule::MomentMatched => "moment_matched",
            PairSchedule::Random => "random",
        }
    }

    fn pair<R: Rng + ?Sized>(&self, t: f64, space: &ParamSpace, rng: &mut R) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        let m = |a: &[f64], w: &[f64]| DiscreteMeasure::on_line(a, w, space);
        Ok(match self {
            PairSchedule::ShiftBoth => (m(&[-1.0, 1.0], &[0.5, 0.5])?, m(&[-1.0 + t, 1.0 - t], &[0.5, 0.5])?),
            PairSchedule::DiracShift => (m(&[0.0], &[1.0])?, m(&[t], &[1.0])?),
            PairSchedule::Split => (m(&[0.0], &[1.0])?, m(&[-t, t], &[0.5, 0.5])?),
            PairSchedule::WeightTransfer => (
                m(&[-1.0, 1.0], &[0.5, 0.5])?,
                m(&[-1.0, 1.0], &[0.5 + t / 4.0, 0.5 - t / 4.0])?,
            ),
            PairSchedule::MomentMatched => (
                m(&[-t, t], &[0.5, 0.5])?,
                m(&[-2.0 * t, 0.0, 2.0 * t], &[0.25, 0.5, 0.25])?,
            ),
            PairSchedule::Random => {
                let centre: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let draw = |rng: &mut R| -> Result<DiscreteMeasure> {
                    let a: Vec<f64> = centre.iter().map(|c| c + t * rng.random_range(-1.0..1.0)).collect();
                    let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..1.0)).collect();
                    m(&a, &w)
                };
                (draw(rng)?, draw(rng)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeconvolutionRow {
    pub schedule: PairSchedule,
    pub t: f64,
    pub v: f64,
    pub w2sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeconvolutionProbe {
    pub family: &'static str,
    pub rows: Vec<DeconvolutionRow>,
    /// Envelope constant: smallest `ĉ` with every row under the envelope.
    pub c_hat: f64,
    /// OLS slope of `log W₂²` on `log V` (ordinary) or on `log(−log V)`
    /// (supersmooth).
    pub fitted_slope: f64,
    /// Largest observed `W₂² / envelope(V)` at the two smallest `t` of each
    /// schedule divided by `ĉ`; a value well below 1 shows slack in the tail.
    pub tail_ratio: f64,
}

impl DeconvolutionProbe {
    /// Envelope shape `ĉ·g(V)` without the constant.
    pub fn shape(family: &LikelihoodFamily, v: f64) -> f64 {
        match family.smoothness() {
            Smoothness::Ordinary { .. } => v.powf(ORDINARY_EXPONENT),
            Smoothness::Supersmooth { beta } => (-v.ln()).powf(-2.0 / beta),
        }
    }

    /// Rows above `ĉ·g(V)` (with relative slack `1e-12`).
    pub fn violations(&self, family: &LikelihoodFamily) -> usize {
        self.rows
            .iter()
            .filter(|row| row.w2sq > self.c_hat * Self::shape(family, row.v) * (1.0 + 1e-12))
            .count()
    }
}

fn total_variation(g: &DiscreteMeasure, gp: &DiscreteMeasure, family: &LikelihoodFamily) -> Result<f64> {
    let p = MixtureDensity::new(g.clone(), family.clone())?;
    let q = MixtureDensity::new(gp.clone(), family.clone())?;
    let coarse = quadrature_divergence(&p, &q, Divergence::TotalVariation, QuadratureOptions::default())?;
    // refine to relative accuracy for small V
    let tol = (coarse.value * 1e-7).max(1e-15);
    let fine = quadrature_divergence(
        &p,
        &q,
        Divergence::TotalVariation,
        QuadratureOptions {
            abs_tol: tol,
            max_intervals: 20_000,
        },
    )?;
    Ok(fine.value)
}

/// Runs every schedule for `steps` halvings of `t`, keeps rows with
/// `0 < V < 1`, and fits the envelope of the family's smoothness class.
pub fn deconvolution_bound_probe(
    family: &LikelihoodFamily,
    schedules: &[PairSchedule],
    steps: usize,
    seed: u64,
) -> Result<DeconvolutionProbe> {
    if family.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: family.dim(),
        });
    }
    let space = ParamSpace::interval(-3.0, 3.0)?;
    let mut rows = Vec::new();
    for (si, sched) in schedules.iter().enumerate() {
        let mut rg = rng(derive_seed(seed, &[si as u64]));
        for j in 0..steps {
            let t = 0.5 * 0.5f64.powi(j as i32);
            let (g, gp) = sched.pair(t, &space, &mut rg)?;
            let w2 = wasserstein(&g, &gp, 2.0)?;
            let v = total_variation(&g, &gp, family)?;
            if v > 0.0 && v < 1.0 && w2 > 0.0 {
                rows.push(DeconvolutionRow {
                    schedule: *sched,
                    t,
                    v,
                    w2sq: w2 * w2,
                });
            }
        }
    }
    if rows.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            have: rows.len(),
        });
    }
    let c_hat = rows
        .iter()
        .map(|r| r.w2sq / DeconvolutionProbe::shape(family, r.v))
        .fold(0.0, f64::max);
    let xs: Vec<f64> = rows
        .iter()
        .map(|r| match family.smoothness() {
            Smoothness::Ordinary { .. } => r.v.ln(),
            Smoothness::Supersmooth { .. } => (-r.v.ln()).ln(),
        })
        .collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.w2sq.ln()).collect();
    let (fitted_slope, _, _) = ols(&xs, &ys);
    let tail_ratio = schedules
        .iter()
        .flat_map(|s| {
            let mut sub: Vec<&DeconvolutionRow> = rows.iter().filter(|r| r.schedule == *s).collect();
            sub.sort_by(|a, b| a.t.total_cmp(&b.t));
            sub.into_iter().take(2)
        })
        .map(|r| r.w2sq / (c_hat * DeconvolutionProbe::shape(family, r.v)))
        .fold(0.0, f64::max);
    Ok(DeconvolutionProbe {
        family: family.name(),
        rows,
        c_hat,
        fitted_slope,
        tail_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelopes_hold_on_every_row() {
        for fam in [LikelihoodFamily::gaussian(1), LikelihoodFamily::laplace()] {
            let probe = deconvolution_bound_probe(&fam, &PairSchedule::ALL, 6, 1).unwrap();
            assert_eq!(probe.violations(&fam), 0);
            assert!(probe.c_hat > 0.0 && probe.c_hat.is_finite());
            assert!(probe.tail_ratio <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn dirac_shift_values() {
        let fam = LikelihoodFamily::gaussian(1);
        let probe = deconvolution_bound_probe(&fam, &[PairSchedule::DiracShift], 3, 0).unwrap();
        for row in &probe.rows {
            let exact = 2.0 * crate::numeric::std_normal_cdf(row.t / 2.0) - 1.0;
            assert!((row.v - exact).abs() < 1e-9 * exact.max(1e-3));
            assert!((row.w2sq - row.t * row.t).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_multivariate() {
        assert!(deconvolution_bound_probe(&LikelihoodFamily::gaussian(2), &[PairSchedule::Split], 2, 0).is_err());
    }
}
