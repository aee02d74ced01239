use super::DPPrior;
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, ParamSpace};
use crate::seeds::{derive_seed, rng};
use crate::transport::wasserstein_1d_oracle;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

#[derive(Debug, Clone, PartialEq)]
pub struct SmallBallReport {
    pub nu: f64,
    pub eps: f64,
    pub r: f64,
    /// Packing number `D(ε, Θ)`.
    pub packing: usize,
    /// Lower bound on `Π(W_r^r(G₀, G) ≤ (2^r + 1) ε^r)`, and its log.
    pub bound: f64,
    pub log_bound: f64,
    pub mc_estimate: f64,
    pub mc_se: f64,
    pub draws: usize,
}

impl SmallBallReport {
    /// One-sided: the estimate may not fall more than three standard errors
    /// below the bound.
    pub fn passed(&self) -> bool {
        self.mc_estimate >= self.bound - 3.0 * self.mc_se
    }
}

/// `(D, log bound)` for uniform `P₀` on an interval. The supremum over maximal
/// packings of `Π P₀(S_i)` is attained by spacing the centres exactly `ε`
/// apart and splitting the slack `s = L − (D−1)ε` evenly between the two end
/// balls: `ε^{D−2} ((ε + s)/2)² / L^D`.
pub fn dp_small_ball_bound(nu: f64, space: &ParamSpace, eps: f64, r: f64) -> Result<(usize, f64)> {
    if space.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: space.dim(),
        });
    }
    if !(eps > 0.0) || !(r >= 1.0) || !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("need eps > 0, r ≥ 1, nu > 0 (eps={eps}, r={r}, nu={nu})")));
    }
    let len = space.side(0);
    let big_d = (len / eps + 1e-9).floor() as usize + 1;
    if big_d < 2 {
        return Err(Error::PackingDegenerate(big_d));
    }
    let df = big_d as f64;
    let slack = (len - (df - 1.0) * eps).max(0.0);
    let log_sup = (df - 2.0) * eps.ln() + 2.0 * ((eps + slack) / 2.0).ln() - df * len.ln();
    let log_bound = ln_gamma(nu) + df * nu.ln() - (df - 1.0) * (2.0 * df).ln()
        + r * (df - 1.0) * (eps / space.diameter()).ln()
        + log_sup;
    Ok((big_d, log_bound))
}

const CHUNK: usize = 1000;

/// Monte Carlo check of the prior small-ball lower bound for the truncated
/// `DP(ν, P₀)` with `P₀` uniform on `Θ ⊂ ℝ`.
pub fn dp_small_ball_check(
    prior: &DPPrior,
    g0: &DiscreteMeasure,
    eps: f64,
    r: f64,
    mc_draws: usize,
    seed: u64,
) -> Result<SmallBallReport> {
    let (packing, log_bound) = dp_small_ball_bound(prior.nu, &prior.space, eps, r)?;
    if mc_draws == 0 {
        return Err(Error::InvalidArgument("need at least one prior draw".into()));
    }
    let radius = (2f64.powf(r) + 1.0) * eps.powf(r);
    let chunks = mc_draws.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<usize> {
            let mut rg = rng(derive_seed(seed, &[c as u64]));
            let m = CHUNK.min(mc_draws - c * CHUNK);
            let mut hits = 0;
            for _ in 0..m {
                let g = prior.sample(&mut rg)?;
                if wasserstein_1d_oracle(g0, &g, r)?.powf(r) <= radius {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let n = mc_draws as f64;
    let p = hits as f64 / n;
    Ok(SmallBallReport {
        nu: prior.nu,
        eps,
        r,
        packing,
        bound: log_bound.exp(),
        log_bound,
        mc_estimate: p,
        mc_se: (p * (1.0 - p) / n).sqrt(),
        draws: mc_draws,
    })
}
