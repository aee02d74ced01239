//! Priors on mixing measures, data simulation, and conjugate Gibbs samplers
//! for Gaussian location mixtures: finite mixtures with known `k` and
//! Dirichlet-process mixtures.

mod dp;
mod finite;
mod smallball;

pub use dp::gibbs_dp;
pub use finite::gibbs_finite;
pub use smallball::{dp_small_ball_bound, dp_small_ball_check, SmallBallReport};

use crate::error::{Error, Result};
use crate::measures::{atom_record, euclidean, parse_atom_record, DiscreteMeasure, ParamSpace};
use crate::mixtures::{pick_index, FamilyKind, LikelihoodFamily};
use crate::numeric::{log_std_normal_cdf, std_normal_quantile};
use crate::seeds::rng;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Rejection cap for prior draws.
pub const MAX_PRIOR_REJECTIONS: usize = 1_000_000;

/// Symmetric Dirichlet weights, uniform atoms on the box, and floors on the
/// weights and pairwise atom distances enforced by rejection.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMixturePrior {
    pub k: usize,
    pub gamma: f64,
    pub space: ParamSpace,
    pub weight_floor: f64,
    pub separation_floor: f64,
}

impl FiniteMixturePrior {
    /// Defaults: `γ = 1`, weight floor 0.05, separation floor `0.1·Diam(Θ)`.
    pub fn new(k: usize, space: ParamSpace) -> Result<Self> {
        let sep = 0.1 * space.diameter();
        Self::with_floors(k, space, 1.0, 0.05, sep)
    }

    pub fn with_floors(k: usize, space: ParamSpace, gamma: f64, weight_floor: f64, separation_floor: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("Dirichlet parameter must be positive, got {gamma}")));
        }
        if !(weight_floor >= 0.0) || !(separation_floor >= 0.0) {
            return Err(Error::InvalidArgument("floors must be nonnegative".into()));
        }
        if k as f64 * weight_floor > 1.0 {
            return Err(Error::InvalidArgument(format!("{k} weights cannot all exceed {weight_floor}")));
        }
        Ok(Self {
            k,
            gamma,
            space,
            weight_floor,
            separation_floor,
        })
    }

    pub(crate) fn weights_ok(&self, w: &[f64]) -> bool {
        self.k == 1 || w.iter().all(|v| *v >= self.weight_floor)
    }

    /// Minimum distance from `atom` to every other atom except index `skip`.
    pub(crate) fn separated(&self, atoms: &[f64], atom: &[f64], skip: usize) -> bool {
        let d = self.space.dim();
        atoms
            .chunks(d)
            .enumerate()
            .all(|(j, other)| j == skip || euclidean(atom, other) >= self.separation_floor)
    }

    pub(crate) fn atoms_ok(&self, atoms: &[f64]) -> bool {
        let d = self.space.dim();
        (0..self.k).all(|i| self.separated(atoms, &atoms[i * d..(i + 1) * d], i))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DiscreteMeasure> {
        let gamma = Gamma::new(self.gamma, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let d = self.space.dim();
        for _ in 0..MAX_PRIOR_REJECTIONS {
            let w = dirichlet(rng, &vec![self.gamma; self.k], Some(&gamma));
            if !self.weights_ok(&w) {
                continue;
            }
            let atoms: Vec<f64> = (0..self.k * d)
                .map(|i| rng.random_range(self.space.lower()[i % d]..=self.space.upper()[i % d]))
                .collect();
            if !self.atoms_ok(&atoms) {
                continue;
            }
            return DiscreteMeasure::from_flat(atoms, w, &self.space);
        }
        Err(Error::RejectionExhausted(format!(
            "no prior draw met the floors in {MAX_PRIOR_REJECTIONS} attempts"
        )))
    }
}

/// Prior residual stick mass tolerated by the truncation.
pub const DP_TAIL_MASS: f64 = 1e-6;

/// `DP(ν, P₀)` with `P₀` uniform on the box, truncated after `T` sticks where
/// `(ν/(ν+1))^T ≤ 1e-6`; the last stick absorbs the remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct DPPrior {
    pub nu: f64,
    pub space: ParamSpace,
    pub truncation: usize,
}

impl DPPrior {
    pub fn new(nu: f64, space: ParamSpace) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidArgument(format!("concentration must be positive, got {nu}")));
        }
        let t = (DP_TAIL_MASS.ln() / (nu / (nu + 1.0)).ln()).ceil().max(1.0) as usize;
        Ok(Self {
            nu,
            space,
            truncation: t,
        })
    }

    /// Expected prior mass beyond the first `T` sticks, `(ν/(ν+1))^T`.
    pub fn tail_mass(&self) -> f64 {
        (self.nu / (self.nu + 1.0)).powi(self.truncation as i32)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DiscreteMeasure> {
        let (atoms, weights) = stick_breaking(rng, self.nu, &self.space, self.truncation, 1.0);
        DiscreteMeasure::from_flat(atoms, weights, &self.space)
    }
}

/// `T` sticks of total mass `scale` with `Beta(1, ν)` proportions; the last
/// stick takes whatever is left.
pub(crate) fn stick_breaking<R: Rng + ?Sized>(
    rng: &mut R,
    nu: f64,
    space: &ParamSpace,
    sticks: usize,
    scale: f64,
) -> (Vec<f64>, Vec<f64>) {
    let d = space.dim();
    let mut atoms = Vec::with_capacity(sticks * d);
    let mut weights = Vec::with_capacity(sticks);
    let mut rest = 1.0;
    for i in 0..sticks {
        let v = if i + 1 == sticks {
            1.0
        } else {
            // inverse CDF of Beta(1, ν)
            1.0 - rng.random::<f64>().powf(1.0 / nu)
        };
        weights.push(scale * rest * v);
        rest *= 1.0 - v;
        for j in 0..d {
            atoms.push(rng.random_range(space.lower()[j]..=space.upper()[j]));
        }
    }
    (atoms, weights)
}

/// `Dir(α)` through normalized Gamma variates. A zero total (all variates
/// underflowed) falls back to a one-hot draw proportional to `α`.
pub(crate) fn dirichlet<R: Rng + ?Sized>(rng: &mut R, alpha: &[f64], common: Option<&Gamma<f64>>) -> Vec<f64> {
    let mut g: Vec<f64> = alpha
        .iter()
        .map(|a| match common {
            Some(dist) => dist.sample(rng),
            None => Gamma::new(*a, 1.0).expect("positive shape").sample(rng),
        })
        .collect();
    let total: f64 = g.iter().sum();
    if total > 0.0 && total.is_finite() {
        g.iter_mut().for_each(|v| *v /= total);
    } else {
        let i = pick_index(rng, alpha);
        g = vec![0.0; alpha.len()];
        g[i] = 1.0;
    }
    g
}

/// Draw from `N(mu, sd²)` truncated to `[lo, hi]` by inversion in log space,
/// using the reflected upper tail when the interval lies right of the mean.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mu: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let (a, b) = ((lo - mu) / sd, (hi - mu) / sd);
    let z = if a > 0.0 { -std_trunc(rng, -b, -a) } else { std_trunc(rng, a, b) };
    (mu + sd * z).clamp(lo, hi)
}

/// Standard normal truncated to `[a, b]` with `a ≤ 0`.
fn std_trunc<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let lb = log_std_normal_cdf(b);
    let rho = (log_std_normal_cdf(a) - lb).exp();
    let u: f64 = rng.random();
    let lp = lb + (rho + u * (1.0 - rho)).ln();
    let p = lp.exp();
    if p <= 0.0 {
        // the whole interval is below double precision; its upper end is
        // where nearly all of the mass sits
        return b;
    }
    std_normal_quantile(p).clamp(a, b)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Finite(FiniteMixturePrior),
    Dp(DPPrior),
}

impl Prior {
    pub fn space(&self) -> &ParamSpace {
        match self {
            Prior::Finite(p) => &p.space,
            Prior::Dp(p) => &p.space,
        }
    }
}

pub fn sample_prior(prior: &Prior, seed: u64) -> Result<DiscreteMeasure> {
    let mut r = rng(seed);
    match prior {
        Prior::Finite(p) => p.sample(&mut r),
        Prior::Dp(p) => p.sample(&mut r),
    }
}

/// `n` i.i.d. draws from `p_{G₀}`.
pub fn simulate_data(g0: &DiscreteMeasure, family: &LikelihoodFamily, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if family.dim() != g0.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            got: g0.dim(),
        });
    }
    let mut r = rng(seed);
    Ok((0..n)
        .map(|_| {
            let i = pick_index(&mut r, g0.weights());
            let mut x = vec![0.0; g0.dim()];
            family.sample(&mut r, g0.atom(i), &mut x);
            x
        })
        .collect())
}

/// Per-chain sampler statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainDiagnostics {
    /// Sweeps in which the weight update kept the previous weights because
    /// the floor rejection budget ran out.
    pub weight_fallbacks: usize,
    /// Atom updates that kept the previous atom for the same reason.
    pub atom_fallbacks: usize,
    /// Mean number of occupied clusters over retained sweeps.
    pub mean_clusters: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    FiniteK,
    Dp,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::FiniteK => "finite_k",
            Model::Dp => "dp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "finite_k" => Ok(Model::FiniteK),
            "dp" => Ok(Model::Dp),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChain {
    pub model: Model,
    pub draws: Vec<DiscreteMeasure>,
    pub seed: u64,
    pub n: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub diagnostics: ChainDiagnostics,
}

impl PosteriorChain {
    /// Header line, then one measure per line as `;`-separated atom records.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# chain seed={} n={} model={} iterations={} burn_in={} thin={}\n",
            self.seed,
            self.n,
            self.model.name(),
            self.iterations,
            self.burn_in,
            self.thin
        );
        for g in &self.draws {
            let recs: Vec<String> = g.atoms().zip(g.weights()).map(|(a, w)| atom_record(*w, a)).collect();
            out.push_str(&recs.join(" ; "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, space: &ParamSpace) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing chain header".into(),
        })?;
        let fields = header.strip_prefix("# chain").ok_or(Error::Parse {
            line: 1,
            msg: "header must start with `# chain`".into(),
        })?;
        let get = |key: &str| -> Result<String> {
            fields
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .map(str::to_string)
                .ok_or(Error::Parse {
                    line: 1,
                    msg: format!("header lacks `{key}`"),
                })
        };
        let num = |v: String, key: &str| -> Result<u64> {
            v.parse().map_err(|_| Error::Parse {
                line: 1,
                msg: format!("bad value for `{key}`"),
            })
        };
        let seed = num(get("seed")?, "seed")?;
        let n = num(get("n")?, "n")? as usize;
        let model = Model::parse(&get("model")?).map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
        let iterations = num(get("iterations")?, "iterations")? as usize;
        let burn_in = num(get("burn_in")?, "burn_in")? as usize;
        let thin = num(get("thin")?, "thin")? as usize;
        let mut draws = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut atoms = Vec::new();
            let mut weights = Vec::new();
            for rec in line.split(';') {
                let (w, a) = parse_atom_record(rec.trim(), space.dim(), i + 1)?;
                weights.push(w);
                atoms.extend(a);
            }
            draws.push(DiscreteMeasure::from_flat(atoms, weights, space)?);
        }
        Ok(Self {
            model,
            draws,
            seed,
            n,
            iterations,
            burn_in,
            thin,
            diagnostics: ChainDiagnostics::default(),
        })
    }
}

/// Shared validation for the Gibbs samplers; returns the flat data buffer.
pub(crate) fn check_sampler_inputs(
    data: &[Vec<f64>],
    space: &ParamSpace,
    family: &LikelihoodFamily,
    iterations: usize,
    burn_in: usize,
    thin: usize,
) -> Result<Vec<f64>> {
    if family.kind() != FamilyKind::GaussianLocation {
        return Err(Error::InvalidArgument(format!(
            "conjugate sampler needs the Gaussian location family, got {}",
            family.name()
        )));
    }
    if family.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: family.dim(),
        });
    }
    if thin == 0 || burn_in > iterations {
        return Err(Error::InvalidArgument(format!(
            "need thin ≥ 1 and burn_in ≤ iterations (thin={thin}, burn_in={burn_in}, iterations={iterations})"
        )));
    }
    let mut flat = Vec::with_capacity(data.len() * space.dim());
    for x in data {
        if x.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLikelihood);
        }
        flat.extend_from_slice(x);
    }
    Ok(flat)
}

/// Whether sweep `it` (0-based) is retained.
pub(crate) fn retained(it: usize, burn_in: usize, thin: usize) -> bool {
    it >= burn_in && (it + 1 - burn_in) % thin == 0
}
