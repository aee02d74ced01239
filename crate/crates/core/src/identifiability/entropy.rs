//! Covering and packing numbers of parameter boxes and of sets of mixing
//! measures, and a check of the entropy bounds for `𝒢_k(Θ)` and `𝒢̄(Θ)`.
//!
//! Covering balls are closed. A packing is a set of points pairwise at
//! distance at least the radius; the greedy packings used for lower bounds on
//! covering numbers need strict separation and say so.

use crate::error::{Error, Result};
use crate::measures::{random_measure, DiscreteMeasure, ParamSpace};
use crate::seeds::{derive_seed, rng};
use crate::transport::{wasserstein, wasserstein_1d_oracle};
use rand::Rng;

/// `W_r`, through the quantile coupling when `d = 1`.
pub fn wasserstein_fast(g: &DiscreteMeasure, gp: &DiscreteMeasure, r: f64) -> Result<f64> {
    if g.dim() == 1 {
        wasserstein_1d_oracle(g, gp, r)
    } else {
        wasserstein(g, gp, r)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("radius must be positive, got {eps}")))
    }
}

/// Covering number of a box by closed Euclidean balls of radius `eps`.
/// Exact for `d = 1`; for `d > 1` the count of the cube grid whose cells are
/// inscribed in the balls.
pub fn box_covering_number(space: &ParamSpace, eps: f64) -> Result<u64> {
    check_eps(eps)?;
    let d = space.dim() as f64;
    Ok((0..space.dim())
        .map(|j| {
            let cells = if space.dim() == 1 {
                space.side(j) / (2.0 * eps)
            } else {
                space.side(j) * d.sqrt() / (2.0 * eps)
            };
            ((cells - 1e-9).ceil() as u64).max(1)
        })
        .product())
}

/// Packing number of a box at separation `eps` (points `≥ eps` apart). Exact
/// for `d = 1`; the lattice packing for `d > 1`.
pub fn box_packing_number(space: &ParamSpace, eps: f64) -> Result<u64> {
    check_eps(eps)?;
    Ok((0..space.dim())
        .map(|j| (space.side(j) / eps + 1e-9).floor() as u64 + 1)
        .product())
}

/// Indices of a greedy packing of `candidates` with pairwise `W_r > sep`,
/// scanned in order.
pub fn greedy_packing(candidates: &[DiscreteMeasure], sep: f64, r: f64) -> Result<Vec<usize>> {
    let mut chosen: Vec<usize> = Vec::new();
    'cand: for (i, g) in candidates.iter().enumerate() {
        for &j in &chosen {
            if wasserstein_fast(g, &candidates[j], r)? <= sep {
                continue 'cand;
            }
        }
        chosen.push(i);
    }
    Ok(chosen)
}

/// Farthest-point `eps`-net of `candidates`: every candidate lies within `eps`
/// of a returned centre.
pub fn greedy_net(candidates: &[DiscreteMeasure], eps: f64, r: f64) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let mut centres = vec![0usize];
    let mut dist: Vec<f64> = candidates
        .iter()
        .map(|g| wasserstein_fast(g, &candidates[0], r))
        .collect::<Result<_>>()?;
    loop {
        let (far, d) = dist
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, d)| if *d > acc.1 { (i, *d) } else { acc });
        if d <= eps {
            return Ok(centres);
        }
        centres.push(far);
        for (i, g) in candidates.iter().enumerate() {
            dist[i] = dist[i].min(wasserstein_fast(g, &candidates[far], r)?);
        }
    }
}

/// Set whose covering number is requested.
#[derive(Debug, Clone)]
pub enum CoverTarget<'a> {
    /// A parameter box under the Euclidean metric.
    Box(&'a ParamSpace),
    /// The ball `{G ∈ 𝒢_k : W_r(centre, G) ≤ radius}` under `W_r`,
    /// represented by `samples` seeded draws.
    WassersteinBall {
        centre: &'a DiscreteMeasure,
        k: usize,
        radius: f64,
        r: f64,
        samples: usize,
        seed: u64,
    },
}

/// Covering number at radius `eps`. For Wasserstein balls this is the size of
/// a greedy net of the sampled points, an upper bound for the sample.
pub fn covering_number(target: &CoverTarget<'_>, eps: f64) -> Result<usize> {
    check_eps(eps)?;
    match target {
        CoverTarget::Box(space) => Ok(box_covering_number(space, eps)? as usize),
        CoverTarget::WassersteinBall {
            centre,
            k,
            radius,
            r,
            samples,
            seed,
        } => {
            let pts = sample_ball(centre, *k, *radius, *r, *samples, *seed)?;
            Ok(greedy_net(&pts, eps, *r)?.len())
        }
    }
}

const BALL_REJECTIONS: usize = 1_000_000;

/// Seeded draws from `{G ∈ 𝒢_k : W_r(centre, G) ≤ radius}` by perturbing the
/// centre at a random scale and rejecting outside the ball. `k` must be at
/// least the number of atoms of the centre; extra atoms split off parents.
pub fn sample_ball(
    centre: &DiscreteMeasure,
    k: usize,
    radius: f64,
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<DiscreteMeasure>> {
    if k < centre.len() {
        return Err(Error::InvalidArgument(format!("k = {k} below centre size {}", centre.len())));
    }
    let mut rg = rng(seed);
    let space = centre.space();
    let dim = centre.dim();
    let k0 = centre.len();
    let mut out = Vec::with_capacity(samples);
    let mut tries = 0usize;
    while out.len() < samples {
        tries += 1;
        if tries > BALL_REJECTIONS {
            return Err(Error::SamplingExhausted(BALL_REJECTIONS));
        }
        let scale = radius * rg.random_range(0.0..=2.0f64);
        let mut atoms = Vec::with_capacity(k * dim);
        let mut weights = Vec::with_capacity(k);
        for i in 0..k {
            let p = if i < k0 { i } else { rg.random_range(0..k0) };
            let mut a = centre.atom(p).to_vec();
            for v in a.iter_mut() {
                *v += rg.random_range(-1.0..=1.0) * scale;
            }
            space.clamp(&mut a);
            atoms.extend(a);
            weights.push(centre.weight(p) * rg.random_range(0.05..1.0f64));
        }
        let g = match DiscreteMeasure::from_flat(atoms, weights, space) {
            Ok(g) => g,
            Err(_) => continue,
        };
        if wasserstein_fast(centre, &g, r)? <= radius {
            out.push(g);
        }
    }
    Ok(out)
}

/// One part of the entropy check.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyPart {
    pub part: char,
    /// `log` of a valid packing size, a lower bound of the left side.
    pub lhs_lower: f64,
    pub rhs: f64,
    pub packing: usize,
    pub candidates: usize,
}

impl EntropyPart {
    pub fn passed(&self) -> bool {
        self.lhs_lower <= self.rhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    pub k: usize,
    pub eps: f64,
    pub r: f64,
    pub parts: Vec<EntropyPart>,
}

impl EntropyReport {
    pub fn passed(&self) -> bool {
        self.parts.iter().all(EntropyPart::passed)
    }
}

/// Candidate pool size for the packing lower bounds.
pub const ENTROPY_CANDIDATES: usize = 1500;

/// Truncation used for the infinite class in part (b).
pub const TRUNCATION_ATOMS: usize = 6;

/// Upper bound of `sup log N(δ, Θ', |·|)` over subsets of diameter `≤ diam`
/// with centres inside `Θ'`: `log D(δ, Θ')`, bounded by the lattice count in
/// `d = 1` and by the volume ratio `(1 + 2·diam/δ)^d` otherwise.
fn sup_subset_log_covering(diam: f64, delta: f64, d: usize) -> f64 {
    if d == 1 {
        ((diam / delta + 1e-9).floor() + 1.0).ln()
    } else {
        d as f64 * (1.0 + 2.0 * diam / delta).ln()
    }
}

/// Greedy packing lower bounds against the three entropy bounds on `Θ`:
/// (a) `log N(2ε, 𝒢_k, W_r)`, (b) `log N(2ε, 𝒢̄, W_r)` on the truncation,
/// (c) `log N(ε/2, {W_r(G₀, G) ≤ 2ε} ∩ 𝒢_k, W_r)` around evenly spaced equal
/// weight `G₀`. A packing separated by more than `2δ` lower-bounds `N(δ)`.
pub fn entropy_lemma_check(k: usize, space: &ParamSpace, eps: f64, r: f64) -> Result<EntropyReport> {
    check_eps(eps)?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if r < 1.0 {
        return Err(Error::InvalidArgument(format!("order r = {r} must be at least 1")));
    }
    let d = space.dim();
    let diam = space.diameter();
    let seed = derive_seed(0x656e_7472_6f70_79, &[k as u64, eps.to_bits(), r.to_bits(), d as u64]);
    let log_n_eps = (box_covering_number(space, eps)? as f64).ln();
    let slack = (std::f64::consts::E + std::f64::consts::E * (diam / eps).powf(r)).ln();

    let pool = |kk: usize, tag: u64| -> Vec<DiscreteMeasure> {
        let mut rg = rng(derive_seed(seed, &[tag]));
        (0..ENTROPY_CANDIDATES)
            .map(|_| {
                let atoms = rg.random_range(1..=kk);
                random_measure(&mut rg, space, atoms)
            })
            .collect()
    };

    let mut parts = Vec::with_capacity(3);
    let cand = pool(k, 1);
    let pack = greedy_packing(&cand, 4.0 * eps, r)?;
    parts.push(EntropyPart {
        part: 'a',
        lhs_lower: (pack.len() as f64).ln(),
        rhs: k as f64 * (log_n_eps + slack),
        packing: pack.len(),
        candidates: cand.len(),
    });

    let cand = pool(TRUNCATION_ATOMS, 2);
    let pack = greedy_packing(&cand, 4.0 * eps, r)?;
    parts.push(EntropyPart {
        part: 'b',
        lhs_lower: (pack.len() as f64).ln(),
        rhs: box_covering_number(space, eps)? as f64 * slack,
        packing: pack.len(),
        candidates: cand.len(),
    });

    // G₀: equal weights on the diagonal of the box, evenly spaced
    let mut atoms = Vec::with_capacity(k * d);
    for i in 0..k {
        let t = (i as f64 + 0.5) / k as f64;
        for j in 0..d {
            atoms.push(space.lower()[j] + t * space.side(j));
        }
    }
    let g0 = DiscreteMeasure::from_flat(atoms, vec![1.0 / k as f64; k], space)?;
    let big_m = k as f64;
    // one atom has no pairwise separation; Diam(Θ) is used in its place
    let m = if k == 1 { diam } else { diam / k as f64 };
    let cand = sample_ball(&g0, k, 2.0 * eps, r, ENTROPY_CANDIDATES, derive_seed(seed, &[3]))?;
    let pack = greedy_packing(&cand, eps, r)?;
    let sub_diam = (4.0 * big_m.powf(1.0 / r) * eps).min(diam);
    let rhs_c = k as f64
        * (sup_subset_log_covering(sub_diam, eps / 4.0, d)
            + (2f64.powf(2.0 + 3.0 * r) * k as f64 * diam / m).ln());
    parts.push(EntropyPart {
        part: 'c',
        lhs_lower: (pack.len() as f64).ln(),
        rhs: rhs_c,
        packing: pack.len(),
        candidates: cand.len(),
    });

    Ok(EntropyReport { k, eps, r, parts })
}

/// `M(𝒢, G₁, r) = D(Ψ^{1/2} / (2 Diam^{α−1} √C₁), 𝒢 ∩ B_W(G₁, r/2), W₂)`,
/// with the packing number replaced by a greedy packing of sampled ball
/// points. `psi` is a Hellinger-information value at radius `r`.
pub fn m_statistic(
    g1: &DiscreteMeasure,
    k: usize,
    psi: f64,
    r: f64,
    holder_alpha: f64,
    holder_c1: f64,
    samples: usize,
    seed: u64,
) -> Result<usize> {
    if !(psi > 0.0) {
        return Err(Error::InvalidArgument(format!("Hellinger information must be positive, got {psi}")));
    }
    let diam = g1.space().diameter();
    let sep = psi.sqrt() / (2.0 * diam.powf(holder_alpha - 1.0) * holder_c1.sqrt());
    let pts = sample_ball(g1, k, r / 2.0, 2.0, samples, seed)?;
    // greedy_packing is strict; points exactly at `sep` are rare in sampled sets
    Ok(greedy_packing(&pts, sep, 2.0)?.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ParamSpace {
        ParamSpace::interval(0.0, 1.0).unwrap()
    }

    #[test]
    fn box_examples() {
        assert_eq!(box_covering_number(&unit(), 0.1).unwrap(), 5);
        assert_eq!(box_packing_number(&unit(), 0.1).unwrap(), 11);
        assert!(box_covering_number(&unit(), 0.0).is_err());
        let sq = ParamSpace::cube(2, 0.0, 1.0).unwrap();
        assert_eq!(box_packing_number(&sq, 0.5).unwrap(), 9);
    }

    #[test]
    fn sandwich_on_random_boxes() {
        let mut rg = rng(11);
        for _ in 0..500 {
            let d = rg.random_range(1..=2usize);
            let lo: Vec<f64> = (0..d).map(|_| rg.random_range(-2.0..0.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|l| l + rg.random_range(0.1..3.0)).collect();
            let space = ParamSpace::new(lo, hi).unwrap();
            let eps = rg.random_range(0.01..0.7);
            let n = box_covering_number(&space, eps).unwrap();
            let dd = box_packing_number(&space, eps).unwrap();
            let n2 = box_covering_number(&space, eps / 2.0).unwrap();
            assert!(n <= dd && dd <= n2, "{space:?} {eps}: {n} {dd} {n2}");
        }
    }

    #[test]
    fn greedy_net_covers() {
        let cand: Vec<DiscreteMeasure> = (0..=100)
            .map(|i| DiscreteMeasure::dirac(&[i as f64 / 100.0], &unit()).unwrap())
            .collect();
        let net = greedy_net(&cand, 0.1, 1.0).unwrap();
        for g in &cand {
            assert!(net.iter().any(|&c| wasserstein_fast(g, &cand[c], 1.0).unwrap() <= 0.1 + 1e-12));
        }
        // the packing at separation > 0.1 of a 0.01 grid has 10 points
        assert_eq!(greedy_packing(&cand, 0.1, 1.0).unwrap().len(), 10);
    }

    #[test]
    fn ball_covering_counts() {
        let g0 = DiscreteMeasure::on_line(&[0.25, 0.75], &[0.5, 0.5], &unit()).unwrap();
        let target = CoverTarget::WassersteinBall {
            centre: &g0,
            k: 2,
            radius: 0.1,
            r: 1.0,
            samples: 300,
            seed: 4,
        };
        let fine = covering_number(&target, 0.02).unwrap();
        let coarse = covering_number(&target, 0.08).unwrap();
        assert!(coarse >= 1 && coarse <= fine);
        for g in sample_ball(&g0, 3, 0.1, 1.0, 50, 5).unwrap() {
            assert!(wasserstein_fast(&g0, &g, 1.0).unwrap() <= 0.1);
        }
    }

    #[test]
    fn lemma_small_cases() {
        for (k, eps, r) in [(1, 0.1, 1.0), (2, 0.1, 1.0)] {
            let rep = entropy_lemma_check(k, &unit(), eps, r).unwrap();
            assert!(rep.passed(), "{rep:?}");
            assert_eq!(rep.parts.len(), 3);
        }
        // k = 1: part (a) packing of [0,1] at separation > 0.4 has 3 points
        let rep = entropy_lemma_check(1, &unit(), 0.1, 1.0).unwrap();
        assert!(rep.parts[0].packing <= 3);
    }

    #[test]
    fn m_statistic_positive() {
        let g1 = DiscreteMeasure::on_line(&[0.25, 0.75], &[0.5, 0.5], &unit()).unwrap();
        let m = m_statistic(&g1, 2, 0.01, 0.2, 1.0, 1.0 / 8f64.sqrt(), 200, 3).unwrap();
        assert!(m >= 1);
        assert!(m_statistic(&g1, 2, 0.0, 0.2, 1.0, 1.0, 10, 3).is_err());
    }
}
