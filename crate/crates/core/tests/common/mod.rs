//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use mixcontract::measures::{DiscreteMeasure, ParamSpace};
use rand::Rng;

/// `W_r` in one dimension from the quantile functions:
/// `W_r^r = ∫₀¹ |F⁻¹(u) − G⁻¹(u)|^r du`, integrated exactly between the
/// jumps of the two step functions.
pub fn quantile_oracle(g: &DiscreteMeasure, gp: &DiscreteMeasure, r: f64) -> f64 {
    let sorted = |m: &DiscreteMeasure| {
        let mut v: Vec<(f64, f64)> = m.atoms().map(|a| a[0]).zip(m.weights().iter().copied()).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (a, b) = (sorted(g), sorted(gp));
    let cum = |v: &[(f64, f64)]| {
        let mut acc = 0.0;
        let mut out: Vec<f64> = v
            .iter()
            .map(|(_, w)| {
                acc += w;
                acc
            })
            .collect();
        *out.last_mut().unwrap() = 1.0;
        out
    };
    let (ca, cb) = (cum(&a), cum(&b));
    let mut cuts: Vec<f64> = ca.iter().chain(&cb).copied().collect();
    cuts.push(0.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let inv = |v: &[(f64, f64)], c: &[f64], u: f64| {
        let i = c.partition_point(|x| *x < u);
        v[i.min(v.len() - 1)].0
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        total += (w[1] - w[0]) * (inv(&a, &ca, mid) - inv(&b, &cb, mid)).abs().powf(r);
    }
    total.powf(1.0 / r)
}

/// Minimum transport cost by enumerating every basic feasible solution
/// (spanning-tree basis of the bipartite cell graph). Exact; practical for
/// `k·k′ ≤ 12`.
pub fn vertex_enumeration(a: &[f64], b: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> f64 {
    let (k, kp) = (a.len(), b.len());
    let cells = k * kp;
    let m = k + kp - 1;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1u32 << cells) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let mut edges: Vec<(usize, usize)> = (0..cells)
            .filter(|c| mask & (1 << c) != 0)
            .map(|c| (c / kp, c % kp))
            .collect();
        // peel leaves; a spanning tree on k + k′ nodes peels completely
        let mut supply = a.to_vec();
        let mut demand = b.to_vec();
        let mut value = 0.0;
        let mut feasible = true;
        while !edges.is_empty() {
            let deg = |node: usize, edges: &[(usize, usize)]| {
                edges
                    .iter()
                    .filter(|(i, j)| if node < k { *i == node } else { *j == node - k })
                    .count()
            };
            let leaf = (0..k + kp).find(|&v| deg(v, &edges) == 1);
            let Some(v) = leaf else {
                feasible = false;
                break;
            };
            let pos = edges
                .iter()
                .position(|(i, j)| if v < k { *i == v } else { *j == v - k })
                .unwrap();
            let (i, j) = edges.swap_remove(pos);
            let f = if v < k { supply[i] } else { demand[j] };
            if f < -1e-12 {
                feasible = false;
                break;
            }
            supply[i] -= f;
            demand[j] -= f;
            value += f * cost(i, j);
        }
        if feasible && supply.iter().chain(&demand).all(|x| x.abs() < 1e-9) {
            best = best.min(value);
        }
    }
    best
}

/// 2×2 instances: the single free coordinate `π₁₁` on a grid of step 1e-4.
pub fn grid_2x2(a: &[f64], b: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> f64 {
    let lo = (a[0] + b[0] - 1.0).max(0.0);
    let hi = a[0].min(b[0]);
    let steps = ((hi - lo) / 1e-4).ceil() as usize;
    (0..=steps)
        .map(|s| {
            let x = (lo + s as f64 * 1e-4).min(hi);
            let p = [[x, a[0] - x], [b[0] - x, 1.0 - a[0] - b[0] + x]];
            let mut v = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    v += p[i][j].max(0.0) * cost(i, j);
                }
            }
            v
        })
        .fold(f64::INFINITY, f64::min)
}

/// Random measure with `1..=max_k` atoms, uniform atoms on the box and
/// exponential weights.
pub fn random_pair_member<R: Rng>(rng: &mut R, space: &ParamSpace, max_k: usize) -> DiscreteMeasure {
    let k = rng.random_range(1..=max_k);
    let d = space.dim();
    let atoms: Vec<f64> = (0..k * d)
        .map(|i| rng.random_range(space.lower()[i % d]..=space.upper()[i % d]))
        .collect();
    let weights: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3).collect();
    DiscreteMeasure::from_flat(atoms, weights, space).unwrap()
}
