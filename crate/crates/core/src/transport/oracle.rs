use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::numeric::CompensatedSum;

/// `W_r` on the real line through the monotone (quantile) coupling: sort both
/// atom lists and match CDF segments. Independent of the simplex solver.
pub fn wasserstein_1d_oracle(g: &DiscreteMeasure, gp: &DiscreteMeasure, r: f64) -> Result<f64> {
    super::check_order(r)?;
    for m in [g, gp] {
        if m.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: m.dim(),
            });
        }
    }
    let sorted = |m: &DiscreteMeasure| {
        let mut v: Vec<(f64, f64)> = m
            .atoms_flat()
            .iter()
            .copied()
            .zip(m.weights().iter().copied())
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let a = sorted(g);
    let b = sorted(gp);
    let cumulative = |v: &[(f64, f64)]| {
        let mut acc = CompensatedSum::new();
        let mut c: Vec<f64> = v
            .iter()
            .map(|(_, w)| {
                acc.add(*w);
                acc.value()
            })
            .collect();
        // both CDFs end at exactly 1
        *c.last_mut().unwrap() = 1.0;
        c
    };
    let ca = cumulative(&a);
    let cb = cumulative(&b);
    let (mut i, mut j) = (0, 0);
    let mut prev = 0.0;
    let mut acc = CompensatedSum::new();
    while i < a.len() && j < b.len() {
        let t = ca[i].min(cb[j]);
        if t > prev {
            acc.add((t - prev) * (a[i].0 - b[j].0).abs().powf(r));
            prev = t;
        }
        if ca[i] <= t {
            i += 1;
        }
        if cb[j] <= t {
            j += 1;
        }
    }
    Ok(acc.value().max(0.0).powf(1.0 / r))
}
