//! One-dimensional numerical integration.
//!
//! [`integrate`] is a globally adaptive Gauss–Kronrod (7/15) scheme: the
//! interval with the largest error estimate is bisected until the summed
//! estimate drops below the absolute tolerance. Breakpoints (kinks of the
//! integrand, e.g. Laplace atoms) seed the initial partition.

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            max_intervals: 4000,
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    Segment {
        a,
        b,
        value: k * h,
        error: ((k - g) * h).abs(),
    }
}

/// Adaptive integral of `f` over `[a, b]`, splitting first at `breakpoints`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadratureOptions,
) -> Result<Integral> {
    if !(a < b) {
        return Err(Error::QuadratureFailure(format!("empty interval [{a}, {b}]")));
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|x| *x > a && *x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = vec![a];
    edges.extend(cuts);
    edges.push(b);

    let mut heap = BinaryHeap::new();
    for w in edges.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod(&f, w[0], w[1]));
        }
    }
    let mut evaluations = 15 * heap.len();
    loop {
        let (value, error) = totals(&heap);
        if !value.is_finite() {
            return Err(Error::QuadratureFailure("non-finite integrand".into()));
        }
        if error <= opts.abs_tol || heap.len() >= opts.max_intervals {
            if error > 10.0 * opts.abs_tol.max(1e-12) && heap.len() >= opts.max_intervals {
                return Err(Error::QuadratureFailure(format!(
                    "error estimate {error:e} above tolerance after {} intervals",
                    heap.len()
                )));
            }
            return Ok(Integral {
                value,
                error,
                evaluations,
            });
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // cannot split further; accept
            heap.push(Segment { error: 0.0, ..worst });
            continue;
        }
        heap.push(kronrod(&f, worst.a, mid));
        heap.push(kronrod(&f, mid, worst.b));
        evaluations += 30;
    }
}

fn totals(heap: &BinaryHeap<Segment>) -> (f64, f64) {
    let mut v = CompensatedSum::new();
    let mut e = CompensatedSum::new();
    for s in heap.iter() {
        v.add(s.value);
        e.add(s.error);
    }
    (v.value(), e.value())
}

/// Composite trapezoid rule on a uniform grid of `n` intervals. Spectrally
/// accurate for smooth integrands that decay at both ends (Gaussian mixtures).
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = CompensatedSum::new();
    acc.add(0.5 * (f(a) + f(b)));
    for i in 1..n {
        acc.add(f(a + h * i as f64));
    }
    acc.value() * h
}
