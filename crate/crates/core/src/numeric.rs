//! Small numerical helpers shared across modules.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::SQRT_2;

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Standard normal CDF, accurate in both tails.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 - Φ(x)`.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `ln Φ(x)`, finite far into the lower tail.
pub fn log_std_normal_cdf(x: f64) -> f64 {
    if x > -35.0 {
        std_normal_cdf(x).ln()
    } else {
        // Mills-ratio asymptotic series
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// `ln(Φ(b) − Φ(a))` for `a < b`, stable in both tails.
pub fn log_normal_interval(a: f64, b: f64) -> f64 {
    if !(a < b) {
        return f64::NEG_INFINITY;
    }
    let (a, b) = if a > 0.0 { (-b, -a) } else { (a, b) };
    let lb = log_std_normal_cdf(b);
    let la = log_std_normal_cdf(a);
    lb + (-(la - lb).exp_m1()).ln()
}

/// Inverse of the standard normal CDF.
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step against the accurate CDF
    let pdf = std_normal_pdf(x);
    if pdf > 0.0 {
        x - (std_normal_cdf(x) - p) / pdf
    } else {
        x
    }
}

/// Ordinary least squares fit `y = intercept + slope * x`.
/// Returns `(slope, intercept, residual_rms)`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss = compensated_sum(
        xs.iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2)),
    );
    (slope, intercept, (ss / n).sqrt())
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Formats a value with 17 significant digits in plain decimal notation
/// (scientific notation only for very large or very small magnitudes).
pub fn fmt_sig17(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0.0000000000000000".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-6..=15).contains(&exp) {
        return format!("{v:.16e}");
    }
    let decimals = (16 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}
