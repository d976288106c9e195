//! Streaming estimators, interval estimates and small fits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Running `(count, sum, sum of squares)`; merging is associative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub count: u64,
    pub sum: f64,
    pub sumsq: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        self.sum += other.sum;
        self.sumsq += other.sumsq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Summary of an [`Accumulator`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl From<&Accumulator> for Estimate {
    fn from(a: &Accumulator) -> Self {
        Estimate { mean: a.mean(), stderr: a.stderr(), samples: a.count }
    }
}

/// Accumulator for complex-valued per-sample contributions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplexAccumulator {
    pub re: Accumulator,
    pub im: Accumulator,
}

impl ComplexAccumulator {
    pub fn push(&mut self, z: Complex64) {
        self.re.push(z.re);
        self.im.push(z.im);
    }

    pub fn merge(&mut self, other: &ComplexAccumulator) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    pub fn mean(&self) -> Complex64 {
        Complex64::new(self.re.mean(), self.im.mean())
    }

    /// Standard error of the mean, combining real and imaginary parts.
    pub fn stderr(&self) -> f64 {
        if self.re.count == 0 {
            return f64::INFINITY;
        }
        ((self.re.variance() + self.im.variance()) / self.re.count as f64).sqrt()
    }

    pub fn count(&self) -> u64 {
        self.re.count
    }
}

/// Wilson score interval for `k` successes in `n` trials at normal quantile `z`.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the endpoints are exact at k = 0 and k = n; rounding would blur them
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r2: f64,
}

/// Weighted least-squares line through `(x, y)`; unit weights when `w` is `None`.
pub fn fit_line(x: &[f64], y: &[f64], w: Option<&[f64]>) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let wt = |i: usize| w.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..n).map(wt).sum();
    let mx = (0..n).map(|i| wt(i) * x[i]).sum::<f64>() / sw;
    let my = (0..n).map(|i| wt(i) * y[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| wt(i) * (x[i] - mx).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| wt(i) * (x[i] - mx) * (y[i] - my)).sum();
    let syy: f64 = (0..n).map(|i| wt(i) * (y[i] - my).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = (0..n)
        .map(|i| wt(i) * (y[i] - intercept - slope * x[i]).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    let dof = (n as f64 - 2.0).max(1.0);
    let slope_stderr = (ssr / dof / sxx).sqrt();
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        r2,
    })
}

/// Asymptotic Kolmogorov tail `P[K > lambda]`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub effective_n: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test; `b` may carry importance weights, in
/// which case its size enters through the Kish effective sample size.
pub fn ks_two_sample(a: &[f64], b: &[f64], b_weights: Option<&[f64]>) -> KsResult {
    let wb: Vec<f64> = match b_weights {
        Some(w) => w.to_vec(),
        None => vec![1.0; b.len()],
    };
    let total_b: f64 = wb.iter().sum();
    let neff_b = total_b * total_b / wb.iter().map(|w| w * w).sum::<f64>();
    let mut ia: Vec<usize> = (0..a.len()).collect();
    ia.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let mut ib: Vec<usize> = (0..b.len()).collect();
    ib.sort_by(|&i, &j| b[i].total_cmp(&b[j]));
    let (mut pa, mut pb) = (0usize, 0usize);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut stat = 0.0f64;
    while pa < ia.len() || pb < ib.len() {
        let next = match (ia.get(pa), ib.get(pb)) {
            (Some(&i), Some(&j)) => a[i].min(b[j]),
            (Some(&i), None) => a[i],
            (None, Some(&j)) => b[j],
            (None, None) => unreachable!(),
        };
        while pa < ia.len() && a[ia[pa]] <= next {
            fa += 1.0 / a.len() as f64;
            pa += 1;
        }
        while pb < ib.len() && b[ib[pb]] <= next {
            fb += wb[ib[pb]] / total_b;
            pb += 1;
        }
        stat = stat.max((fa - fb).abs());
    }
    let na = a.len() as f64;
    let en = (na * neff_b / (na + neff_b)).sqrt();
    KsResult {
        statistic: stat,
        effective_n: neff_b,
        p_value: kolmogorov_tail((en + 0.12 + 0.11 / en) * stat),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn accumulator_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut whole = Accumulator::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut left = Accumulator::default();
        let mut right = Accumulator::default();
        xs[..17].iter().for_each(|&x| left.push(x));
        xs[17..].iter().for_each(|&x| right.push(x));
        left.merge(&right);
        assert_eq!(left.count, whole.count);
        assert_relative_eq!(left.mean(), whole.mean(), epsilon = 1e-14);
        assert_relative_eq!(left.variance(), whole.variance(), epsilon = 1e-12);
    }

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        assert_relative_eq!(lo, 0.2189, epsilon = 1e-3);
        let (lo0, hi0) = wilson(0, 50, 1.96);
        assert_eq!(lo0, 0.0);
        assert!(hi0 > 0.0 && hi0 < 0.1);
    }

    #[test]
    fn exact_line_is_recovered() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let f = fit_line(&x, &y, None).unwrap();
        assert_relative_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kolmogorov_tail_reference_points() {
        // P[K > 1.36] ≈ 0.049, P[K > 1.63] ≈ 0.0098
        assert_relative_eq!(kolmogorov_tail(1.36), 0.0494, epsilon = 1e-3);
        assert_relative_eq!(kolmogorov_tail(1.63), 0.0098, epsilon = 5e-4);
    }

    #[test]
    fn ks_separates_shifted_samples() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let same: Vec<f64> = (0..400).map(|i| (i as f64 + 0.5) / 400.0).collect();
        let shifted: Vec<f64> = same.iter().map(|x| x + 0.3).collect();
        assert!(ks_two_sample(&a, &same, None).p_value > 0.5);
        assert!(ks_two_sample(&a, &shifted, None).p_value < 1e-6);
    }
}
