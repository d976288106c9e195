use super::series::TailCertificate;
use super::{shift_weight, ComplexEstimate, ObservableSpec, TiltCache, Visitor};
use crate::lattice::VertexSet;
use crate::observables::{CapacityCache, Ensemble};
use crate::par::Execution;
use crate::stats::{Accumulator, ComplexAccumulator, Estimate};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiniteDifference {
    pub step: f64,
    pub value: Estimate,
}

/// Per-bracket Cauchy bound with the radius `N^{−1/2}`:
/// `k! N^{k/2} e^{1/2} E[|F| 1{A_N(h)}]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivativeScaling {
    pub n: u64,
    pub radius: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    pub h: f64,
    pub k: u32,
    pub radius: f64,
    pub points: usize,
    pub n_max: u64,
    /// `∂^k` of `Σ_{N ≤ n_max} F̄^X_N` at `h`.
    pub value: ComplexEstimate,
    /// The tail certificate fails somewhere on the circle.
    pub flagged: bool,
    pub certificate: TailCertificate,
    pub finite_difference: FiniteDifference,
    pub scaling: Vec<DerivativeScaling>,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Cauchy-integral estimate of the `k`-th derivative at `h` with the
/// `m`-point trapezoidal rule on the circle of radius `radius`, all points
/// reweighted from samples at `h`. The finite-difference companion uses step
/// `radius / 2` on the same samples.
#[allow(clippy::too_many_arguments)]
pub fn derivative_estimate(
    spec: &ObservableSpec,
    x: &VertexSet,
    h: f64,
    k: u32,
    radius: f64,
    m: usize,
    n_max: u64,
    e: &Ensemble,
    caps: &CapacityCache,
    exec: Execution,
) -> Result<DerivativeEstimate> {
    if k == 0 {
        return Err(Error::precondition("derivative order must be at least 1"));
    }
    if !(radius > 0.0) {
        return Err(Error::precondition("radius must be positive"));
    }
    if m < 8 * k as usize {
        return Err(Error::precondition(format!("{m} quadrature points; at least {} needed", 8 * k)));
    }
    let growth = spec.declared_growth()?;
    let tilts = TiltCache::new(&e.domain()?);
    let visitor = Visitor { x, spec, caps, tilts: &tilts, margin: e.margin, n_max };
    let scale = factorial(k) / (m as f64 * radius.powi(k as i32));
    let nodes: Vec<(Complex64, Complex64)> = (0..m)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / m as f64;
            (h + Complex64::from_polar(radius, t), Complex64::from_polar(scale, -(k as f64) * t))
        })
        .collect();
    let step = radius / 2.0;
    let fd_levels: Vec<(f64, f64)> = (0..=k)
        .map(|i| {
            let sign = if (k - i).is_multiple_of(2) { 1.0 } else { -1.0 };
            (h + (i as f64 - k as f64 / 2.0) * step, sign * binomial(k, i) / step.powi(k as i32))
        })
        .collect();
    let nm = n_max as usize;
    let (cauchy, fd, counts, abs) = e.fold(
        exec,
        || (ComplexAccumulator::default(), Accumulator::default(), vec![0u64; nm], vec![0.0f64; nm]),
        |(cauchy, fd, counts, abs), _, phi| {
            let mut c = Complex64::new(0.0, 0.0);
            if let Some(v) = visitor.visit(phi, h, true)? {
                if let Some((energy, pairing)) = v.tilt {
                    counts[v.bin as usize - 1] += 1;
                    abs[v.bin as usize - 1] += v.value.abs();
                    for (z, coef) in &nodes {
                        c += v.value * shift_weight(*z, h, energy, pairing) * coef;
                    }
                }
            }
            cauchy.push(c);
            let mut diff = 0.0;
            for &(level, coef) in &fd_levels {
                if let Some(v) = visitor.visit(phi, level, false)? {
                    if v.bin <= n_max {
                        diff += coef * v.value;
                    }
                }
            }
            fd.push(diff);
            Ok(())
        },
        |a, b| {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
            a.2.iter_mut().zip(&b.2).for_each(|(x, y)| *x += y);
            a.3.iter_mut().zip(&b.3).for_each(|(x, y)| *x += y);
        },
    )?;
    let certificate = TailCertificate::build(&counts, e.samples, growth, radius);
    let n = e.samples.max(1) as f64;
    let scaling = (1..=n_max)
        .map(|bn| DerivativeScaling {
            n: bn,
            radius: (bn as f64).powf(-0.5),
            bound: factorial(k) * (bn as f64).powf(k as f64 / 2.0) * 0.5f64.exp() * abs[bn as usize - 1] / n,
        })
        .collect();
    Ok(DerivativeEstimate {
        h,
        k,
        radius,
        points: m,
        n_max,
        value: (&cauchy).into(),
        flagged: !certificate.available,
        certificate,
        finite_difference: FiniteDifference { step, value: (&fd).into() },
        scaling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::origin;
    use crate::potential::FreeGreen;

    fn e(samples: u64) -> Ensemble {
        Ensemble { d: 3, side: 11, margin: 1, samples, seed: 51 }
    }

    #[test]
    fn preconditions() {
        let g = FreeGreen::new(3, 1e-12).unwrap();
        let caps = CapacityCache::new(&g);
        let one = ObservableSpec::one();
        let x = origin(3);
        let run = |k, r, m| derivative_estimate(&one, &x, 0.0, k, r, m, 5, &e(2), &caps, Execution::default());
        assert!(run(0, 0.3, 16).is_err());
        assert!(run(1, 0.0, 16).is_err());
        assert!(run(2, 0.3, 15).is_err());
        assert!(run(2, 0.3, 16).is_ok());
    }

    #[test]
    fn circle_symmetry_makes_the_derivative_real() {
        let g = FreeGreen::new(3, 1e-12).unwrap();
        let caps = CapacityCache::new(&g);
        let d = derivative_estimate(&ObservableSpec::one(), &origin(3), 0.3, 1, 0.3, 16, 30, &e(100), &caps, Execution::default())
            .unwrap();
        assert!(d.value.value.im.abs() < 1e-12 * (1.0 + d.value.value.re.abs()));
        assert_eq!(d.scaling.len(), 30);
        assert!((d.scaling[3].radius - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cauchy_and_finite_difference_agree_for_the_finite_probability() {
        let g = FreeGreen::new(3, 1e-12).unwrap();
        let caps = CapacityCache::new(&g);
        let d = derivative_estimate(&ObservableSpec::one(), &origin(3), 0.2, 1, 0.25, 16, 400, &e(1500), &caps, Execution::default())
            .unwrap();
        let gap = (d.value.value.re - d.finite_difference.value.mean).abs();
        let tol = 3.0 * (d.value.stderr.powi(2) + d.finite_difference.value.stderr.powi(2)).sqrt();
        assert!(gap < tol, "{d:?}");
        // the finite probability 1 − θ increases with h
        assert!(d.value.value.re > 0.0);
    }
}
