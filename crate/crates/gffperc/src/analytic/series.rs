use super::{shift_weight, ComplexEstimate, Growth, ObservableSpec, TiltCache, Visitor};
use crate::lattice::VertexSet;
use crate::observables::{CapacityCache, Ensemble};
use crate::par::Execution;
use crate::stats::{fit_line, Accumulator, ComplexAccumulator, Estimate};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Normal quantile used for the conservative decay rate.
const Z95: f64 = 1.96;

/// Geometric tail bound for `Σ_{N > N_max} |F̄_N(z)|`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TailCertificate {
    pub available: bool,
    /// Fitted rate `t̂` of `P̂[A_N] ≈ A e^{−t̂N}` and its standard error.
    pub rate: Option<f64>,
    pub rate_stderr: Option<f64>,
    /// `t̂` minus two confidence-interval half widths.
    pub conservative_rate: Option<f64>,
    /// `Σ_{N > N_max} G(N) A e^{(½(Im z)² − t)N}` with `G` the growth envelope.
    pub tail_bound: Option<f64>,
}

impl TailCertificate {
    pub(crate) fn build(counts: &[u64], samples: u64, growth: Growth, im: f64) -> Self {
        let pts: Vec<(f64, f64, f64)> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| ((i + 1) as f64, (c as f64 / samples as f64).ln(), c as f64))
            .collect();
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let ws: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let Some(fit) = fit_line(&xs, &ys, Some(&ws)) else {
            return TailCertificate::default();
        };
        let rate = -fit.slope;
        let conservative = rate - 2.0 * Z95 * fit.slope_stderr;
        let excess = 0.5 * im * im - conservative;
        let mut cert = TailCertificate {
            available: false,
            rate: Some(rate),
            rate_stderr: Some(fit.slope_stderr),
            conservative_rate: Some(conservative),
            tail_bound: None,
        };
        if conservative > 0.0 && excess < 0.0 {
            let amp = fit.intercept.exp();
            let mut sum = 0.0;
            let start = counts.len() as u64 + 1;
            for n in start..start + 1_000_000 {
                let term = growth.envelope(n as f64) * amp * (excess * n as f64).exp();
                sum += term;
                if term < 1e-18 * sum.max(1e-300) {
                    break;
                }
            }
            cert.available = sum.is_finite();
            cert.tail_bound = Some(sum);
        } else {
            log::warn!("tail certificate unavailable: ½(Im z)² = {} vs rate {conservative}", 0.5 * im * im);
        }
        cert
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesResult {
    pub z: Complex64,
    pub anchor: f64,
    pub n_max: u64,
    /// `F̄^X_N(z)` for `N = 1..=n_max`.
    pub per_n: Vec<ComplexEstimate>,
    /// `Σ_{M ≤ N} F̄^X_M(z)`.
    pub partial: Vec<ComplexEstimate>,
    /// `E[|F(C_X(a))| 1{A_N(a)}]` at the anchor.
    pub abs_version: Vec<Estimate>,
    /// Direct `E[F(C_X(a)) 1{finite}]` at the anchor, all brackets included.
    pub direct: Estimate,
    pub bracket_counts: Vec<u64>,
    pub infinite: u64,
    pub overflow: u64,
    /// Fraction of samples with a finite cluster beyond the last bracket.
    pub mass_beyond: f64,
    /// Sampled clusters violating the declared growth.
    pub growth_violations: u64,
    pub certificate: TailCertificate,
}

impl SeriesResult {
    pub fn value(&self) -> ComplexEstimate {
        self.partial.last().copied().unwrap_or(ComplexEstimate::zero(self.direct.samples))
    }
}

#[derive(Clone)]
struct Acc {
    per_n: Vec<Vec<ComplexAccumulator>>,
    abs: Vec<Accumulator>,
    counts: Vec<u64>,
    direct: Accumulator,
    infinite: u64,
    overflow: u64,
    violations: u64,
}

impl Acc {
    fn new(nz: usize, n_max: usize) -> Self {
        Acc {
            per_n: vec![vec![ComplexAccumulator::default(); n_max]; nz],
            abs: vec![Accumulator::default(); n_max],
            counts: vec![0; n_max],
            direct: Accumulator::default(),
            infinite: 0,
            overflow: 0,
            violations: 0,
        }
    }

    fn merge(&mut self, o: Acc) {
        for (a, b) in self.per_n.iter_mut().zip(&o.per_n) {
            a.iter_mut().zip(b).for_each(|(a, b)| a.merge(b));
        }
        self.abs.iter_mut().zip(&o.abs).for_each(|(a, b)| a.merge(b));
        self.counts.iter_mut().zip(&o.counts).for_each(|(a, b)| *a += b);
        self.direct.merge(&o.direct);
        self.infinite += o.infinite;
        self.overflow += o.overflow;
        self.violations += o.violations;
    }
}

/// Sparse accumulators hold only event samples; zeros only raise the count.
fn padded(mut a: Accumulator, n: u64) -> Accumulator {
    a.count = n;
    a
}

fn padded_c(a: &ComplexAccumulator, n: u64) -> ComplexAccumulator {
    ComplexAccumulator { re: padded(a.re, n), im: padded(a.im, n) }
}

/// Partial sums of `Σ_N F̄^X_N(z)` for heights sharing one real part.
fn run_anchor(
    spec: &ObservableSpec,
    growth: Growth,
    x: &VertexSet,
    zs: &[Complex64],
    n_max: u64,
    e: &Ensemble,
    caps: &CapacityCache,
    tilts: &TiltCache,
    exec: Execution,
) -> Result<Vec<SeriesResult>> {
    let anchor = zs[0].re;
    let visitor = Visitor { x, spec, caps, tilts, margin: e.margin, n_max };
    let nm = n_max as usize;
    let acc = e.fold(
        exec,
        || Acc::new(zs.len(), nm),
        |acc, _, phi| {
            let Some(v) = visitor.visit(phi, anchor, true)? else {
                acc.infinite += 1;
                acc.direct.push(0.0);
                return Ok(());
            };
            acc.direct.push(v.value);
            if !growth.admits(v.value, v.capacity) {
                acc.violations += 1;
            }
            match v.tilt {
                Some((energy, pairing)) => {
                    let k = v.bin as usize - 1;
                    acc.counts[k] += 1;
                    acc.abs[k].push(v.value.abs());
                    for (j, z) in zs.iter().enumerate() {
                        acc.per_n[j][k].push(v.value * shift_weight(*z, anchor, energy, pairing));
                    }
                }
                None => acc.overflow += 1,
            }
            Ok(())
        },
        |a, b| a.merge(b),
    )?;
    let n = e.samples;
    Ok(zs
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let per: Vec<ComplexAccumulator> = acc.per_n[j].iter().map(|a| padded_c(a, n)).collect();
            let mut running = ComplexAccumulator::default();
            let mut partial = Vec::with_capacity(nm);
            for a in &per {
                running.re.sum += a.re.sum;
                running.re.sumsq += a.re.sumsq;
                running.im.sum += a.im.sum;
                running.im.sumsq += a.im.sumsq;
                running.re.count = n;
                running.im.count = n;
                partial.push((&running).into());
            }
            SeriesResult {
                z: *z,
                anchor,
                n_max,
                per_n: per.iter().map(Into::into).collect(),
                partial,
                abs_version: acc.abs.iter().map(|a| (&padded(*a, n)).into()).collect(),
                direct: (&acc.direct).into(),
                bracket_counts: acc.counts.clone(),
                infinite: acc.infinite,
                overflow: acc.overflow,
                mass_beyond: acc.overflow as f64 / n.max(1) as f64,
                growth_violations: acc.violations,
                certificate: TailCertificate::build(&acc.counts, n, growth, z.im),
            }
        })
        .collect())
}

/// Partial sums of the bracket series at each `z`, anchored at `Re z`.
pub fn series_eval(
    spec: &ObservableSpec,
    x: &VertexSet,
    zs: &[Complex64],
    n_max: u64,
    e: &Ensemble,
    caps: &CapacityCache,
    exec: Execution,
) -> Result<Vec<SeriesResult>> {
    let growth = spec.declared_growth()?;
    let tilts = TiltCache::new(&e.domain()?);
    let mut anchors: Vec<f64> = zs.iter().map(|z| z.re).collect();
    anchors.sort_by(f64::total_cmp);
    anchors.dedup();
    let mut out: Vec<Option<SeriesResult>> = vec![None; zs.len()];
    for a in anchors {
        let idx: Vec<usize> = (0..zs.len()).filter(|&i| zs[i].re == a).collect();
        let group: Vec<Complex64> = idx.iter().map(|&i| zs[i]).collect();
        for (i, r) in idx.into_iter().zip(run_anchor(spec, growth, x, &group, n_max, e, caps, &tilts, exec)?) {
            out[i] = Some(r);
        }
    }
    Ok(out.into_iter().map(Option::unwrap).collect())
}

/// `F̄^X_N(z) = Σ_{S ∈ 𝒜_N} F(S) θ_S(z)`.
pub fn f_bar_n_complex(
    spec: &ObservableSpec,
    x: &VertexSet,
    n: u64,
    z: Complex64,
    e: &Ensemble,
    caps: &CapacityCache,
    exec: Execution,
) -> Result<ComplexEstimate> {
    if n == 0 {
        return Err(Error::precondition("N must be at least 1"));
    }
    let r = series_eval(spec, x, &[z], n, e, caps, exec)?;
    Ok(r[0].per_n[n as usize - 1])
}
