use super::Ensemble;
use crate::gff::FieldSample;
use crate::lattice::{Region, UnionFind};
use crate::par::Execution;
use crate::stats::wilson;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Adds sites in decreasing field order until `joined` holds; returns the
/// field value at that moment, i.e. the largest `h` for which the event holds
/// in `{φ ≥ h}`. `extra` virtual nodes follow the sites, and `attach(i)` lists
/// the virtual node a site is glued to.
fn bottleneck(
    domain: &Region,
    values: &[f64],
    extra: usize,
    attach: impl Fn(usize) -> Option<usize>,
    joined: impl Fn(&mut UnionFind) -> bool,
) -> f64 {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut uf = UnionFind::new(n + extra);
    let mut added = vec![false; n];
    for &v in &order {
        added[v] = true;
        domain.for_each_neighbor(v, |w| {
            if added[w] {
                uf.union(v, w);
            }
        });
        if let Some(a) = attach(v) {
            uf.union(v, n + a);
        }
        if joined(&mut uf) {
            return values[v];
        }
    }
    f64::NEG_INFINITY
}

/// Largest `h` with the origin joined to the shell `{depth ≤ margin}` in `{φ ≥ h}`.
pub fn bottleneck_to_shell(phi: &FieldSample, margin: usize) -> f64 {
    let dom = &phi.domain;
    let o = dom.index(&vec![0; dom.dim()]).expect("origin lies in a centred domain");
    let n = phi.values.len();
    bottleneck(dom, &phi.values, 1, |i| (dom.depth(i) <= margin).then_some(0), |uf| uf.find(o) == uf.find(n))
}

/// Largest `h` for which `{φ ≥ h}` crosses the domain between the two faces
/// orthogonal to the first axis.
pub fn crossing_bottleneck(phi: &FieldSample) -> f64 {
    let dom = &phi.domain;
    let n = phi.values.len();
    let stride = dom.strides()[0];
    let side = dom.shape()[0];
    bottleneck(
        dom,
        &phi.values,
        2,
        |i| match i / stride {
            0 => Some(0),
            c if c + 1 == side => Some(1),
            _ => None,
        },
        |uf| uf.find(n) == uf.find(n + 1),
    )
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThetaPoint {
    pub h: f64,
    pub theta: f64,
    pub stderr: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThetaCurve {
    pub side: usize,
    pub samples: u64,
    pub points: Vec<ThetaPoint>,
}

/// `θ̂(h)` on each domain size. All heights share the samples of a size, so
/// the curve is exactly non-increasing in `h`.
pub fn theta_hat(hs: &[f64], sides: &[usize], base: &Ensemble, exec: Execution) -> Result<Vec<ThetaCurve>> {
    let mut curves = Vec::with_capacity(sides.len());
    for &side in sides {
        let e = Ensemble { side, ..base.clone() };
        let mut b = e.fold(
            exec,
            Vec::new,
            |acc: &mut Vec<f64>, _, phi| {
                acc.push(bottleneck_to_shell(phi, e.margin));
                Ok(())
            },
            |a, b| a.extend(b),
        )?;
        b.sort_unstable_by(f64::total_cmp);
        let n = b.len() as u64;
        let points = hs
            .iter()
            .map(|&h| {
                let k = (b.len() - b.partition_point(|&v| v < h)) as u64;
                let p = if n == 0 { 0.0 } else { k as f64 / n as f64 };
                let (wilson_lo, wilson_hi) = wilson(k, n, 1.96);
                ThetaPoint { h, theta: p, stderr: (p * (1.0 - p) / n.max(1) as f64).sqrt(), wilson_lo, wilson_hi }
            })
            .collect();
        curves.push(ThetaCurve { side, samples: n, points });
    }
    Ok(curves)
}

/// Median crossing level with a 95% order-statistic interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HStarEstimate {
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub side: usize,
    pub samples: u64,
}

pub fn estimate_h_star(e: &Ensemble, exec: Execution) -> Result<HStarEstimate> {
    if e.samples == 0 {
        return Err(crate::Error::precondition("h_* estimate needs at least one sample"));
    }
    let mut b = e.fold(
        exec,
        Vec::new,
        |acc: &mut Vec<f64>, _, phi| {
            acc.push(crossing_bottleneck(phi));
            Ok(())
        },
        |a, b| a.extend(b),
    )?;
    b.sort_unstable_by(f64::total_cmp);
    let n = b.len();
    let half = 1.96 * (n as f64).sqrt() / 2.0;
    let at = |q: f64| b[(q.round().max(0.0) as usize).min(n - 1)];
    Ok(HStarEstimate {
        estimate: at((n as f64 - 1.0) / 2.0),
        ci_lo: at(n as f64 / 2.0 - half - 1.0),
        ci_hi: at(n as f64 / 2.0 + half),
        side: e.side,
        samples: n as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gff::Sampler;
    use crate::observables::{cluster_of, origin, LevelSetConfig};

    fn base() -> Ensemble {
        Ensemble { d: 3, side: 11, margin: 1, samples: 40, seed: 4 }
    }

    #[test]
    fn bottleneck_agrees_with_direct_cluster_search() {
        let e = base();
        let sampler = Sampler::new(&e.domain().unwrap());
        for i in 0..10 {
            let phi = sampler.sample(e.seed, i);
            let b = bottleneck_to_shell(&phi, e.margin);
            for h in [b - 1e-9, b + 1e-9] {
                let cfg = LevelSetConfig::new(&phi, h, e.margin);
                let c = cluster_of(&cfg, &origin(3)).unwrap();
                assert_eq!(!c.finite, h <= b, "sample {i} at h={h}");
            }
        }
    }

    #[test]
    fn crossing_bottleneck_agrees_with_labels() {
        let e = base();
        let phi = Sampler::new(&e.domain().unwrap()).sample(8, 0);
        let b = crossing_bottleneck(&phi);
        let crosses = |h: f64| {
            let cfg = LevelSetConfig::new(&phi, h, 0);
            let cs = cfg.clusters();
            let stride = phi.domain.strides()[0];
            let side = phi.domain.shape()[0];
            cs.clusters.iter().any(|c| {
                c.members.iter().any(|&i| i / stride == 0) && c.members.iter().any(|&i| i / stride == side - 1)
            })
        };
        assert!(crosses(b - 1e-9));
        assert!(!crosses(b + 1e-9));
    }

    #[test]
    fn theta_extremes_and_monotonicity() {
        let hs = [-1e6, -1.0, -0.5, 0.0, 0.5, 1.0, 1e6];
        let curves = theta_hat(&hs, &[9, 11], &base(), Execution::default()).unwrap();
        for c in &curves {
            assert_eq!(c.points[0].theta, 1.0);
            assert_eq!(c.points.last().unwrap().theta, 0.0);
            assert!(c.points.windows(2).all(|w| w[0].theta >= w[1].theta));
        }
    }

    #[test]
    fn execution_modes_agree() {
        let hs = [0.0, 0.3];
        let a = theta_hat(&hs, &[9], &base(), Execution::Sequential).unwrap();
        let b = theta_hat(&hs, &[9], &base(), Execution::Parallel).unwrap();
        assert_eq!(a[0].points[1].theta, b[0].points[1].theta);
        let s = estimate_h_star(&base(), Execution::Sequential).unwrap();
        assert_eq!(s, estimate_h_star(&base(), Execution::Parallel).unwrap());
        assert!(s.ci_lo <= s.estimate && s.estimate <= s.ci_hi);
    }
}
