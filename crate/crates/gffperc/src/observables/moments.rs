use super::{Ensemble, LevelSetConfig};
use crate::lattice::VertexSet;
use crate::par::Execution;
use crate::stats::{Accumulator, Estimate};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest source set for the inclusion–exclusion reconstruction.
const MAX_SOURCES: usize = 12;

/// Cluster-size moments and connection probabilities at one level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterMoments {
    pub h: f64,
    /// `E[|C_o| 1{finite}]`.
    pub chi: Estimate,
    /// `E[|C_o|^{-1} 1{finite}]`, with an empty cluster contributing zero.
    pub kappa: Estimate,
    /// The same quantity conditioned on the origin being open.
    pub kappa_given_open: Estimate,
    pub origin_open: Estimate,
    /// `P[o open, C_o finite]`.
    pub origin_open_finite: Estimate,
    /// `P[C_X connected and finite]`.
    pub tau_finite: Estimate,
    /// `P[C_X connected]`.
    pub tau: Estimate,
    /// `τ^f_X` plus the inclusion–exclusion expression for `P[every x ∈ X reaches the shell]`.
    pub tau_reconstructed: Estimate,
    /// Per-sample `τ − τ_rec`.
    pub residual: Estimate,
    /// Samples in which at most one shell-reaching cluster meets `X`.
    pub single_shell_samples: u64,
    /// Largest `|τ − τ_rec|` over those samples; the identity makes it zero.
    pub single_shell_max_residual: f64,
}

#[derive(Clone, Default)]
struct Acc {
    chi: Accumulator,
    kappa: Accumulator,
    open: Accumulator,
    open_finite: Accumulator,
    tau_f: Accumulator,
    tau: Accumulator,
    tau_rec: Accumulator,
    residual: Accumulator,
    /// `Σ κ_i · open_i`, for the ratio's delta-method error.
    cross: f64,
    single: u64,
    single_max: f64,
}

impl Acc {
    fn merge(&mut self, o: Acc) {
        for (a, b) in [
            (&mut self.chi, &o.chi),
            (&mut self.kappa, &o.kappa),
            (&mut self.open, &o.open),
            (&mut self.open_finite, &o.open_finite),
            (&mut self.tau_f, &o.tau_f),
            (&mut self.tau, &o.tau),
            (&mut self.tau_rec, &o.tau_rec),
            (&mut self.residual, &o.residual),
        ] {
            a.merge(b);
        }
        self.cross += o.cross;
        self.single += o.single;
        self.single_max = self.single_max.max(o.single_max);
    }
}

/// `χ`, both `κ` conventions and `τ_X`, `τ^f_X` at level `h`.
pub fn chi_kappa_tau(h: f64, x: &VertexSet, e: &Ensemble, exec: Execution) -> Result<ClusterMoments> {
    if x.is_empty() || x.len() > MAX_SOURCES {
        return Err(Error::precondition(format!("source set size must lie in 1..={MAX_SOURCES}")));
    }
    let d = e.d;
    let o = vec![0i64; d];
    let xs = x.to_vec();
    let acc = e.fold(
        exec,
        Acc::default,
        |acc, _, phi| {
            let cfg = LevelSetConfig::new(phi, h, e.margin);
            cfg.seeds(x)?;
            let cs = cfg.clusters();
            let dom = cfg.domain();
            let label = |p: &[i64]| cs.label_of(dom.index(p).unwrap());

            let (size, finite) = match label(&o) {
                Some(l) => {
                    let c = &cs.clusters[l as usize];
                    (c.members.len() as f64, !c.reaches_shell(e.margin))
                }
                None => (0.0, true),
            };
            let open = f64::from(u8::from(size > 0.0));
            let kappa = if finite && size > 0.0 { 1.0 / size } else { 0.0 };
            acc.chi.push(if finite { size } else { 0.0 });
            acc.kappa.push(kappa);
            acc.open.push(open);
            acc.open_finite.push(f64::from(u8::from(finite && size > 0.0)));
            acc.cross += kappa * open;

            let labels: Vec<Option<u32>> = xs.iter().map(|p| label(p)).collect();
            let reaches = |l: Option<u32>| l.is_some_and(|l| cs.clusters[l as usize].reaches_shell(e.margin));
            let connected = labels[0].is_some() && labels.iter().all(|l| *l == labels[0]);
            let tau = f64::from(u8::from(connected));
            let tau_f = f64::from(u8::from(connected && !reaches(labels[0])));
            // min over X of 1{x reaches the shell} as an alternating sum of maxima
            let mut all_reach = 0.0;
            for mask in 1u32..(1 << xs.len()) {
                let any = (0..xs.len()).any(|j| mask >> j & 1 == 1 && reaches(labels[j]));
                let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
                all_reach += sign * f64::from(u8::from(any));
            }
            let rec = tau_f + all_reach;
            acc.tau.push(tau);
            acc.tau_f.push(tau_f);
            acc.tau_rec.push(rec);
            acc.residual.push(tau - rec);
            let mut shell: Vec<u32> = labels.iter().flatten().copied().filter(|&l| reaches(Some(l))).collect();
            shell.sort_unstable();
            shell.dedup();
            if shell.len() <= 1 {
                acc.single += 1;
                acc.single_max = acc.single_max.max((tau - rec).abs());
            }
            Ok(())
        },
        |a, b| a.merge(b),
    )?;

    let n = acc.open.count as f64;
    let p_open = acc.open.mean();
    let ratio = if p_open > 0.0 { acc.kappa.mean() / p_open } else { 0.0 };
    let ratio_err = if p_open > 0.0 && n > 1.0 {
        // delta method for mean(a)/mean(b)
        let cov = (acc.cross - n * acc.kappa.mean() * p_open) / (n - 1.0);
        let var = (acc.kappa.variance() - 2.0 * ratio * cov + ratio * ratio * acc.open.variance()) / (p_open * p_open);
        (var.max(0.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(ClusterMoments {
        h,
        chi: (&acc.chi).into(),
        kappa: (&acc.kappa).into(),
        kappa_given_open: Estimate { mean: ratio, stderr: ratio_err, samples: acc.open.count },
        origin_open: (&acc.open).into(),
        origin_open_finite: (&acc.open_finite).into(),
        tau_finite: (&acc.tau_f).into(),
        tau: (&acc.tau).into(),
        tau_reconstructed: (&acc.tau_rec).into(),
        residual: (&acc.residual).into(),
        single_shell_samples: acc.single,
        single_shell_max_residual: acc.single_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(samples: u64) -> Ensemble {
        Ensemble { d: 3, side: 11, margin: 1, samples, seed: 21 }
    }

    #[test]
    fn closed_everywhere_gives_zeros() {
        let x = VertexSet::from_points(3, [vec![0, 0, 0], vec![1, 0, 0]]).unwrap();
        let m = chi_kappa_tau(1e6, &x, &e(20), Execution::default()).unwrap();
        assert_eq!(m.chi.mean, 0.0);
        assert_eq!(m.tau_finite.mean, 0.0);
        assert_eq!(m.tau.mean, 0.0);
    }

    #[test]
    fn singleton_tau_finite_is_open_and_finite() {
        let x = crate::observables::origin(3);
        let m = chi_kappa_tau(0.3, &x, &e(200), Execution::default()).unwrap();
        assert_eq!(m.tau_finite.mean, m.origin_open_finite.mean);
        assert!(m.kappa_given_open.mean >= m.kappa.mean);
    }

    #[test]
    fn reconstruction_is_exact_when_one_shell_cluster_meets_x() {
        let x = VertexSet::from_points(3, [vec![0, 0, 0], vec![2, 0, 0], vec![0, -2, 1]]).unwrap();
        for h in [-0.5, 0.0, 0.5] {
            let m = chi_kappa_tau(h, &x, &e(200), Execution::default()).unwrap();
            assert_eq!(m.single_shell_max_residual, 0.0);
            assert!(m.residual.mean.abs() <= 3.0 * m.residual.stderr + 1e-12);
        }
    }
}
