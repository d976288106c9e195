//! Level-set observables and their Monte Carlo estimators.
//!
//! Everything lives on a finite box with zero boundary condition. A cluster
//! counts as infinite when it reaches the shell of sites within `margin` of
//! the domain edge.

mod decay;
mod density;
mod moments;

pub use decay::{bin_of, decay_curves, event_an, CapacityCache, DecayCurve, DecayRow, EventAN, VolumeRow};
pub use density::{bottleneck_to_shell, crossing_bottleneck, estimate_h_star, theta_hat, HStarEstimate, ThetaCurve, ThetaPoint};
pub use moments::{chi_kappa_tau, ClusterMoments};

use crate::gff::{FieldSample, Sampler};
use crate::lattice::{clusters, flood, ClusterSet, Point, Region, VertexSet};
use crate::par::{self, Execution};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::cell::OnceCell;

/// Monte Carlo setup shared by the estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub d: usize,
    /// Side of the centred cubic domain; the origin is its middle site when odd.
    pub side: usize,
    pub margin: usize,
    pub samples: u64,
    pub seed: u64,
}

impl Ensemble {
    pub fn domain(&self) -> Result<Region> {
        if 2 * self.margin + 3 > self.side {
            return Err(Error::precondition(format!(
                "margin {} leaves no interior in a domain of side {}",
                self.margin, self.side
            )));
        }
        Region::centered(self.d, self.side)
    }

    /// Folds `step(acc, sample_index, field)` over the samples in a
    /// reproducible merge order.
    pub(crate) fn fold<A, I, S, M>(&self, exec: Execution, init: I, step: S, merge: M) -> Result<A>
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        S: Fn(&mut A, u64, &FieldSample) -> Result<()> + Sync + Send,
        M: Fn(&mut A, A),
    {
        let sampler = Sampler::new(&self.domain()?);
        let out = par::fold(
            exec,
            self.samples as usize,
            par::DEFAULT_CHUNK,
            || (init(), None::<Error>),
            |(acc, err), i| {
                if err.is_none() {
                    let phi = sampler.sample(self.seed, i as u64);
                    if let Err(e) = step(acc, i as u64, &phi) {
                        *err = Some(e);
                    }
                }
            },
            |(total, terr), (part, perr)| {
                if terr.is_none() {
                    *terr = perr;
                }
                merge(total, part);
            },
        );
        match out {
            (_, Some(e)) => Err(e),
            (acc, None) => Ok(acc),
        }
    }
}

/// The excursion set `{φ ≥ h}` of one sample.
pub struct LevelSetConfig<'a> {
    pub phi: &'a FieldSample,
    pub h: f64,
    pub margin: usize,
    open: Vec<bool>,
    clusters: OnceCell<ClusterSet>,
}

impl<'a> LevelSetConfig<'a> {
    pub fn new(phi: &'a FieldSample, h: f64, margin: usize) -> Self {
        LevelSetConfig { phi, h, margin, open: phi.level_set(h), clusters: OnceCell::new() }
    }

    pub fn domain(&self) -> &Region {
        &self.phi.domain
    }

    pub fn open(&self) -> &[bool] {
        &self.open
    }

    pub fn is_open(&self, x: &[i64]) -> bool {
        self.domain().index(x).is_some_and(|i| self.open[i])
    }

    /// All clusters of the excursion set, computed on first use.
    pub fn clusters(&self) -> &ClusterSet {
        self.clusters.get_or_init(|| clusters(self.domain(), &self.open))
    }

    fn in_shell(&self, idx: usize) -> bool {
        self.domain().depth(idx) <= self.margin
    }

    fn seeds(&self, x: &VertexSet) -> Result<Vec<usize>> {
        x.iter()
            .map(|p| {
                self.domain()
                    .index(p)
                    .filter(|&i| !self.in_shell(i))
                    .ok_or_else(|| Error::geometry(format!("{p:?} is not inside the margin")))
            })
            .collect()
    }
}

/// `C_X`: the union of the open clusters meeting `X`.
#[derive(Clone, Debug)]
pub struct ClusterOf {
    /// Sorted flat indices in the configuration's domain.
    pub members: Vec<usize>,
    /// No cluster meeting `X` reaches the shell.
    pub finite: bool,
}

impl ClusterOf {
    pub fn vertex_set(&self, domain: &Region) -> VertexSet {
        VertexSet::from_indices(domain, self.members.iter().copied())
    }
}

/// Full `C_X` with its finiteness flag.
pub fn cluster_of(cfg: &LevelSetConfig, x: &VertexSet) -> Result<ClusterOf> {
    let seeds = cfg.seeds(x)?;
    let f = flood(cfg.domain(), &cfg.open, &seeds, |_| false);
    let finite = !f.members.iter().any(|&i| cfg.in_shell(i));
    Ok(ClusterOf { members: f.members, finite })
}

/// `C_X` if finite; stops growing as soon as the shell is reached.
pub fn finite_cluster_of(cfg: &LevelSetConfig, x: &VertexSet) -> Result<Option<ClusterOf>> {
    let seeds = cfg.seeds(x)?;
    let f = flood(cfg.domain(), &cfg.open, &seeds, |i| cfg.in_shell(i));
    Ok((!f.stopped).then_some(ClusterOf { members: f.members, finite: true }))
}

/// The origin as a one-point source set.
pub fn origin(d: usize) -> VertexSet {
    let o: Point = vec![0; d];
    VertexSet::from_points(d, [o]).expect("dimension matches")
}
