//! Multi-scale coarse graining of a finite cluster into bad and very-bad
//! boxes, the local events behind them, and brute-force checks of the
//! combinatorial lemmas the construction relies on.
//!
//! Boxes follow [`LBox`]: `B = z + [0, L)^d`, `U = z + [−L, 2L)^d`,
//! `D = z + [−3L, 4L)^d`. The field is killed outside its domain, so sites off
//! the domain are closed in every excursion set and the harmonic part `ξ`
//! vanishes there. Evaluating an event on a box that sticks out of the domain
//! is therefore exact for the killed field, not an approximation.

mod columns;
mod contract;
mod events;
mod interface;
mod local;
mod separation;
mod uniqueness;

pub use columns::{
    column_capacity_check, connected_columns_check, full_columns, ColumnCapacityReport, ConnectedColumnsReport,
};
pub use contract::{coarse_contract, ContractParams, ContractReport, ContractRow};
pub use events::{
    audit_admissibility, interface_at_scale, subcritical_events, supercritical_events, AdmissibilityAudit,
    AdmissibleEvents, BoxStatus, EventMeta, LevelEvents, Regime, ScaleInterface,
};
pub use interface::{
    audit_interface, build_interface, BoxTag, Interface, InterfaceAudit, Schedule, SegmentTrace, StepChecks,
    StepSizes, StepTrace, StopReason, TaggedBox, BOX_CAPACITY_C,
};
pub use local::{
    h_event, psi_bad, psi_very_bad, xi_bad, EventName, Harmonic, LocalEventReport, TestFamily, Witness,
};
pub use separation::{chain_separation, separates, separating_check, ChainStep, SeparationReport};
pub use uniqueness::{
    conf_check, conf_over, nslu_check, phi_good, psi_to_phi_audit, very_dense, ImplicationAudit, UniquenessParams,
};

use crate::gff::{decompose_clipped, BasisCache, FieldSample};
use crate::lattice::{boxes_hit, clusters, BoxKind, Enlargement, LBox, Point, Region, VertexSet};
use crate::observables::{cluster_of, origin, CapacityCache, LevelSetConfig};
use crate::par::Execution;
use crate::{Error, Result};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Mutex;

/// Sub-box count `M` per side and sub-box side `L₀ = ⌊L/M⌋` used to call a
/// cluster of a scale-`L` box dense: `M = min(L, ⌊L^{(d−2)/(d−1)} / ln L⌋)`,
/// with `M = 1` at `L = 1`.
pub fn dense_scale(d: usize, l: i64) -> Result<(i64, i64)> {
    if d < 2 || l < 1 {
        return Err(Error::geometry(format!("dense scale needs d ≥ 2 and L ≥ 1, got d = {d}, L = {l}")));
    }
    if l == 1 {
        return Ok((1, 1));
    }
    let lf = l as f64;
    let m = ((lf.powf((d as f64 - 2.0) / (d as f64 - 1.0)) / lf.ln()).floor() as i64).min(l);
    if m < 1 {
        return Err(Error::geometry(format!("scale L = {l} in d = {d} gives M = 0 sub-boxes")));
    }
    Ok((m, l / m))
}

/// `{base + shift ≥ h}` on `region`; `base` is indexed by the domain and
/// sites off the domain are closed.
pub(crate) fn excursion(
    domain: &Region,
    region: &Region,
    h: f64,
    value: impl Fn(usize, &[i64]) -> f64,
) -> Vec<bool> {
    let mut x = vec![0i64; region.dim()];
    (0..region.len())
        .map(|k| {
            region.point_into(k, &mut x);
            domain.index(&x).is_some_and(|i| value(i, &x) >= h)
        })
        .collect()
}

/// One point of each dense cluster of `mask` (indexed by `b`'s region): the
/// cluster meets at least `¾M^d` of the `M^d` sub-boxes of side `L₀` tiling
/// the corner of `b`, and has ℓ∞ diameter at least `L/5`.
pub(crate) fn dense_clusters(b: &LBox, mask: &[bool]) -> Result<Vec<Point>> {
    let d = b.dim();
    let (m, l0) = dense_scale(d, b.scale)?;
    let need = (0.75 * (m as f64).powi(d as i32)).ceil() as usize;
    let region = b.region();
    let cs = clusters(&region, mask);
    let mut out = Vec::new();
    let mut x = vec![0i64; d];
    for c in &cs.clusters {
        if (c.diameter as f64) < b.scale as f64 / 5.0 {
            continue;
        }
        let mut met = HashSet::new();
        for &k in &c.members {
            region.point_into(k, &mut x);
            let mut code = 0i64;
            let mut inside = true;
            for j in 0..d {
                let q = (x[j] - b.anchor[j]) / l0;
                inside &= q < m;
                code = code * m + q;
            }
            if inside {
                met.insert(code);
            }
        }
        if met.len() >= need {
            out.push(region.point(c.members[0]));
        }
    }
    Ok(out)
}

/// Union of the vertices of `boxes`.
pub(crate) fn box_union<'b>(d: usize, boxes: impl IntoIterator<Item = &'b LBox>) -> VertexSet {
    let mut out = VertexSet::new(d);
    for b in boxes {
        for p in b.region().points() {
            out.insert(p).expect("box dimension matches");
        }
    }
    out
}

/// `cap(A) = cap(∂A)`, since a walk from outside enters `A` through its
/// inner boundary; the flag marks a random-walk estimate.
pub(crate) fn set_capacity(caps: &CapacityCache, set: &VertexSet) -> Result<(f64, bool)> {
    if set.is_empty() {
        return Ok((0.0, false));
    }
    caps.with_fallback(&set.inner_boundary())
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct DenseSummary {
    pub count: usize,
    /// Dense clusters disjoint from the source cluster.
    pub outside: usize,
}

/// One configuration seen by the coarse-graining engine: the field, the level
/// and the open cluster of the sources.
pub struct CoarseConfig<'a> {
    phi: &'a FieldSample,
    h: f64,
    enl: Enlargement,
    open: Vec<bool>,
    cluster: VertexSet,
    in_cluster: Vec<bool>,
    finite: bool,
    pub exec: Execution,
    bases: BasisCache,
    xi_sup: Mutex<HashMap<LBox, f64>>,
    dense: Mutex<HashMap<LBox, DenseSummary>>,
}

impl<'a> CoarseConfig<'a> {
    /// The cluster of the origin.
    pub fn new(phi: &'a FieldSample, h: f64, margin: usize, enl: Enlargement) -> Result<Self> {
        Self::with_sources(phi, h, margin, enl, &origin(phi.domain.dim()))
    }

    pub fn with_sources(phi: &'a FieldSample, h: f64, margin: usize, enl: Enlargement, x: &VertexSet) -> Result<Self> {
        enl.validate()?;
        let level = LevelSetConfig::new(phi, h, margin);
        let c = cluster_of(&level, x)?;
        let mut in_cluster = vec![false; phi.domain.len()];
        for &i in &c.members {
            in_cluster[i] = true;
        }
        Ok(CoarseConfig {
            phi,
            h,
            enl,
            open: level.open().to_vec(),
            cluster: c.vertex_set(&phi.domain),
            in_cluster,
            finite: c.finite,
            exec: Execution::default(),
            bases: BasisCache::default(),
            xi_sup: Mutex::new(HashMap::new()),
            dense: Mutex::new(HashMap::new()),
        })
    }

    pub fn field(&self) -> &FieldSample {
        self.phi
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn domain(&self) -> &Region {
        &self.phi.domain
    }

    pub fn enlargement(&self) -> &Enlargement {
        &self.enl
    }

    pub fn bases(&self) -> &BasisCache {
        &self.bases
    }

    /// `C_o(h)`, empty when the origin is closed.
    pub fn cluster(&self) -> &VertexSet {
        &self.cluster
    }

    /// The cluster stays away from the margin shell.
    pub fn is_finite(&self) -> bool {
        self.finite
    }

    /// ℓ∞ diameter of the cluster, 0 when empty.
    pub fn diameter(&self) -> u64 {
        self.cluster.diameter(crate::lattice::Metric::LInf).unwrap_or(0)
    }

    pub fn in_cluster(&self, x: &[i64]) -> bool {
        self.domain().index(x).is_some_and(|i| self.in_cluster[i])
    }

    pub fn is_open(&self, x: &[i64]) -> bool {
        self.domain().index(x).is_some_and(|i| self.open[i])
    }

    /// `C_o(h, L)`: the scale-`L` boxes meeting the cluster.
    pub fn coarse_cluster(&self, l: i64) -> BTreeSet<LBox> {
        boxes_hit(&self.cluster, l)
    }

    /// `∂C_o(h)`: cluster sites with a neighbour outside it.
    pub fn cluster_boundary(&self) -> VertexSet {
        self.cluster.inner_boundary()
    }

    pub(crate) fn open_mask(&self, region: &Region) -> Vec<bool> {
        excursion(self.domain(), region, 0.5, |i, _| if self.open[i] { 1.0 } else { 0.0 })
    }

    /// `max_D |ξ^B|` for the decomposition around `b`.
    pub fn xi_sup(&self, b: &LBox) -> Result<f64> {
        if let Some(&v) = self.xi_sup.lock().unwrap().get(b) {
            return Ok(v);
        }
        let dec = decompose_clipped(self.phi, b, &self.enl, &self.bases)?;
        let dbox = b.kind(BoxKind::D, &self.enl);
        let sup = match dbox.intersect(self.domain()) {
            Some(r) => r
                .points()
                .map(|p| dec.xi[self.domain().index(&p).unwrap()].abs())
                .fold(0.0, f64::max),
            None => 0.0,
        };
        self.xi_sup.lock().unwrap().insert(b.clone(), sup);
        Ok(sup)
    }

    pub(crate) fn dense(&self, b: &LBox) -> Result<DenseSummary> {
        if let Some(&s) = self.dense.lock().unwrap().get(b) {
            return Ok(s);
        }
        let reps = dense_clusters(b, &self.open_mask(&b.region()))?;
        let outside = reps.iter().filter(|p| !self.in_cluster(p)).count();
        let s = DenseSummary { count: reps.len(), outside };
        self.dense.lock().unwrap().insert(b.clone(), s);
        Ok(s)
    }

    /// `{φ ≥ h} ∩ U` has a cluster of ℓ∞ diameter at least `L/5`.
    pub(crate) fn has_wide_cluster_in_u(&self, b: &LBox) -> bool {
        let u = b.kind(BoxKind::U, &self.enl);
        let cs = clusters(&u, &self.open_mask(&u));
        cs.clusters.iter().any(|c| c.diameter as f64 >= b.scale as f64 / 5.0)
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::gff::{FieldSample, Sampler};
    use crate::lattice::Region;

    pub fn sample(side: usize, seed: u64, index: u64) -> FieldSample {
        Sampler::new(&Region::centered(3, side).unwrap()).sample(seed, index)
    }

    /// A field on the centred cube with prescribed values.
    pub fn field(d: usize, side: usize, f: impl Fn(&[i64]) -> f64) -> FieldSample {
        let domain = Region::centered(d, side).unwrap();
        let values = domain.points().map(|p| f(&p)).collect();
        FieldSample { domain, values, seed: 0, index: 0, sampler: "test".into() }
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::field;
    use super::*;

    #[test]
    fn dense_scale_values() {
        assert_eq!(dense_scale(3, 1).unwrap(), (1, 1));
        assert_eq!(dense_scale(3, 2).unwrap(), (2, 1));
        assert_eq!(dense_scale(3, 8).unwrap(), (1, 8));
        assert!(dense_scale(2, 4).is_err());
        assert!(dense_scale(3, 0).is_err());
    }

    #[test]
    fn dense_cluster_needs_width() {
        let b = LBox::new(4, vec![0, 0, 0]).unwrap();
        let mut mask = vec![false; 64];
        mask[0] = true;
        assert!(dense_clusters(&b, &mask).unwrap().is_empty());
        mask[1] = true;
        assert_eq!(dense_clusters(&b, &mask).unwrap().len(), 1);
        // at L = 2 the eight unit sub-boxes must mostly be met
        let b2 = LBox::new(2, vec![0, 0, 0]).unwrap();
        assert!(dense_clusters(&b2, &[true, true, false, false, false, false, false, false]).unwrap().is_empty());
        assert_eq!(dense_clusters(&b2, &[true; 8]).unwrap().len(), 1);
    }

    #[test]
    fn config_tracks_origin_cluster() {
        // open slab x₀ ∈ {0, 1} inside a 9³ box, closed elsewhere
        let phi = field(3, 9, |p| if (0..=1).contains(&p[0]) && p[1].abs() <= 2 && p[2].abs() <= 2 { 1.0 } else { -1.0 });
        let cfg = CoarseConfig::new(&phi, 0.0, 1, Enlargement::compact()).unwrap();
        assert!(cfg.is_finite());
        assert_eq!(cfg.cluster().len(), 2 * 5 * 5);
        assert_eq!(cfg.diameter(), 4);
        assert!(cfg.in_cluster(&[1, 2, -2]));
        assert!(!cfg.in_cluster(&[2, 0, 0]));
        assert_eq!(cfg.coarse_cluster(4).len(), 4);
    }

    #[test]
    fn xi_vanishes_when_enlargement_covers_domain() {
        let phi = super::testutil::sample(9, 3, 0);
        let cfg = CoarseConfig::new(&phi, 10.0, 1, Enlargement::compact()).unwrap();
        let b = LBox::new(4, vec![0, 0, 0]).unwrap();
        assert_eq!(cfg.xi_sup(&b).unwrap(), 0.0);
        let small = LBox::new(1, vec![2, 2, 2]).unwrap();
        assert!(cfg.xi_sup(&small).unwrap() > 0.0);
    }
}
