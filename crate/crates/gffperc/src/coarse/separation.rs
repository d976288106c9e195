use super::events::{interface_at_scale, AdmissibleEvents};
use super::interface::Interface;
use super::{box_union, set_capacity, CoarseConfig};
use crate::lattice::{flood, LBox, Region, VertexSet};
use crate::observables::{bin_of, CapacityCache};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Every path from `from ∖ x` to infinity meets `x`. Decided by a flood fill
/// inside the bounding box of both sets grown by one layer: past that layer
/// everything is connected to infinity without meeting `x`.
pub fn separates(from: &VertexSet, x: &VertexSet) -> Result<bool> {
    let Some(bound) = from.union(x).bounding_region() else {
        return Ok(true);
    };
    let region = Region::new(bound.lo().iter().map(|c| c - 1).collect(), bound.shape().iter().map(|s| s + 2).collect())?;
    let mask: Vec<bool> = region.points().map(|p| !x.contains(&p)).collect();
    let seeds: Vec<usize> = from.iter().filter(|p| !x.contains(p)).filter_map(|p| region.index(p)).collect();
    Ok(!flood(&region, &mask, &seeds, |i| region.depth(i) == 0).stopped)
}

/// `∂C_o(h)` restricted to the union of `boxes`.
fn boundary_in(cfg: &CoarseConfig, boxes: &BTreeSet<LBox>) -> VertexSet {
    let mut out = VertexSet::new(cfg.domain().dim());
    for p in cfg.cluster_boundary().iter() {
        if boxes.iter().any(|b| b.contains_point(p)) {
            out.insert(p.clone()).expect("dimension matches");
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub scale: i64,
    /// `X = VB(L) ∪ (∂C_o(h) ∩ B(L))` separates `C_o(h)` from infinity.
    pub separated: bool,
    pub x_size: usize,
    pub cap_x: f64,
    pub cap_cluster: f64,
    /// `N/2d` for the bracket `N` of the closure capacity.
    pub target: f64,
    /// Some capacity above is a random-walk estimate.
    pub estimated: bool,
}

pub fn separating_check(
    cfg: &CoarseConfig,
    events: &dyn AdmissibleEvents,
    l: i64,
    caps: &CapacityCache,
) -> Result<SeparationReport> {
    if !cfg.is_finite() {
        return Err(Error::precondition("separation needs a finite cluster"));
    }
    if cfg.diameter() < l as u64 {
        return Err(Error::precondition(format!("cluster diameter {} is below the scale {l}", cfg.diameter())));
    }
    let si = interface_at_scale(cfg, events, l)?;
    let x = box_union(cfg.domain().dim(), &si.very_bad).union(&boundary_in(cfg, &si.bad));
    let (cap_x, e1) = set_capacity(caps, &x)?;
    let (cap_cluster, e2) = set_capacity(caps, cfg.cluster())?;
    let (closure, e3) = caps.with_fallback(&cfg.cluster().closure())?;
    let d = cfg.domain().dim() as f64;
    Ok(SeparationReport {
        scale: l,
        separated: separates(cfg.cluster(), &x)?,
        x_size: x.len(),
        cap_x,
        cap_cluster,
        target: bin_of(closure) as f64 / (2.0 * d),
        estimated: e1 || e2 || e3,
    })
}

/// One step of an interface trace with its separating set
/// `X = ∪ VB′ so far ∪ (∂C_o(h) ∩ B′)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub segment: usize,
    pub k: u32,
    pub separated: bool,
    pub x_size: usize,
    pub cap_x: f64,
    pub estimated: bool,
}

/// The multi-scale separation audit along an interface trace.
pub fn chain_separation(cfg: &CoarseConfig, iface: &Interface, caps: &CapacityCache) -> Result<Vec<ChainStep>> {
    let d = cfg.domain().dim();
    let mut vb: BTreeSet<LBox> = BTreeSet::new();
    let mut out = Vec::new();
    for (segment, t) in iface.steps() {
        vb.extend(t.vb_boxes.iter().cloned());
        let b: BTreeSet<LBox> = t.b_boxes.iter().cloned().collect();
        let x = box_union(d, &vb).union(&boundary_in(cfg, &b));
        let (cap_x, estimated) = set_capacity(caps, &x)?;
        out.push(ChainStep {
            segment,
            k: t.k,
            separated: separates(cfg.cluster(), &x)?,
            x_size: x.len(),
            cap_x,
            estimated,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse::testutil::{field, sample};
    use crate::coarse::{build_interface, subcritical_events, supercritical_events, Schedule};
    use crate::lattice::Enlargement;
    use crate::potential::FreeGreen;

    fn set(pts: &[[i64; 2]]) -> VertexSet {
        VertexSet::from_points(2, pts.iter().map(|p| p.to_vec())).unwrap()
    }

    #[test]
    fn ring_separates_and_gap_does_not() {
        let inside = set(&[[0, 0]]);
        let ring: Vec<[i64; 2]> = (-1..=1).flat_map(|a| (-1..=1).map(move |b| [a, b])).filter(|p| p != &[0, 0]).collect();
        // diagonals are not lattice edges, so the plus shape suffices
        assert!(separates(&inside, &set(&[[1, 0], [-1, 0], [0, 1], [0, -1]])).unwrap());
        assert!(separates(&inside, &set(&ring)).unwrap());
        assert!(!separates(&inside, &set(&[[1, 0], [-1, 0], [0, 1]])).unwrap());
        assert!(!separates(&inside, &VertexSet::new(2)).unwrap());
        assert!(separates(&inside, &inside).unwrap());
    }

    #[test]
    fn all_very_bad_boundary_separates() {
        let green = FreeGreen::new(3, 1e-10).unwrap();
        let caps = CapacityCache::new(&green);
        let phi = field(3, 11, |p| if p.iter().all(|c| c.abs() <= 1) { 1.0 } else { -1.0 });
        let cfg = CoarseConfig::new(&phi, 0.0, 2, Enlargement::compact()).unwrap();
        let ev = supercritical_events(0.0, 10.0, None).unwrap();
        let r = separating_check(&cfg, &ev, 1, &caps).unwrap();
        assert!(r.separated);
        assert_eq!(r.x_size, 27);
        assert!((r.cap_x - r.cap_cluster).abs() < 1e-9);
        assert!(r.cap_x >= r.target);
        assert!(separating_check(&cfg, &ev, 4, &caps).is_err());
    }

    #[test]
    fn sampled_configurations_are_separated_at_every_scale() {
        let green = FreeGreen::new(3, 1e-10).unwrap();
        let caps = CapacityCache::new(&green);
        let mut checked = 0;
        for i in 0..200 {
            let phi = sample(15, 41, i);
            for (h, sup) in [(0.0, true), (0.2, true), (0.6, false)] {
                let cfg = CoarseConfig::new(&phi, h, 1, Enlargement::compact()).unwrap();
                if !cfg.is_finite() || cfg.cluster().is_empty() {
                    continue;
                }
                let ev = if sup { supercritical_events(h, 0.2, None) } else { subcritical_events(h, 0.2, None) }.unwrap();
                for l in [1, 2, 4] {
                    if cfg.diameter() < l as u64 {
                        continue;
                    }
                    let r = separating_check(&cfg, &ev, l, &caps).unwrap();
                    assert!(r.separated, "h = {h}, L = {l}: {r:?}");
                    assert!(r.cap_x >= r.cap_cluster - 1e-6 || r.estimated, "{r:?}");
                    checked += 1;
                }
                let (cap, _) = caps.with_fallback(&cfg.cluster().closure()).unwrap();
                if let Ok(iface) = build_interface(&cfg, &ev, &Schedule::desk(3), bin_of(cap), &caps) {
                    for s in chain_separation(&cfg, &iface, &caps).unwrap() {
                        assert!(s.separated, "{s:?}");
                    }
                }
            }
        }
        assert!(checked > 0);
    }
}
