use super::CoarseConfig;
use crate::lattice::{coarse_inner_boundary, LBox};
use crate::par;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Supercritical,
    Subcritical,
}

/// Which of the two events happen on one box.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxStatus {
    pub bad: bool,
    pub very_bad: bool,
}

impl BoxStatus {
    pub fn any(&self) -> bool {
        self.bad || self.very_bad
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventMeta {
    pub name: String,
    pub regime: Regime,
    pub h: f64,
    pub eps0: f64,
}

/// A pair of box events `(E_b, E_vb)` at every scale. Evaluation must be a
/// pure function of the configuration.
pub trait AdmissibleEvents: Sync {
    fn meta(&self) -> &EventMeta;
    fn evaluate(&self, cfg: &CoarseConfig, b: &LBox) -> Result<BoxStatus>;
}

/// The two built-in families, driven by `{φ ≥ h}` and the harmonic part.
#[derive(Clone, Debug)]
pub struct LevelEvents {
    meta: EventMeta,
}

fn level_events(name: &str, regime: Regime, h: f64, eps0: f64, h_star: Option<f64>) -> Result<LevelEvents> {
    if !(eps0 > 0.0) {
        return Err(Error::precondition(format!("ε₀ must be positive, got {eps0}")));
    }
    if let Some(s) = h_star {
        let wrong = match regime {
            Regime::Supercritical => h >= s,
            Regime::Subcritical => h <= s,
        };
        if wrong {
            log::warn!("{name} events at h = {h} on the wrong side of the h_* estimate {s}");
        }
    }
    Ok(LevelEvents { meta: EventMeta { name: name.into(), regime, h, eps0 } })
}

/// Bad: `B` and its neighbours hold dense clusters, one dense cluster of `B`
/// misses `C_o(h)`, and `B` is `(ξ, ε₀)`-good. Very bad: some box among `B`
/// and its neighbours has no dense cluster, or every dense cluster of `B`
/// lies in `C_o(h)` while a neighbour has one outside it, or `B` is
/// `(ξ, ε₀)`-bad.
pub fn supercritical_events(h: f64, eps0: f64, h_star: Option<f64>) -> Result<LevelEvents> {
    level_events("supercritical", Regime::Supercritical, h, eps0, h_star)
}

/// `E_B`: `{φ ≥ h} ∩ U` has a cluster of diameter `L/5`; bad when `B` is
/// also `(ξ, ε₀)`-good, very bad when it is `(ξ, ε₀)`-bad.
pub fn subcritical_events(h: f64, eps0: f64, h_star: Option<f64>) -> Result<LevelEvents> {
    level_events("subcritical", Regime::Subcritical, h, eps0, h_star)
}

impl AdmissibleEvents for LevelEvents {
    fn meta(&self) -> &EventMeta {
        &self.meta
    }

    fn evaluate(&self, cfg: &CoarseConfig, b: &LBox) -> Result<BoxStatus> {
        if cfg.h() != self.meta.h {
            return Err(Error::precondition(format!(
                "events built for h = {} applied to a configuration at h = {}",
                self.meta.h,
                cfg.h()
            )));
        }
        let eps0 = self.meta.eps0;
        match self.meta.regime {
            Regime::Supercritical => {
                let here = cfg.dense(b)?;
                let mut all_dense = here.count > 0;
                let mut nbr_outside = false;
                for n in b.neighbors() {
                    let s = cfg.dense(&n)?;
                    all_dense &= s.count > 0;
                    nbr_outside |= s.outside > 0;
                }
                let xi_good = cfg.xi_sup(b)? < eps0;
                let b2 = here.outside > 0;
                let vb2 = here.outside == 0 && nbr_outside;
                Ok(BoxStatus { bad: all_dense && b2 && xi_good, very_bad: !all_dense || vb2 || !xi_good })
            }
            Regime::Subcritical => {
                if !cfg.has_wide_cluster_in_u(b) {
                    return Ok(BoxStatus::default());
                }
                let xi_good = cfg.xi_sup(b)? < eps0;
                Ok(BoxStatus { bad: xi_good, very_bad: !xi_good })
            }
        }
    }
}

fn evaluate_all(cfg: &CoarseConfig, events: &dyn AdmissibleEvents, boxes: &[LBox]) -> Result<Vec<BoxStatus>> {
    par::map(cfg.exec, boxes.len(), |i| events.evaluate(cfg, &boxes[i])).into_iter().collect()
}

/// `C_o(h, L)`, its inner boundary and the bad/very-bad boxes in it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaleInterface {
    pub scale: i64,
    pub coarse: BTreeSet<LBox>,
    pub boundary: BTreeSet<LBox>,
    pub bad: BTreeSet<LBox>,
    pub very_bad: BTreeSet<LBox>,
}

impl ScaleInterface {
    /// `I(L) = B(L) ∪ VB(L)`.
    pub fn interface(&self) -> BTreeSet<LBox> {
        self.bad.union(&self.very_bad).cloned().collect()
    }
}

fn require_finite(cfg: &CoarseConfig) -> Result<()> {
    if !cfg.is_finite() {
        return Err(Error::precondition("coarse graining needs a finite cluster; this one reaches the shell"));
    }
    Ok(())
}

pub fn interface_at_scale(cfg: &CoarseConfig, events: &dyn AdmissibleEvents, l: i64) -> Result<ScaleInterface> {
    if l < 1 {
        return Err(Error::geometry(format!("scale must be positive, got {l}")));
    }
    require_finite(cfg)?;
    let coarse = cfg.coarse_cluster(l);
    let boxes: Vec<LBox> = coarse.iter().cloned().collect();
    let status = evaluate_all(cfg, events, &boxes)?;
    let mut out = ScaleInterface { scale: l, boundary: coarse_inner_boundary(&coarse), coarse, ..Default::default() };
    for (b, s) in boxes.into_iter().zip(status) {
        if s.bad {
            out.bad.insert(b.clone());
        }
        if s.very_bad {
            out.very_bad.insert(b);
        }
    }
    Ok(out)
}

/// Exhaustive check of disjointness, initiation and propagation at one scale.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityAudit {
    pub scale: i64,
    pub scanned: usize,
    /// Initiation applies only when `L ≤ diam C_o(h)`.
    pub initiation_required: bool,
    pub disjointness_violations: Vec<LBox>,
    pub initiation_violations: Vec<LBox>,
    pub propagation_violations: Vec<(LBox, LBox)>,
}

impl AdmissibilityAudit {
    pub fn ok(&self) -> bool {
        self.disjointness_violations.is_empty()
            && self.initiation_violations.is_empty()
            && self.propagation_violations.is_empty()
    }
}

/// Scans `C_o(h, L)` and its neighbouring boxes.
pub fn audit_admissibility(cfg: &CoarseConfig, events: &dyn AdmissibleEvents, l: i64) -> Result<AdmissibilityAudit> {
    require_finite(cfg)?;
    let coarse = cfg.coarse_cluster(l);
    let mut scan: BTreeSet<LBox> = coarse.clone();
    for b in &coarse {
        scan.extend(b.neighbors());
    }
    let boxes: Vec<LBox> = scan.into_iter().collect();
    let status: BTreeMap<LBox, BoxStatus> = boxes.iter().cloned().zip(evaluate_all(cfg, events, &boxes)?).collect();
    let mut audit = AdmissibilityAudit {
        scale: l,
        scanned: boxes.len(),
        initiation_required: !coarse.is_empty() && l as u64 <= cfg.diameter(),
        ..Default::default()
    };
    for (b, s) in &status {
        if s.bad && s.very_bad {
            audit.disjointness_violations.push(b.clone());
        }
    }
    if audit.initiation_required {
        for b in coarse_inner_boundary(&coarse) {
            if !status[&b].any() {
                audit.initiation_violations.push(b);
            }
        }
    }
    for b in &coarse {
        if !status[b].bad {
            continue;
        }
        for n in b.neighbors() {
            if coarse.contains(&n) && !status[&n].any() {
                audit.propagation_violations.push((b.clone(), n));
            }
        }
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse::testutil::{field, sample};
    use crate::lattice::Enlargement;

    #[test]
    fn empty_cluster_gives_empty_interface() {
        let phi = field(3, 9, |_| -1.0);
        let cfg = CoarseConfig::new(&phi, 0.0, 1, Enlargement::compact()).unwrap();
        let ev = supercritical_events(0.0, 0.1, None).unwrap();
        let si = interface_at_scale(&cfg, &ev, 2).unwrap();
        assert!(si.coarse.is_empty() && si.interface().is_empty() && si.boundary.is_empty());
    }

    #[test]
    fn infinite_cluster_is_rejected() {
        let phi = field(3, 9, |_| 1.0);
        let cfg = CoarseConfig::new(&phi, 0.0, 1, Enlargement::compact()).unwrap();
        let ev = supercritical_events(0.0, 0.1, None).unwrap();
        assert!(matches!(interface_at_scale(&cfg, &ev, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn level_mismatch_is_rejected() {
        let phi = field(3, 9, |_| -1.0);
        let cfg = CoarseConfig::new(&phi, 0.0, 1, Enlargement::compact()).unwrap();
        let ev = subcritical_events(0.5, 0.1, None).unwrap();
        let b = LBox::new(1, vec![0, 0, 0]).unwrap();
        assert!(ev.evaluate(&cfg, &b).is_err());
        assert!(supercritical_events(0.0, 0.0, None).is_err());
    }

    #[test]
    fn unit_scale_is_all_very_bad_in_the_supercritical_family() {
        // a unit box never holds a cluster of diameter 1/5
        let phi = field(3, 11, |p| if p.iter().all(|c| c.abs() <= 1) { 1.0 } else { -1.0 });
        let cfg = CoarseConfig::new(&phi, 0.0, 2, Enlargement::compact()).unwrap();
        let ev = supercritical_events(0.0, 10.0, None).unwrap();
        let si = interface_at_scale(&cfg, &ev, 1).unwrap();
        assert_eq!(si.very_bad.len(), 27);
        assert!(si.bad.is_empty());
    }

    #[test]
    fn audits_pass_on_sampled_configurations() {
        let mut audited = [0usize; 2];
        for i in 0..60 {
            let phi = sample(15, 21, i);
            for (r, h) in [(0, 0.0), (1, 0.6)] {
                let cfg = CoarseConfig::new(&phi, h, 1, Enlargement::compact()).unwrap();
                if !cfg.is_finite() || cfg.cluster().is_empty() {
                    continue;
                }
                let ev = if r == 0 {
                    supercritical_events(h, 0.2, None).unwrap()
                } else {
                    subcritical_events(h, 0.2, None).unwrap()
                };
                for l in [1, 2, 4] {
                    let a = audit_admissibility(&cfg, &ev, l).unwrap();
                    assert!(a.ok(), "h={h} L={l}: {a:?}");
                    audited[r] += 1;
                }
            }
        }
        assert!(audited.iter().all(|&n| n > 0), "{audited:?}");
    }
}
