use super::events::{interface_at_scale, AdmissibleEvents, ScaleInterface};
use super::{box_union, set_capacity, CoarseConfig};
use crate::lattice::LBox;
use crate::observables::{bin_of, CapacityCache};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Box-capacity constant `C` in `cap(B_L) ≤ C L^{d−2}`, fitted once on
/// cubes of side up to 16 in `d = 3` and frozen here.
pub const BOX_CAPACITY_C: f64 = 7.86;

/// Iterates of `f` kept as segment budgets before the final one.
const MAX_SEGMENTS: usize = 64;

/// Parameters of the segment algorithm. Everything else is derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub d: usize,
    pub rho: f64,
    pub delta: f64,
    /// Base scale `L` entering `M` and `t`.
    pub base: i64,
    pub c_box: f64,
}

impl Schedule {
    pub fn new(d: usize, rho: f64, delta: f64, base: i64, c_box: f64) -> Result<Self> {
        let s = Schedule { d, rho, delta, base, c_box };
        s.validate()?;
        Ok(s)
    }

    /// `ρ = 3`, `δ = 1/2`, `L = 1` and the frozen box constant.
    pub fn desk(d: usize) -> Self {
        Schedule { d, rho: 3.0, delta: 0.5, base: 1, c_box: BOX_CAPACITY_C }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 3 {
            return Err(Error::precondition(format!("the schedule needs d ≥ 3, got {}", self.d)));
        }
        if !(self.rho > 0.0 && self.delta > 0.0 && self.c_box > 0.0 && self.base >= 1) {
            return Err(Error::precondition(format!(
                "schedule needs ρ, δ, C > 0 and L ≥ 1, got ρ = {}, δ = {}, C = {}, L = {}",
                self.rho, self.delta, self.c_box, self.base
            )));
        }
        let t = self.t();
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::precondition(format!("schedule gives t = {t} outside (0, 1)")));
        }
        Ok(())
    }

    /// `M = d 2^d C L^{d−2}`.
    pub fn m_const(&self) -> f64 {
        let d = self.d as f64;
        d * 2f64.powi(self.d as i32) * self.c_box * (self.base as f64).powf(d - 2.0)
    }

    /// `t = L^ρ / (2^{d+1} M)`.
    pub fn t(&self) -> f64 {
        (self.base as f64).powf(self.rho) / (2f64.powi(self.d as i32 + 1) * self.m_const())
    }

    /// `b = 3(d − 2)/ρ`.
    pub fn b(&self) -> f64 {
        3.0 * (self.d as f64 - 2.0) / self.rho
    }

    /// `f(x) = (ln x)^b`, zero for `x ≤ 1`.
    pub fn f(&self, x: f64) -> f64 {
        if x <= 1.0 {
            0.0
        } else {
            x.ln().powf(self.b())
        }
    }

    /// `N₀ = ⌈exp((4d)^{1/b})⌉`, the least `N` with `f(N) ≥ 4d`.
    pub fn threshold(&self) -> f64 {
        (4.0 * self.d as f64).powf(1.0 / self.b()).exp().ceil()
    }

    /// Segment budgets `f(N), f(f(N)), …` while they exceed `M` and keep
    /// decreasing, then `M` for the final segment.
    pub fn budgets(&self, n: u64) -> Vec<f64> {
        let m = self.m_const();
        let mut out = Vec::new();
        let mut prev = n as f64;
        let mut g = self.f(prev);
        while g > m && g < prev && out.len() < MAX_SEGMENTS {
            out.push(g);
            prev = g;
            g = self.f(g);
        }
        out.push(m);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    C1Capacity,
    C2Cardinality,
    Exhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoxTag {
    B,
    VB,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedBox {
    pub scale: i64,
    pub anchor: Vec<i64>,
    pub tag: BoxTag,
}

impl TaggedBox {
    fn new(b: &LBox, tag: BoxTag) -> Self {
        TaggedBox { scale: b.scale, anchor: b.anchor.clone(), tag }
    }

    pub fn lbox(&self) -> LBox {
        LBox { scale: self.scale, anchor: self.anchor.clone() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    /// `|I_{i,j}(2^k)|`.
    pub small: usize,
    /// `|I_{i,j}(L)|` with `L = 2^{k+1}`.
    pub large: usize,
    /// `|I′_{i,j}|`.
    pub trimmed: usize,
    pub vb: usize,
    pub b: usize,
    /// `|B(L) ∩ I′|` and `|B(2^k) ∩ I′|`.
    pub b_large: usize,
    pub b_small: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepChecks {
    /// `N / (2^d g)` and `N / g` for the segment budget `g`.
    pub lower: f64,
    pub upper: f64,
    /// `lower ≤ |I′| < upper`.
    pub bracket_ok: bool,
    /// Capacity of the union of all `VB′` so far.
    pub vb_cap: f64,
    pub vb_cap_estimated: bool,
    pub c1: bool,
    /// `|B′| ≥ lower`.
    pub segment_end: bool,
    /// `L ≥ g^{1/ρ}`.
    pub scale_ok: bool,
    pub stop: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub k: u32,
    #[serde(rename = "L")]
    pub l: i64,
    pub sizes: StepSizes,
    pub checks: StepChecks,
    pub vb_boxes: Vec<LBox>,
    pub b_boxes: Vec<LBox>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentTrace {
    pub budget: f64,
    pub steps: Vec<StepTrace>,
}

/// Output of [`build_interface`] with its full trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    pub n: u64,
    /// Capacity of the closure of the cluster.
    pub capacity: f64,
    pub diameter: u64,
    pub schedule: Schedule,
    pub segments: Vec<SegmentTrace>,
    pub stop_reason: StopReason,
    pub boxes: Vec<TaggedBox>,
    /// Desk-scale premises of the construction that did not hold.
    pub premise_failures: Vec<String>,
}

impl Interface {
    pub fn bad(&self) -> impl Iterator<Item = &TaggedBox> {
        self.boxes.iter().filter(|b| b.tag == BoxTag::B)
    }

    pub fn very_bad(&self) -> impl Iterator<Item = &TaggedBox> {
        self.boxes.iter().filter(|b| b.tag == BoxTag::VB)
    }

    pub fn steps(&self) -> impl Iterator<Item = (usize, &StepTrace)> {
        self.segments.iter().enumerate().flat_map(|(i, s)| s.steps.iter().map(move |t| (i, t)))
    }

    pub fn smallest_scale(&self) -> Option<i64> {
        self.boxes.iter().map(|b| b.scale).min()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::numeric(format!("serialising the interface: {e}")))
    }
}

/// Interfaces `I(2^k)` computed on demand.
struct Scales<'c, 'a> {
    cfg: &'c CoarseConfig<'a>,
    events: &'c dyn AdmissibleEvents,
    memo: BTreeMap<u32, ScaleInterface>,
}

impl Scales<'_, '_> {
    fn at(&mut self, k: u32) -> Result<&ScaleInterface> {
        if !self.memo.contains_key(&k) {
            let si = interface_at_scale(self.cfg, self.events, 1i64 << k)?;
            self.memo.insert(k, si);
        }
        Ok(&self.memo[&k])
    }

    /// Boxes of `I(2^k)` inside some box of `within`, or all of them.
    fn restricted(&mut self, k: u32, within: Option<&BTreeSet<LBox>>) -> Result<BTreeSet<LBox>> {
        let all = self.at(k)?.interface();
        Ok(match within {
            None => all,
            Some(w) => all.into_iter().filter(|b| w.iter().any(|p| p.contains_box(b))).collect(),
        })
    }
}

/// Runs the segment algorithm on a configuration in the `A_N` proxy:
/// finite cluster with `N − 1 ≤ cap(closure) < N`. Failed desk-scale
/// premises are recorded in the output rather than forced.
pub fn build_interface(
    cfg: &CoarseConfig,
    events: &dyn AdmissibleEvents,
    schedule: &Schedule,
    n: u64,
    caps: &CapacityCache,
) -> Result<Interface> {
    schedule.validate()?;
    let d = cfg.domain().dim();
    if schedule.d != d {
        return Err(Error::geometry(format!("schedule for d = {} applied in d = {d}", schedule.d)));
    }
    if !cfg.is_finite() || cfg.cluster().is_empty() {
        return Err(Error::precondition("the interface needs a finite nonempty cluster"));
    }
    let (capacity, _) = caps.with_fallback(&cfg.cluster().closure())?;
    if bin_of(capacity) != n {
        return Err(Error::precondition(format!("cap = {capacity} is outside [N − 1, N) for N = {n}")));
    }
    let diameter = cfg.diameter();
    let mut premise_failures = Vec::new();
    if (n as f64) < schedule.threshold() {
        premise_failures.push(format!("N = {n} is below N₀ = {}", schedule.threshold()));
    }
    let nf = n as f64;
    let c1_threshold = nf / (4.0 * d as f64);
    let budgets = schedule.budgets(n);
    let mut scales = Scales { cfg, events, memo: BTreeMap::new() };

    // 2^{k+1} ≤ diam at the first step
    let mut k_cap: Option<u32> = (diameter >= 2).then(|| diameter.ilog2() - 1);
    let mut within: Option<BTreeSet<LBox>> = None;
    let mut vb_all: BTreeSet<LBox> = BTreeSet::new();
    let mut segments: Vec<SegmentTrace> = Vec::new();
    let mut outcome: Option<(StopReason, Vec<TaggedBox>)> = None;

    'segments: for (si, &g) in budgets.iter().enumerate() {
        let last_segment = si + 1 == budgets.len();
        let upper = nf / g;
        let lower = nf / (2f64.powi(d as i32) * g);
        segments.push(SegmentTrace { budget: g, steps: Vec::new() });
        loop {
            let mut chosen = None;
            if let Some(top) = k_cap {
                for k in (0..=top).rev() {
                    let small = scales.restricted(k, within.as_ref())?;
                    if small.len() as f64 >= upper {
                        chosen = Some((k, small));
                        break;
                    }
                }
            }
            let Some((k, small)) = chosen else {
                if vb_all.is_empty() && within.is_none() {
                    let sizes: Vec<(u32, usize)> = match k_cap {
                        Some(top) => (0..=top)
                            .map(|k| scales.restricted(k, None).map(|s| (k, s.len())))
                            .collect::<Result<_>>()?,
                        None => Vec::new(),
                    };
                    return Err(Error::precondition(format!(
                        "no starting scale: N = {n}, diam = {diameter}, N/g = {upper}, |I(2^k)| by k = {sizes:?}"
                    )));
                }
                let mut boxes: Vec<TaggedBox> = vb_all.iter().map(|b| TaggedBox::new(b, BoxTag::VB)).collect();
                if let Some(w) = &within {
                    boxes.extend(w.iter().map(|b| TaggedBox::new(b, BoxTag::B)));
                }
                premise_failures.push("no admissible scale left before a stopping condition".into());
                outcome = Some((StopReason::Exhausted, boxes));
                break 'segments;
            };
            let l = 1i64 << (k + 1);
            let large = scales.restricted(k + 1, within.as_ref())?;
            let mut trimmed = large.clone();
            for b in &small {
                if trimmed.len() as f64 >= lower {
                    break;
                }
                if !large.iter().any(|p| p.contains_box(b)) {
                    trimmed.insert(b.clone());
                }
            }
            let bracket_ok = lower <= trimmed.len() as f64 && (trimmed.len() as f64) < upper;
            if !bracket_ok {
                premise_failures.push(format!(
                    "segment {} step {}: |I′| = {} outside [{lower}, {upper})",
                    si + 1,
                    segments[si].steps.len() + 1,
                    trimmed.len()
                ));
            }
            let (hi, lo) = (scales.at(k + 1)?.clone(), scales.at(k)?);
            let is_vb = |b: &LBox| if b.scale == l { hi.very_bad.contains(b) } else { lo.very_bad.contains(b) };
            let is_b = |b: &LBox| if b.scale == l { hi.bad.contains(b) } else { lo.bad.contains(b) };
            let vb: BTreeSet<LBox> = trimmed.iter().filter(|b| is_vb(b)).cloned().collect();
            let bp: BTreeSet<LBox> = trimmed.iter().filter(|b| is_b(b)).cloned().collect();
            let b_large: Vec<LBox> = bp.iter().filter(|b| b.scale == l).cloned().collect();
            let b_small: Vec<LBox> = bp.iter().filter(|b| b.scale != l).cloned().collect();
            vb_all.extend(vb.iter().cloned());
            let (vb_cap, vb_cap_estimated) = set_capacity(caps, &box_union(d, &vb_all))?;
            let c1 = vb_cap >= c1_threshold;
            let segment_end = bp.len() as f64 >= lower;
            let scale_ok = (l as f64) >= g.powf(1.0 / schedule.rho);
            let stop = c1 || (segment_end && (last_segment || scale_ok));
            segments[si].steps.push(StepTrace {
                k,
                l,
                sizes: StepSizes {
                    small: small.len(),
                    large: large.len(),
                    trimmed: trimmed.len(),
                    vb: vb.len(),
                    b: bp.len(),
                    b_large: b_large.len(),
                    b_small: b_small.len(),
                },
                checks: StepChecks {
                    lower,
                    upper,
                    bracket_ok,
                    vb_cap,
                    vb_cap_estimated,
                    c1,
                    segment_end,
                    scale_ok,
                    stop,
                },
                vb_boxes: vb.iter().cloned().collect(),
                b_boxes: bp.iter().cloned().collect(),
            });
            if c1 {
                let boxes = vb_all.iter().map(|b| TaggedBox::new(b, BoxTag::VB)).collect();
                outcome = Some((StopReason::C1Capacity, boxes));
                break 'segments;
            }
            if stop {
                let keep = if b_large.len() >= b_small.len() { b_large } else { b_small };
                let boxes = keep.iter().map(|b| TaggedBox::new(b, BoxTag::B)).collect();
                outcome = Some((StopReason::C2Cardinality, boxes));
                break 'segments;
            }
            within = Some(bp);
            k_cap = k.checked_sub(1);
            if segment_end {
                continue 'segments;
            }
        }
    }
    let (stop_reason, boxes) = outcome.expect("the final segment always stops");
    Ok(Interface {
        n,
        capacity,
        diameter,
        schedule: schedule.clone(),
        segments,
        stop_reason,
        boxes,
        premise_failures,
    })
}

/// Output contract of an interface re-derived from its trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InterfaceAudit {
    pub disjoint: bool,
    pub dyadic: bool,
    pub decreasing: bool,
    pub trace_consistent: bool,
    pub stop_consistent: bool,
    /// Recomputed `cap(∪VB)` and its target `N/4d` on a (c1) stop.
    pub c1_capacity: Option<f64>,
    /// `|B| L₁^ρ` and its target `tN` on a (c2) stop.
    pub c2_product: Option<f64>,
    pub failures: Vec<String>,
}

impl InterfaceAudit {
    pub fn ok(&self) -> bool {
        self.disjoint && self.dyadic && self.decreasing && self.trace_consistent && self.stop_consistent
    }
}

pub fn audit_interface(iface: &Interface, caps: &CapacityCache) -> Result<InterfaceAudit> {
    let s = &iface.schedule;
    let d = s.d;
    let nf = iface.n as f64;
    let mut a = InterfaceAudit { disjoint: true, dyadic: true, decreasing: true, trace_consistent: true, ..Default::default() };
    let boxes: Vec<LBox> = iface.boxes.iter().map(TaggedBox::lbox).collect();
    for (i, p) in boxes.iter().enumerate() {
        if p.scale < 1 || (p.scale & (p.scale - 1)) != 0 {
            a.dyadic = false;
            a.failures.push(format!("scale {} is not a power of two", p.scale));
        }
        for q in &boxes[i + 1..] {
            if p.region().intersect(&q.region()).is_some() {
                a.disjoint = false;
                a.failures.push(format!("{p:?} meets {q:?}"));
            }
        }
    }
    let mut last_k: Option<u32> = None;
    let mut steps = iface.steps().peekable();
    while let Some((si, t)) = steps.next() {
        if last_k.is_some_and(|k| t.k >= k) {
            a.decreasing = false;
            a.failures.push(format!("k = {} does not decrease", t.k));
        }
        last_k = Some(t.k);
        let g = iface.segments[si].budget;
        let c = &t.checks;
        let last_segment = si + 1 == iface.segments.len();
        let lower = nf / (2f64.powi(d as i32) * g);
        let upper = nf / g;
        let expect = StepChecks {
            lower,
            upper,
            bracket_ok: lower <= t.sizes.trimmed as f64 && (t.sizes.trimmed as f64) < upper,
            vb_cap: c.vb_cap,
            vb_cap_estimated: c.vb_cap_estimated,
            c1: c.vb_cap >= nf / (4.0 * d as f64),
            segment_end: t.sizes.b as f64 >= lower,
            scale_ok: (t.l as f64) >= g.powf(1.0 / s.rho),
            stop: false,
        };
        let stop = expect.c1 || (expect.segment_end && (last_segment || expect.scale_ok));
        let arithmetic = t.l == 1i64 << (t.k + 1)
            && t.sizes.vb == t.vb_boxes.len()
            && t.sizes.b == t.b_boxes.len()
            && t.sizes.b == t.sizes.b_large + t.sizes.b_small
            && t.sizes.vb + t.sizes.b == t.sizes.trimmed
            && t.sizes.large <= t.sizes.trimmed
            && t.sizes.small as f64 >= upper
            && StepChecks { stop, ..expect } == *c;
        let is_last = steps.peek().is_none();
        if !arithmetic || (stop && !is_last) {
            a.trace_consistent = false;
            a.failures.push(format!("segment {} step k = {}: checks do not match the sizes", si + 1, t.k));
        }
        if is_last && stop != (iface.stop_reason != StopReason::Exhausted) {
            a.trace_consistent = false;
            a.failures.push("the last step disagrees with the stop reason".into());
        }
    }
    a.stop_consistent = match iface.stop_reason {
        StopReason::C1Capacity => {
            let vb: Vec<LBox> = iface.very_bad().map(TaggedBox::lbox).collect();
            let (cap, _) = set_capacity(caps, &box_union(d, &vb))?;
            a.c1_capacity = Some(cap);
            iface.bad().next().is_none() && cap >= nf / (4.0 * d as f64)
        }
        StopReason::C2Cardinality => {
            let scales: BTreeSet<i64> = iface.bad().map(|b| b.scale).collect();
            let single = scales.len() == 1 && iface.very_bad().next().is_none();
            let product = match scales.iter().next() {
                Some(&l1) => iface.bad().count() as f64 * (l1 as f64).powf(s.rho),
                None => 0.0,
            };
            a.c2_product = Some(product);
            single && product >= s.t() * nf
        }
        StopReason::Exhausted => true,
    };
    if !a.stop_consistent {
        a.failures.push(format!("{:?} output fails its contract", iface.stop_reason));
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse::testutil::{field, sample};
    use crate::coarse::{subcritical_events, supercritical_events};
    use crate::lattice::Enlargement;
    use crate::potential::FreeGreen;

    #[test]
    fn schedule_arithmetic() {
        let s = Schedule::desk(3);
        assert!((s.m_const() - 3.0 * 8.0 * BOX_CAPACITY_C).abs() < 1e-12);
        assert!((s.t() - 1.0 / (16.0 * s.m_const())).abs() < 1e-15);
        assert_eq!(s.b(), 1.0);
        assert_eq!(s.threshold(), 12f64.exp().ceil());
        assert!(s.f(s.threshold()) >= 12.0 && s.f(s.threshold() - 1.0) < 12.0);
        assert_eq!(s.budgets(20), vec![s.m_const()]);
        assert!(Schedule::new(2, 1.0, 0.5, 1, 1.0).is_err());
        assert!(Schedule::new(3, 0.0, 0.5, 1, 1.0).is_err());
        // t ≥ 1 once L^ρ outgrows 2^{d+1} M
        assert!(Schedule::new(3, 3.0, 0.5, 64, 0.01).is_err());
    }

    #[test]
    fn budgets_decrease_then_end_at_m() {
        let s = Schedule::new(3, 0.5, 0.5, 1, BOX_CAPACITY_C).unwrap();
        let b = s.budgets(1u64 << 60);
        assert!(b.len() >= 2);
        assert!(b.windows(2).all(|w| w[0] > w[1]));
        assert_eq!(*b.last().unwrap(), s.m_const());
        assert!(b[..b.len() - 1].iter().all(|&g| g > s.m_const()));
    }

    /// Small `C` gives several segments on desk-sized clusters.
    fn stretched() -> Schedule {
        Schedule::new(3, 3.0, 0.5, 1, 0.01).unwrap()
    }

    fn run(phi: &crate::gff::FieldSample, h: f64, sup: bool, s: &Schedule) -> Option<(Interface, InterfaceAudit)> {
        let green = FreeGreen::new(3, 1e-10).unwrap();
        let caps = CapacityCache::new(&green);
        let cfg = CoarseConfig::new(phi, h, 1, Enlargement::compact()).unwrap();
        if !cfg.is_finite() || cfg.diameter() < 2 {
            return None;
        }
        let ev = if sup { supercritical_events(h, 0.2, None) } else { subcritical_events(h, 0.2, None) }.unwrap();
        let (cap, _) = caps.with_fallback(&cfg.cluster().closure()).unwrap();
        let n = bin_of(cap);
        let iface = match build_interface(&cfg, &ev, s, n, &caps) {
            Ok(i) => i,
            Err(Error::Precondition(_)) => return None,
            Err(e) => panic!("{e}"),
        };
        let again = build_interface(&cfg, &ev, s, n, &caps).unwrap();
        assert_eq!(iface, again);
        let audit = audit_interface(&iface, &caps).unwrap();
        Some((iface, audit))
    }

    #[test]
    fn cube_cluster_stops_at_unit_scale_boundary() {
        // an open 4³ cube: every box is very bad in the supercritical family
        let phi = field(3, 13, |p| if p.iter().all(|c| (0..4).contains(c)) { 1.0 } else { -1.0 });
        let (iface, audit) = run(&phi, 0.0, true, &Schedule::desk(3)).unwrap();
        assert!(audit.ok(), "{audit:?}");
        assert_eq!(iface.stop_reason, StopReason::C1Capacity);
        assert!(iface.bad().next().is_none());
        assert!(!iface.premise_failures.is_empty());
        let json = iface.to_json().unwrap();
        assert!(json.contains("\"stop_reason\": \"c1_capacity\"") && json.contains("\"L\""));
    }

    #[test]
    fn wrong_bracket_and_infinite_cluster_are_rejected() {
        let green = FreeGreen::new(3, 1e-10).unwrap();
        let caps = CapacityCache::new(&green);
        let phi = field(3, 13, |p| if p.iter().all(|c| (0..4).contains(c)) { 1.0 } else { -1.0 });
        let cfg = CoarseConfig::new(&phi, 0.0, 1, Enlargement::compact()).unwrap();
        let ev = supercritical_events(0.0, 0.2, None).unwrap();
        assert!(build_interface(&cfg, &ev, &Schedule::desk(3), 1, &caps).is_err());
        let full = field(3, 9, |_| 1.0);
        let cfg = CoarseConfig::new(&full, 0.0, 1, Enlargement::compact()).unwrap();
        assert!(build_interface(&cfg, &ev, &Schedule::desk(3), 1, &caps).is_err());
    }

    #[test]
    fn sampled_interfaces_pass_their_audit() {
        let mut built = 0;
        for i in 0..100 {
            let phi = sample(15, 33, i);
            for (h, sup) in [(0.0, true), (0.2, true), (0.4, false), (0.6, false)] {
                for s in [Schedule::desk(3), stretched()] {
                    if let Some((iface, audit)) = run(&phi, h, sup, &s) {
                        assert!(audit.ok(), "h = {h}: {audit:?}\n{}", iface.to_json().unwrap());
                        built += 1;
                    }
                }
            }
        }
        assert!(built > 0);
    }
}
