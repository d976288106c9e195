use super::excursion;
use super::local::{psi_bad, xi_bad, EventName, LocalEventReport, TestFamily, Witness};
use crate::gff::{Decomposition, FieldSample};
use crate::lattice::{clusters, label_components, BoxKind, Enlargement, LBox, Point, Region};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest level grid scanned by [`nslu_check`] and [`conf_check`].
const GRID_LIMIT: usize = 1 << 20;

/// Exponent `α` of the sub-scale `L = ⌊N/M⌋`, `M = N^{(α+1)/(α+2)}`, and the
/// gradient constant `C′` in the level shift `r = k − 1 − 7dC′ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessParams {
    pub alpha: f64,
    pub c_prime: f64,
}

impl UniquenessParams {
    /// `α = (2d + 1)²`, `C′ = 1`.
    pub fn standard(d: usize) -> Self {
        let a = (2 * d + 1) as f64;
        UniquenessParams { alpha: a * a, c_prime: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.c_prime > 0.0) {
            return Err(Error::precondition(format!("need α, C′ > 0, got α = {}, C′ = {}", self.alpha, self.c_prime)));
        }
        Ok(())
    }

    /// `L = ⌊N / N^{(α+1)/(α+2)}⌋ = ⌊N^{1/(α+2)}⌋`.
    pub fn sub_scale(&self, n: i64) -> Result<i64> {
        self.validate()?;
        if n < 1 {
            return Err(Error::geometry(format!("scale N = {n} gives no sub-scale")));
        }
        // the nudge keeps exact powers from rounding down
        let l = ((n as f64).powf(1.0 / (self.alpha + 2.0)) * (1.0 + 1e-12)).floor() as i64;
        if l < 1 {
            return Err(Error::geometry(format!("scale N = {n} gives L = 0")));
        }
        Ok(l)
    }

    /// `k ∈ {−⌈εL^α⌉, …, ⌈εL^α⌉}`.
    fn grid(&self, eps: f64, l: i64) -> Result<std::ops::RangeInclusive<i64>> {
        let top = (eps * (l as f64).powf(self.alpha)).ceil();
        if !(top.is_finite() && 2.0 * top + 1.0 <= GRID_LIMIT as f64) {
            return Err(Error::Size { size: (top as usize).saturating_mul(2).saturating_add(1), limit: GRID_LIMIT });
        }
        let top = top as i64;
        Ok(-top..=top)
    }

    fn r(&self, d: usize, k: i64, eps: f64) -> f64 {
        k as f64 - 1.0 - 7.0 * d as f64 * self.c_prime * eps
    }
}

/// Boxes of `lℤ^d` inside `outer`.
fn sub_boxes(outer: &Region, l: i64) -> Vec<LBox> {
    let d = outer.dim();
    let ranges: Vec<Vec<i64>> = (0..d)
        .map(|j| {
            let lo = outer.lo()[j].div_euclid(l) * l;
            let lo = if lo < outer.lo()[j] { lo + l } else { lo };
            let hi = outer.lo()[j] + outer.shape()[j] as i64;
            (0..).map(|m| lo + m * l).take_while(|z| z + l <= hi).collect()
        })
        .collect();
    let mut out = vec![Vec::new()];
    for r in &ranges {
        out = out.into_iter().flat_map(|a: Vec<i64>| r.iter().map(move |&z| [a.clone(), vec![z]].concat())).collect();
    }
    out.into_iter().map(|anchor| LBox { scale: l, anchor }).collect()
}

fn level_mask(phi: &FieldSample, region: &Region, level: f64) -> Vec<bool> {
    excursion(&phi.domain, region, level, |i, _| phi.values[i])
}

/// `(φ, level)`-good: `{φ ≥ level} ∩ B` has a component of diameter `L/5`,
/// and any two clusters of `{φ ≥ level} ∩ U` of diameter `L/10` connect
/// inside `D`.
pub fn phi_good(phi: &FieldSample, level: f64, b: &LBox) -> bool {
    let enl = Enlargement::default();
    let l = b.scale as f64;
    let reg = b.region();
    if !clusters(&reg, &level_mask(phi, &reg, level)).clusters.iter().any(|c| c.diameter as f64 >= l / 5.0) {
        return false;
    }
    let u = b.kind(BoxKind::U, &enl);
    let wide: Vec<Point> = clusters(&u, &level_mask(phi, &u, level))
        .clusters
        .iter()
        .filter(|c| c.diameter as f64 >= l / 10.0)
        .map(|c| u.point(c.members[0]))
        .collect();
    let Some(first) = wide.first() else { return true };
    let dr = b.kind(BoxKind::D, &enl);
    let lab = label_components(&dr, &level_mask(phi, &dr, level));
    let at = |p: &Point| lab.labels[dr.index(p).unwrap()];
    wide.iter().all(|p| at(p) == at(first))
}

/// A point of a very dense cluster of `{φ ≥ level} ∩ U_N`: diameter at least
/// `N/5`, and a piece of diameter `L/5` inside every `L`-box of `B_N`.
pub fn very_dense(phi: &FieldSample, level: f64, b_n: &LBox, l: i64) -> Option<Point> {
    let u = b_n.kind(BoxKind::U, &Enlargement::default());
    let cs = clusters(&u, &level_mask(phi, &u, level));
    let boxes = sub_boxes(&b_n.region(), l);
    'clusters: for c in &cs.clusters {
        if (c.diameter as f64) < b_n.scale as f64 / 5.0 {
            continue;
        }
        let label = cs.labels[c.members[0]];
        for sb in &boxes {
            let reg = sb.region();
            let mask: Vec<bool> = reg.points().map(|p| cs.labels[u.index(&p).unwrap()] == label).collect();
            if !clusters(&reg, &mask).clusters.iter().any(|s| s.diameter as f64 >= l as f64 / 5.0) {
                continue 'clusters;
            }
        }
        return Some(u.point(c.members[0]));
    }
    None
}

/// `NSLU(h, ε, N)` on `B_N = b_n`: no very dense cluster at `h + ε`, or some
/// `L`-box of `B_N` that is not good at a grid level `h − rL^{−α}`.
pub fn nslu_check(phi: &FieldSample, h: f64, eps: f64, b_n: &LBox, params: &UniquenessParams) -> Result<LocalEventReport> {
    let l = params.sub_scale(b_n.scale)?;
    let report = |witness| Ok(LocalEventReport { anchor: b_n.clone(), event: EventName::Nslu, witness });
    if very_dense(phi, h + eps, b_n, l).is_none() {
        return report(Some(Witness::NoVeryDense { level: h + eps }));
    }
    let unit = (l as f64).powf(-params.alpha);
    let d = b_n.dim();
    let boxes = sub_boxes(&b_n.region(), l);
    for k in params.grid(eps, l)? {
        let level = h - params.r(d, k, eps) * unit;
        if let Some(bad) = boxes.iter().find(|b| !phi_good(phi, level, b)) {
            return report(Some(Witness::BadBox { k: Some(k), level, anchor: bad.anchor.clone(), scale: l }));
        }
    }
    report(None)
}

/// `Conf(h, ε, B)` for an `L²`-box `b`: at least `L` domain sites of `D(b)`
/// confined to `[h − kL^{−α}, h − rL^{−α})` for one grid `k`.
pub fn conf_check(
    phi: &FieldSample,
    h: f64,
    eps: f64,
    b: &LBox,
    l: i64,
    params: &UniquenessParams,
) -> Result<LocalEventReport> {
    if b.scale != l * l {
        return Err(Error::geometry(format!("Conf needs a box of scale L² = {}, got {}", l * l, b.scale)));
    }
    let dr = b.kind(BoxKind::D, &Enlargement::default());
    let unit = (l as f64).powf(-params.alpha);
    let vals: Vec<(Point, f64)> = dr.points().filter_map(|p| phi.domain.index(&p).map(|i| (p, phi.values[i]))).collect();
    for k in params.grid(eps, l)? {
        let lo = h - k as f64 * unit;
        let hi = h - params.r(b.dim(), k, eps) * unit;
        let points: Vec<Point> = vals.iter().filter(|(_, v)| lo <= *v && *v < hi).map(|(p, _)| p.clone()).collect();
        if points.len() as i64 >= l {
            let witness = Witness::Confined { k, lo, hi, points };
            return Ok(LocalEventReport { anchor: b.clone(), event: EventName::Conf, witness: Some(witness) });
        }
    }
    Ok(LocalEventReport { anchor: b.clone(), event: EventName::Conf, witness: None })
}

/// `Conf(h, ε, N)`: the union over the `L²`-boxes of `L²ℤ^d` inside `B_N`.
pub fn conf_over(phi: &FieldSample, h: f64, eps: f64, b_n: &LBox, params: &UniquenessParams) -> Result<LocalEventReport> {
    let l = params.sub_scale(b_n.scale)?;
    for b in sub_boxes(&b_n.region(), l * l) {
        let r = conf_check(phi, h, eps, &b, l, params)?;
        if r.certified() {
            return Ok(r);
        }
    }
    Ok(LocalEventReport { anchor: b_n.clone(), event: EventName::Conf, witness: None })
}

/// Per-configuration check that a certified `(ψ, h, ε)`-bad box `B_N` comes
/// with `(ξ, δ)`-bad, `NSLU(h, ε + δ, N)` or `Conf(h, ε + δ, N)` for
/// `δ = (h_* − h − ε)/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImplicationAudit {
    pub psi_bad: LocalEventReport,
    pub delta: f64,
    pub xi_bad: bool,
    pub nslu: Option<LocalEventReport>,
    pub conf: Option<LocalEventReport>,
}

impl ImplicationAudit {
    pub fn holds(&self) -> bool {
        !self.psi_bad.certified()
            || self.xi_bad
            || self.nslu.as_ref().is_some_and(LocalEventReport::certified)
            || self.conf.as_ref().is_some_and(LocalEventReport::certified)
    }
}

pub fn psi_to_phi_audit(
    phi: &FieldSample,
    dec: &Decomposition,
    h: f64,
    eps: f64,
    h_star: f64,
    family: &TestFamily,
    params: &UniquenessParams,
) -> Result<ImplicationAudit> {
    if !(eps > 0.0 && eps < h_star - h) {
        return Err(Error::precondition(format!("need 0 < ε < h_* − h, got ε = {eps}, h = {h}, h_* = {h_star}")));
    }
    let delta = (h_star - h - eps) / 2.0;
    let psi = psi_bad(dec, h, eps, family)?;
    let mut audit = ImplicationAudit { psi_bad: psi, delta, xi_bad: false, nslu: None, conf: None };
    if !audit.psi_bad.certified() {
        return Ok(audit);
    }
    audit.xi_bad = xi_bad(dec, delta)?;
    if audit.xi_bad {
        return Ok(audit);
    }
    let b_n = &dec.base;
    audit.nslu = Some(nslu_check(phi, h, eps + delta, b_n, params)?);
    if !audit.holds() {
        audit.conf = Some(conf_over(phi, h, eps + delta, b_n, params)?);
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse::testutil::field;
    use crate::gff::{decompose_clipped, BasisCache, Sampler};

    #[test]
    fn sub_scale_and_grid() {
        let p = UniquenessParams::standard(3);
        assert_eq!(p.alpha, 49.0);
        assert_eq!(p.sub_scale(1).unwrap(), 1);
        assert_eq!(p.sub_scale(1 << 40).unwrap(), 1);
        assert!(p.sub_scale(0).is_err());
        let q = UniquenessParams { alpha: 1.0, c_prime: 1.0 };
        assert_eq!(q.sub_scale(8).unwrap(), 2);
        assert_eq!(q.sub_scale(26).unwrap(), 2);
        assert_eq!(q.sub_scale(27).unwrap(), 3);
        assert_eq!(q.grid(0.3, 2).unwrap(), -1..=1);
        assert!(p.grid(1.0, 4).is_err());
        assert!((q.r(3, 2, 0.1) - (1.0 - 2.1)).abs() < 1e-12);
    }

    #[test]
    fn sub_boxes_tile_inside() {
        let outer = Region::new(vec![-3, 1], vec![7, 4]).unwrap();
        let b = sub_boxes(&outer, 2);
        assert_eq!(b.len(), 3);
        assert!(b.iter().all(|x| outer.contains_region(&x.region())));
    }

    #[test]
    fn constant_high_field_has_strong_uniqueness() {
        let q = UniquenessParams { alpha: 1.0, c_prime: 1.0 };
        let phi = field(3, 30, |_| 5.0);
        let b_n = LBox::new(8, vec![0, 0, 0]).unwrap();
        let r = nslu_check(&phi, 0.0, 0.1, &b_n, &q).unwrap();
        assert!(!r.certified(), "{r:?}");
        assert!(very_dense(&phi, 0.1, &b_n, 2).is_some());
        // unit sub-boxes hold no piece of diameter 1/5
        let r = nslu_check(&phi, 0.0, 0.1, &b_n, &UniquenessParams::standard(3)).unwrap();
        assert_eq!(r.witness, Some(Witness::NoVeryDense { level: 0.1 }));
    }

    #[test]
    fn conf_needs_values_in_the_window() {
        let q = UniquenessParams { alpha: 1.0, c_prime: 1.0 };
        let phi = field(3, 30, |_| 5.0);
        let b_n = LBox::new(8, vec![0, 0, 0]).unwrap();
        assert!(!conf_over(&phi, 0.0, 0.1, &b_n, &q).unwrap().certified());
        // k = −1 gives [0.5, 2.05); k = 0 gives [0, 1.55), which holds 0.2
        let flat = field(3, 30, |_| 0.2);
        let r = conf_over(&flat, 0.0, 0.1, &b_n, &q).unwrap();
        match r.witness {
            Some(Witness::Confined { k, lo, hi, points }) => {
                assert_eq!(k, 0);
                assert!(lo <= 0.2 && 0.2 < hi && points.len() >= 2);
            }
            other => panic!("{other:?}"),
        }
        assert!(conf_check(&flat, 0.0, 0.1, &b_n, 2, &q).is_err());
    }

    #[test]
    fn phi_good_on_simple_fields() {
        let b = LBox::new(5, vec![0, 0, 0]).unwrap();
        assert!(phi_good(&field(3, 41, |_| 1.0), 0.0, &b));
        assert!(!phi_good(&field(3, 41, |_| -1.0), 0.0, &b));
        // two open slabs in U separated by a closed plane across D
        let split = field(3, 41, |p| if p[0] == 2 { -1.0 } else { 1.0 });
        assert!(!phi_good(&split, 0.0, &b));
    }

    #[test]
    fn implication_holds_on_sampled_boxes() {
        let q = UniquenessParams { alpha: 0.1, c_prime: 1.0 };
        let sampler = Sampler::new(&Region::centered(3, 41).unwrap());
        let b_n = LBox::new(5, vec![0, 0, 0]).unwrap();
        assert_eq!(q.sub_scale(5).unwrap(), 2);
        let (h_star, eps) = (0.3, 0.05);
        let mut certified = 0;
        for i in 0..6 {
            let phi = sampler.sample(77, i);
            let dec = decompose_clipped(&phi, &b_n, &Enlargement::compact(), &BasisCache::default()).unwrap();
            for h in [-0.2, 0.0, 0.2] {
                let a = psi_to_phi_audit(&phi, &dec, h, eps, h_star, &TestFamily::standard(eps), &q).unwrap();
                assert!(a.holds(), "{a:?}");
                certified += a.psi_bad.certified() as usize;
            }
        }
        assert!(certified > 0);
        let phi = sampler.sample(77, 0);
        let dec = decompose_clipped(&phi, &b_n, &Enlargement::compact(), &BasisCache::default()).unwrap();
        assert!(psi_to_phi_audit(&phi, &dec, 0.3, 0.05, 0.3, &TestFamily::zero(), &q).is_err());
    }
}
