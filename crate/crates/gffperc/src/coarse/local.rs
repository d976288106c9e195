use super::{dense_clusters, excursion};
use crate::gff::Decomposition;
use crate::lattice::{clusters, label_components, BoxKind, Components, Enlargement, LBox, Point, Region};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventName {
    XiBad,
    PsiBad,
    PsiVeryBad,
    DenseMissing,
    Nslu,
    Conf,
    H,
}

/// A harmonic function on `D̄` used as a perturbation `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Harmonic {
    /// The observed harmonic part `ξ^B`.
    Observed,
    Constant { value: f64 },
    /// `slope · (x_axis − center)`.
    Linear { axis: usize, slope: f64, center: f64 },
}

impl Harmonic {
    pub(crate) fn at(&self, dec: &Decomposition, idx: usize, x: &[i64]) -> f64 {
        match *self {
            Harmonic::Observed => dec.xi[idx],
            Harmonic::Constant { value } => value,
            Harmonic::Linear { axis, slope, center } => slope * (x[axis] as f64 - center),
        }
    }

    /// `sup_D |g|`.
    pub fn sup_on(&self, dec: &Decomposition, d: &Region) -> f64 {
        d.points()
            .filter_map(|p| dec.domain.index(&p).map(|i| self.at(dec, i, &p).abs()))
            .fold(0.0, f64::max)
    }
}

/// What certifies an occurrence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// The perturbation under which a defining condition fails.
    Perturbation { g: Harmonic, clause: String },
    /// `sup_D |ξ^B|` reached the threshold.
    XiSup { value: f64 },
    /// Sites confined in `[lo, hi)`.
    Confined { k: i64, lo: f64, hi: f64, points: Vec<Point> },
    /// A sub-box that is not good at `level`.
    BadBox { k: Option<i64>, level: f64, anchor: Point, scale: i64 },
    NoVeryDense { level: f64 },
}

/// One local event on one box. A witness certifies the event; its absence
/// over a finite test family only suggests non-occurrence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalEventReport {
    pub anchor: LBox,
    pub event: EventName,
    pub witness: Option<Witness>,
}

impl LocalEventReport {
    pub fn certified(&self) -> bool {
        self.witness.is_some()
    }
}

/// Finite stand-in for "every harmonic `g` with `|g| < ε` on `D`": the
/// observed `ξ^B`, constants on a grid of step `ε/8`, and coordinate-linear
/// functions scaled to `sup_D |g| = (1 − 2⁻¹⁰)ε`, plus any extra members.
/// Members are filtered by `sup_D |g| < ε` at evaluation time, so a fixed
/// family only grows as `ε` does.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFamily {
    pub observed: bool,
    pub constants: Vec<f64>,
    pub linear: bool,
    pub extra: Vec<Harmonic>,
}

const LINEAR_FILL: f64 = 1.0 - 1.0 / 1024.0;

impl TestFamily {
    pub fn standard(eps: f64) -> Self {
        let mut constants: Vec<f64> = (-7..=7).map(|k| k as f64 * eps / 8.0).collect();
        constants.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
        TestFamily { observed: true, constants, linear: true, extra: Vec::new() }
    }

    /// Only `g = 0`.
    pub fn zero() -> Self {
        TestFamily { observed: false, constants: vec![0.0], linear: false, extra: Vec::new() }
    }

    pub fn with(mut self, g: Harmonic) -> Self {
        self.extra.push(g);
        self
    }

    /// Admissible members for the box of `dec`, zero first.
    pub fn members(&self, dec: &Decomposition, eps: f64) -> Vec<Harmonic> {
        let d = dec.base.kind(BoxKind::D, &Enlargement::default());
        let mut out: Vec<Harmonic> = Vec::new();
        let mut consts = self.constants.iter().map(|&value| Harmonic::Constant { value });
        out.extend(consts.by_ref().take(1));
        if self.observed {
            out.push(Harmonic::Observed);
        }
        out.extend(consts);
        if self.linear {
            for axis in 0..d.dim() {
                let half = (d.shape()[axis] as f64 - 1.0) / 2.0;
                let center = d.lo()[axis] as f64 + half;
                for s in [1.0, -1.0] {
                    out.push(Harmonic::Linear { axis, slope: s * LINEAR_FILL * eps / half, center });
                }
            }
        }
        out.extend(self.extra.iter().cloned());
        out.retain(|g| g.sup_on(dec, &d) < eps);
        out
    }
}

fn require_inside(dec: &Decomposition, kind: BoxKind) -> Result<Region> {
    let r = dec.base.kind(kind, &Enlargement::default());
    if !dec.domain.contains_region(&r) {
        return Err(Error::geometry(format!("{kind:?}-box {r:?} of {:?} leaves the domain", dec.base)));
    }
    Ok(r)
}

/// `(ξ, ε)`-bad: `|ξ^B| ≥ ε` somewhere on `D`.
pub fn xi_bad(dec: &Decomposition, eps: f64) -> Result<bool> {
    let d = require_inside(dec, BoxKind::D)?;
    Ok(Harmonic::Observed.sup_on(dec, &d) >= eps)
}

type Base<'a> = &'a dyn Fn(usize) -> f64;

/// Labels of `{base + g ≥ h}` on `region`.
fn labels(dec: &Decomposition, region: &Region, h: f64, base: Base, g: &Harmonic) -> Components {
    let mask = excursion(&dec.domain, region, h, |i, x| base(i) + g.at(dec, i, x));
    label_components(region, &mask)
}

/// Failing clause of "`{base + g ≥ h} ∩ U` has a cluster of diameter `L/5`,
/// and all such clusters connect inside `D`", or `None`.
fn wide_cluster_clause(dec: &Decomposition, h: f64, base: Base, g: &Harmonic, need_one: bool) -> Option<String> {
    let enl = Enlargement::default();
    let (u, d) = (dec.base.kind(BoxKind::U, &enl), dec.base.kind(BoxKind::D, &enl));
    let mask = excursion(&dec.domain, &u, h, |i, x| base(i) + g.at(dec, i, x));
    let cs = clusters(&u, &mask);
    let wide: Vec<Point> = cs
        .clusters
        .iter()
        .filter(|c| c.diameter as f64 >= dec.base.scale as f64 / 5.0)
        .map(|c| u.point(c.members[0]))
        .collect();
    if wide.is_empty() {
        return need_one.then(|| "no cluster of diameter L/5 in U".into());
    }
    let lab = labels(dec, &d, h, base, g);
    let first = lab.labels[d.index(&wide[0]).unwrap()];
    wide.iter()
        .any(|p| lab.labels[d.index(p).unwrap()] != first)
        .then(|| "two clusters of diameter L/5 in U are not connected in D".into())
}

fn search(
    dec: &Decomposition,
    event: EventName,
    eps: f64,
    family: &TestFamily,
    clause: impl Fn(&Harmonic) -> Result<Option<String>>,
) -> Result<LocalEventReport> {
    for g in family.members(dec, eps) {
        if let Some(c) = clause(&g)? {
            return Ok(LocalEventReport {
                anchor: dec.base.clone(),
                event,
                witness: Some(Witness::Perturbation { g, clause: c }),
            });
        }
    }
    Ok(LocalEventReport { anchor: dec.base.clone(), event, witness: None })
}

/// `(ψ, h, ε)`-bad, certified by a member of `family`.
pub fn psi_bad(dec: &Decomposition, h: f64, eps: f64, family: &TestFamily) -> Result<LocalEventReport> {
    require_inside(dec, BoxKind::D)?;
    let base = |i: usize| dec.psi[i];
    search(dec, EventName::PsiBad, eps, family, |g| Ok(wide_cluster_clause(dec, h, &base, g, true)))
}

/// `H(h, ε, B)`: two clusters of `{φ + g ≥ h} ∩ U` of diameter `L/5` that do
/// not connect inside `D`.
pub fn h_event(dec: &Decomposition, h: f64, eps: f64, family: &TestFamily) -> Result<LocalEventReport> {
    require_inside(dec, BoxKind::D)?;
    let base = |i: usize| dec.xi[i] + dec.psi[i];
    search(dec, EventName::H, eps, family, |g| Ok(wide_cluster_clause(dec, h, &base, g, false)))
}

/// `(ψ, h, ε)`-very-bad: under some `g` of `family`, `B` or a neighbour has
/// no dense cluster of `{ψ + g ≥ h}`, or a dense cluster of `B` and one of a
/// neighbour do not connect inside `D`.
pub fn psi_very_bad(dec: &Decomposition, h: f64, eps: f64, family: &TestFamily) -> Result<LocalEventReport> {
    let d = require_inside(dec, BoxKind::D)?;
    super::dense_scale(dec.base.dim(), dec.base.scale)?;
    let base = |i: usize| dec.psi[i];
    search(dec, EventName::PsiVeryBad, eps, family, |g| {
        let mut boxes = vec![dec.base.clone()];
        boxes.extend(dec.base.neighbors());
        let mut reps = Vec::with_capacity(boxes.len());
        for (j, b) in boxes.iter().enumerate() {
            let mask = excursion(&dec.domain, &b.region(), h, |i, x| base(i) + g.at(dec, i, x));
            let r = dense_clusters(b, &mask)?;
            if r.is_empty() {
                let which = if j == 0 { "B".to_string() } else { format!("neighbour {j}") };
                return Ok(Some(format!("no dense cluster in {which}")));
            }
            reps.push(r);
        }
        let lab = labels(dec, &d, h, &base, g);
        let at = |p: &Point| lab.labels[d.index(p).unwrap()];
        for other in &reps[1..] {
            for p in &reps[0] {
                if other.iter().any(|q| at(q) != at(p)) {
                    return Ok(Some("dense clusters of B and a neighbour are not connected in D".into()));
                }
            }
        }
        Ok(None)
    })
}
