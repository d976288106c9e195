//! ℤ^d geometry: regions, boxes at dyadic scales, vertex sets and clusters.

mod cluster;
mod family;

pub use cluster::{clusters, flood, label_components, ClusterInfo, ClusterSet, Components, UnionFind};
pub use family::{boxes_hit, coarse_inner_boundary, columns, is_well_separated, maximal_well_separated};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::{BufRead, Write};

pub type Point = Vec<i64>;

/// Axis-aligned box `lo + [0, shape)` with row-major flat indexing (last axis fastest).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    lo: Vec<i64>,
    shape: Vec<usize>,
}

impl Region {
    pub fn new(lo: Vec<i64>, shape: Vec<usize>) -> Result<Self> {
        if lo.is_empty() || lo.len() != shape.len() {
            return Err(Error::geometry("region corner and shape must have the same positive length"));
        }
        if shape.contains(&0) {
            return Err(Error::geometry("region sides must be positive"));
        }
        Ok(Region { lo, shape })
    }

    pub fn cube(d: usize, lo: i64, side: usize) -> Result<Self> {
        Region::new(vec![lo; d], vec![side; d])
    }

    /// Cube of the given side containing the origin at its centre vertex
    /// (for even sides the origin sits just past the middle).
    pub fn centered(d: usize, side: usize) -> Result<Self> {
        Region::cube(d, -((side / 2) as i64), side)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Exclusive upper corner.
    pub fn hi(&self) -> Vec<i64> {
        self.lo.iter().zip(&self.shape).map(|(l, s)| l + *s as i64).collect()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn strides(&self) -> Vec<usize> {
        let d = self.dim();
        let mut s = vec![1usize; d];
        for j in (0..d.saturating_sub(1)).rev() {
            s[j] = s[j + 1] * self.shape[j + 1];
        }
        s
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.lo)
                .zip(&self.shape)
                .all(|((x, l), s)| *x >= *l && *x < *l + *s as i64)
    }

    pub fn index(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let mut idx = 0usize;
        for j in 0..self.dim() {
            idx = idx * self.shape[j] + (x[j] - self.lo[j]) as usize;
        }
        Some(idx)
    }

    pub fn point(&self, idx: usize) -> Point {
        let mut p = vec![0; self.dim()];
        self.point_into(idx, &mut p);
        p
    }

    pub fn point_into(&self, mut idx: usize, out: &mut [i64]) {
        for j in (0..self.dim()).rev() {
            out[j] = self.lo[j] + (idx % self.shape[j]) as i64;
            idx /= self.shape[j];
        }
    }

    /// Calls `f` for every nearest neighbour of `idx` inside the region.
    #[inline]
    pub fn for_each_neighbor(&self, idx: usize, mut f: impl FnMut(usize)) {
        let mut stride = 1usize;
        let mut rest = idx;
        for j in (0..self.dim()).rev() {
            let c = rest % self.shape[j];
            rest /= self.shape[j];
            if c > 0 {
                f(idx - stride);
            }
            if c + 1 < self.shape[j] {
                f(idx + stride);
            }
            stride *= self.shape[j];
        }
    }

    /// Number of nearest neighbours of `idx` lying outside the region.
    pub fn outside_neighbors(&self, idx: usize) -> usize {
        let mut n = 0;
        let mut rest = idx;
        for j in (0..self.dim()).rev() {
            let c = rest % self.shape[j];
            rest /= self.shape[j];
            n += usize::from(c == 0) + usize::from(c + 1 == self.shape[j]);
        }
        n
    }

    /// ℓ∞ distance from `idx` to the complement of the region, minus one
    /// (0 on the outermost layer).
    pub fn depth(&self, idx: usize) -> usize {
        let mut best = usize::MAX;
        let mut rest = idx;
        for j in (0..self.dim()).rev() {
            let c = rest % self.shape[j];
            rest /= self.shape[j];
            best = best.min(c).min(self.shape[j] - 1 - c);
        }
        best
    }

    pub fn intersect(&self, other: &Region) -> Option<Region> {
        if self.dim() != other.dim() {
            return None;
        }
        let mut lo = Vec::with_capacity(self.dim());
        let mut shape = Vec::with_capacity(self.dim());
        for j in 0..self.dim() {
            let a = self.lo[j].max(other.lo[j]);
            let b = (self.lo[j] + self.shape[j] as i64).min(other.lo[j] + other.shape[j] as i64);
            if b <= a {
                return None;
            }
            lo.push(a);
            shape.push((b - a) as usize);
        }
        Some(Region { lo, shape })
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        self.intersect(other).as_ref() == Some(other)
    }

    /// `other` lies inside `self` with at least one layer of `self` around it.
    pub fn strictly_contains(&self, other: &Region) -> bool {
        (0..self.dim()).all(|j| {
            other.lo[j] > self.lo[j]
                && other.lo[j] + (other.shape[j] as i64) < self.lo[j] + self.shape[j] as i64
        }) && self.dim() == other.dim()
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

/// Box kinds around a scale-`L` box `B = z + [0, L)^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoxKind {
    /// `z + [0, L)^d`
    B,
    /// `z + [−L, 2L)^d`
    U,
    /// `z + [−3L, 4L)^d`
    D,
    /// `z + [k_lo·L, k_hi·L)^d`, default `[−100L, 101L)^d`
    K,
}

/// Offsets of the K-kind enlargement in units of the scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enlargement {
    pub k_lo: i64,
    pub k_hi: i64,
}

impl Default for Enlargement {
    fn default() -> Self {
        Enlargement { k_lo: -100, k_hi: 101 }
    }
}

impl Enlargement {
    /// Smallest enlargement that still strictly contains the D-kind box.
    pub fn compact() -> Self {
        Enlargement { k_lo: -4, k_hi: 5 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_lo >= -3 || self.k_hi <= 4 {
            return Err(Error::geometry("K enlargement must strictly contain [-3L, 4L)"));
        }
        Ok(())
    }

    pub fn side(&self) -> i64 {
        self.k_hi - self.k_lo
    }
}

/// Box `anchor + [0, scale)^d` with `anchor ∈ scale·ℤ^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LBox {
    pub scale: i64,
    pub anchor: Point,
}

impl LBox {
    pub fn new(scale: i64, anchor: Point) -> Result<Self> {
        if scale < 1 {
            return Err(Error::geometry("box scale must be positive"));
        }
        if anchor.iter().any(|a| a.rem_euclid(scale) != 0) {
            return Err(Error::geometry(format!("anchor {anchor:?} not in {scale}·Z^d")));
        }
        Ok(LBox { scale, anchor })
    }

    /// The scale-`L` box containing `x`.
    pub fn containing(x: &[i64], scale: i64) -> LBox {
        LBox {
            scale,
            anchor: x.iter().map(|c| c.div_euclid(scale) * scale).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn region(&self) -> Region {
        self.kind(BoxKind::B, &Enlargement::default())
    }

    pub fn kind(&self, kind: BoxKind, enl: &Enlargement) -> Region {
        let (a, b) = match kind {
            BoxKind::B => (0, 1),
            BoxKind::U => (-1, 2),
            BoxKind::D => (-3, 4),
            BoxKind::K => (enl.k_lo, enl.k_hi),
        };
        Region {
            lo: self.anchor.iter().map(|z| z + a * self.scale).collect(),
            shape: vec![((b - a) * self.scale) as usize; self.dim()],
        }
    }

    /// The `2d` boxes of the same scale sharing a face with this one.
    pub fn neighbors(&self) -> Vec<LBox> {
        let mut out = Vec::with_capacity(2 * self.dim());
        for j in 0..self.dim() {
            for s in [-1, 1] {
                let mut a = self.anchor.clone();
                a[j] += s * self.scale;
                out.push(LBox { scale: self.scale, anchor: a });
            }
        }
        out
    }

    pub fn contains_point(&self, x: &[i64]) -> bool {
        self.region().contains(x)
    }

    /// `other` is a sub-box of `self` (same or smaller scale).
    pub fn contains_box(&self, other: &LBox) -> bool {
        other.scale <= self.scale && self.region().contains_region(&other.region())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Metric {
    /// Largest coordinate spread.
    #[default]
    LInf,
    /// Largest graph distance inside the set.
    Graph,
}

/// Finite subset of ℤ^d kept in sorted order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexSet {
    d: usize,
    pts: BTreeSet<Point>,
}

impl VertexSet {
    pub fn new(d: usize) -> Self {
        VertexSet { d, pts: BTreeSet::new() }
    }

    pub fn from_points(d: usize, pts: impl IntoIterator<Item = Point>) -> Result<Self> {
        let mut s = VertexSet::new(d);
        for p in pts {
            s.insert(p)?;
        }
        Ok(s)
    }

    pub fn from_region(region: &Region) -> Self {
        VertexSet {
            d: region.dim(),
            pts: region.points().collect(),
        }
    }

    pub fn from_indices(region: &Region, idx: impl IntoIterator<Item = usize>) -> Self {
        VertexSet {
            d: region.dim(),
            pts: idx.into_iter().map(|i| region.point(i)).collect(),
        }
    }

    pub fn insert(&mut self, p: Point) -> Result<bool> {
        if p.len() != self.d {
            return Err(Error::geometry(format!("point {p:?} is not in dimension {}", self.d)));
        }
        Ok(self.pts.insert(p))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn contains(&self, p: &[i64]) -> bool {
        self.pts.contains(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point> {
        self.pts.iter()
    }

    pub fn to_vec(&self) -> Vec<Point> {
        self.pts.iter().cloned().collect()
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        VertexSet {
            d: self.d,
            pts: self.pts.union(&other.pts).cloned().collect(),
        }
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.pts.is_subset(&other.pts)
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        self.pts.is_disjoint(&other.pts)
    }

    pub fn translate(&self, v: &[i64]) -> VertexSet {
        VertexSet {
            d: self.d,
            pts: self
                .pts
                .iter()
                .map(|p| p.iter().zip(v).map(|(a, b)| a + b).collect())
                .collect(),
        }
    }

    fn neighbors_of(p: &[i64]) -> impl Iterator<Item = Point> + '_ {
        (0..p.len()).flat_map(move |j| {
            [-1i64, 1].into_iter().map(move |s| {
                let mut q = p.to_vec();
                q[j] += s;
                q
            })
        })
    }

    /// Vertices of the set with a neighbour outside it.
    pub fn inner_boundary(&self) -> VertexSet {
        VertexSet {
            d: self.d,
            pts: self
                .pts
                .iter()
                .filter(|p| Self::neighbors_of(p).any(|q| !self.pts.contains(&q)))
                .cloned()
                .collect(),
        }
    }

    /// Vertices outside the set with a neighbour inside it.
    pub fn outer_boundary(&self) -> VertexSet {
        let mut out = BTreeSet::new();
        for p in &self.pts {
            for q in Self::neighbors_of(p) {
                if !self.pts.contains(&q) {
                    out.insert(q);
                }
            }
        }
        VertexSet { d: self.d, pts: out }
    }

    /// Outer boundary, required to lie inside `region`.
    pub fn outer_boundary_in(&self, region: &Region) -> Result<VertexSet> {
        let ob = self.outer_boundary();
        if let Some(p) = ob.iter().find(|p| !region.contains(p)) {
            return Err(Error::geometry(format!("outer boundary vertex {p:?} leaves the region")));
        }
        Ok(ob)
    }

    pub fn closure(&self) -> VertexSet {
        self.union(&self.outer_boundary())
    }

    pub fn diameter(&self, metric: Metric) -> Option<u64> {
        if self.pts.is_empty() {
            return Some(0);
        }
        match metric {
            Metric::LInf => {
                let mut best = 0i64;
                for j in 0..self.d {
                    let lo = self.pts.iter().map(|p| p[j]).min().unwrap();
                    let hi = self.pts.iter().map(|p| p[j]).max().unwrap();
                    best = best.max(hi - lo);
                }
                Some(best as u64)
            }
            Metric::Graph => {
                let pts = self.to_vec();
                let region = self.bounding_region()?;
                let local: Vec<usize> = pts.iter().map(|p| region.index(p).unwrap()).collect();
                let mut mask = vec![false; region.len()];
                local.iter().for_each(|&i| mask[i] = true);
                let mut best = 0u64;
                let mut dist = vec![u32::MAX; region.len()];
                for &s in &local {
                    dist.iter_mut().for_each(|d| *d = u32::MAX);
                    dist[s] = 0;
                    let mut queue = std::collections::VecDeque::from([s]);
                    let mut seen = 1usize;
                    while let Some(v) = queue.pop_front() {
                        let dv = dist[v];
                        best = best.max(dv as u64);
                        region.for_each_neighbor(v, |w| {
                            if mask[w] && dist[w] == u32::MAX {
                                dist[w] = dv + 1;
                                seen += 1;
                                queue.push_back(w);
                            }
                        });
                    }
                    if seen < local.len() {
                        return None;
                    }
                }
                Some(best)
            }
        }
    }

    /// Smallest region containing the set; `None` when empty.
    pub fn bounding_region(&self) -> Option<Region> {
        let first = self.pts.iter().next()?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in &self.pts {
            for j in 0..self.d {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        let shape = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as usize).collect();
        Some(Region { lo, shape })
    }

    /// Sorted CSV rows with header `x1,…,xd`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.d).map(|j| format!("x{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for p in &self.pts {
            let row: Vec<String> = p.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::geometry("empty vertex-set file"))??;
        let d = header.split(',').count();
        let mut s = VertexSet::new(d);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let p: std::result::Result<Point, _> = line.split(',').map(|t| t.trim().parse::<i64>()).collect();
            let p = p.map_err(|e| Error::geometry(format!("bad vertex row {line:?}: {e}")))?;
            s.insert(p)?;
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(d: usize) -> VertexSet {
        VertexSet::from_points(d, [vec![0; d]]).unwrap()
    }

    #[test]
    fn singleton_boundaries() {
        let s = single(3);
        assert_eq!(s.outer_boundary().len(), 6);
        assert_eq!(s.inner_boundary().len(), 1);
        assert_eq!(s.closure().len(), 7);
    }

    #[test]
    fn full_box_geometry() {
        let b = VertexSet::from_region(&Region::cube(3, 0, 4).unwrap());
        assert_eq!(b.inner_boundary().len(), 4usize.pow(3) - 2usize.pow(3));
        assert_eq!(b.diameter(Metric::LInf), Some(3));
        assert_eq!(b.diameter(Metric::Graph), Some(9));
    }

    #[test]
    fn outer_boundary_leaving_region_is_an_error() {
        let r = Region::cube(2, 0, 3).unwrap();
        let s = VertexSet::from_points(2, [vec![0, 1]]).unwrap();
        assert!(s.outer_boundary_in(&r).is_err());
        let t = VertexSet::from_points(2, [vec![1, 1]]).unwrap();
        assert_eq!(t.outer_boundary_in(&r).unwrap().len(), 4);
    }

    #[test]
    fn region_indexing_round_trips() {
        let r = Region::new(vec![-2, 3, 0], vec![3, 4, 5]).unwrap();
        for i in 0..r.len() {
            assert_eq!(r.index(&r.point(i)), Some(i));
        }
        assert_eq!(r.index(&[1, 3, 0]), None);
    }

    #[test]
    fn box_kinds_have_expected_sides() {
        let b = LBox::new(4, vec![8, -4, 0]).unwrap();
        let e = Enlargement::default();
        assert_eq!(b.kind(BoxKind::B, &e).shape(), &[4, 4, 4]);
        assert_eq!(b.kind(BoxKind::U, &e).shape(), &[12, 12, 12]);
        assert_eq!(b.kind(BoxKind::D, &e).lo(), &[-4, -16, -12]);
        assert_eq!(b.kind(BoxKind::K, &e).shape(), &[804, 804, 804]);
        assert!(LBox::new(4, vec![2, 0, 0]).is_err());
    }

    #[test]
    fn csv_is_sorted() {
        let s = VertexSet::from_points(2, [vec![1, 0], vec![-1, 5], vec![0, 0]]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "x1,x2\n-1,5\n0,0\n1,0\n");
        assert_eq!(VertexSet::read_csv(&buf[..]).unwrap(), s);
    }

    fn arb_set(d: usize) -> impl Strategy<Value = VertexSet> {
        prop::collection::vec(prop::collection::vec(-4i64..4, d), 1..30)
            .prop_map(move |pts| VertexSet::from_points(d, pts).unwrap())
    }

    proptest! {
        #[test]
        fn boundaries_partition_closure(s in arb_set(3)) {
            let ib = s.inner_boundary();
            let ob = s.outer_boundary();
            prop_assert!(ib.is_subset(&s));
            prop_assert!(ob.is_disjoint(&s));
            prop_assert_eq!(s.closure().len(), s.len() + ob.len());
            // every outer-boundary vertex touches the inner boundary
            for p in ob.iter() {
                let touches = VertexSet::neighbors_of(p).any(|q| ib.contains(&q));
                prop_assert!(touches);
            }
        }

        #[test]
        fn closure_inner_boundary_lies_in_outer_boundary(s in arb_set(2)) {
            prop_assert!(s.closure().inner_boundary().is_subset(&s.outer_boundary()));
        }
    }
}
