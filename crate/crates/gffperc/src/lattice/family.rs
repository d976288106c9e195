use super::{BoxKind, Enlargement, LBox, Region, VertexSet};
use crate::{Error, Result};
use std::collections::BTreeSet;

/// Scale-`L` boxes meeting `set`.
pub fn boxes_hit(set: &VertexSet, scale: i64) -> BTreeSet<LBox> {
    set.iter().map(|p| LBox::containing(p, scale)).collect()
}

/// Boxes of `boxes` with at least one face-neighbour outside the family.
pub fn coarse_inner_boundary(boxes: &BTreeSet<LBox>) -> BTreeSet<LBox> {
    boxes
        .iter()
        .filter(|b| b.neighbors().iter().any(|n| !boxes.contains(n)))
        .cloned()
        .collect()
}

fn k_disjoint(a: &LBox, b: &LBox, enl: &Enlargement) -> bool {
    a.kind(BoxKind::K, enl).intersect(&b.kind(BoxKind::K, enl)).is_none()
}

pub fn is_well_separated(family: &[LBox], enl: &Enlargement) -> bool {
    family
        .iter()
        .enumerate()
        .all(|(i, a)| family[i + 1..].iter().all(|b| k_disjoint(a, b, enl)))
}

/// Greedy maximal well-separated subfamily, scanning larger scales first and
/// anchors in increasing order within a scale.
pub fn maximal_well_separated(family: &[LBox], enl: &Enlargement) -> Vec<LBox> {
    let mut order: Vec<&LBox> = family.iter().collect();
    order.sort_by(|a, b| b.scale.cmp(&a.scale).then_with(|| a.anchor.cmp(&b.anchor)));
    order.dedup();
    let mut kept: Vec<LBox> = Vec::new();
    for b in order {
        if kept.iter().all(|k| k_disjoint(k, b, enl)) {
            kept.push(b.clone());
        }
    }
    kept
}

/// Partition of `region` into `cell`-boxes grouped into columns parallel to `axis`.
/// Columns are listed by the anchors of their first cell; cells within a column
/// by increasing coordinate along `axis`.
pub fn columns(region: &Region, cell: i64, axis: usize) -> Result<Vec<Vec<LBox>>> {
    let d = region.dim();
    if axis >= d {
        return Err(Error::geometry(format!("axis {axis} out of range for dimension {d}")));
    }
    if cell < 1 || region.shape().iter().any(|&s| s as i64 % cell != 0) {
        return Err(Error::geometry(format!(
            "cell size {cell} does not divide region sides {:?}",
            region.shape()
        )));
    }
    let counts: Vec<usize> = region.shape().iter().map(|&s| s / cell as usize).collect();
    let cross = Region::new(vec![0; d], counts.iter().enumerate().map(|(j, &c)| if j == axis { 1 } else { c }).collect())?;
    let mut out = Vec::with_capacity(cross.len());
    for base in cross.points() {
        let mut col = Vec::with_capacity(counts[axis]);
        for k in 0..counts[axis] as i64 {
            let anchor: Vec<i64> = (0..d)
                .map(|j| region.lo()[j] + cell * if j == axis { k } else { base[j] })
                .collect();
            col.push(LBox::new(cell, anchor)?);
        }
        out.push(col);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn side_eight_cell_two_gives_sixteen_columns_of_four() {
        let r = Region::cube(3, 0, 8).unwrap();
        let cols = columns(&r, 2, 0).unwrap();
        assert_eq!(cols.len(), 16);
        assert!(cols.iter().all(|c| c.len() == 4));
        assert!(columns(&r, 3, 0).is_err());
    }

    #[test]
    fn box_meeting_set_and_its_coarse_boundary() {
        let s = VertexSet::from_region(&Region::cube(3, 0, 4).unwrap());
        let hit = boxes_hit(&s, 2);
        assert_eq!(hit.len(), 8);
        assert_eq!(coarse_inner_boundary(&hit).len(), 8);
        let big = VertexSet::from_region(&Region::cube(3, 0, 6).unwrap());
        let hit = boxes_hit(&big, 2);
        assert_eq!(hit.len(), 27);
        assert_eq!(coarse_inner_boundary(&hit).len(), 26);
    }

    #[test]
    fn random_family_is_well_separated_and_maximal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let enl = Enlargement::default();
        let family: Vec<LBox> = (0..100)
            .map(|_| LBox::new(2, (0..3).map(|_| 2 * rng.random_range(0..300i64)).collect()).unwrap())
            .collect();
        let kept = maximal_well_separated(&family, &enl);
        assert!(is_well_separated(&kept, &enl));
        for b in &family {
            if !kept.contains(b) {
                assert!(kept.iter().any(|k| !k_disjoint(k, b, &enl)), "{b:?} could be added");
            }
        }
    }

    proptest! {
        #[test]
        fn single_scale_selection_keeps_a_fixed_fraction(
            anchors in prop::collection::vec(prop::collection::vec(-60i64..60, 2), 1..80)
        ) {
            let enl = Enlargement::default();
            let family: Vec<LBox> = anchors.into_iter().map(|a| LBox::containing(&a, 1)).collect();
            let mut distinct = family.clone();
            distinct.sort();
            distinct.dedup();
            let kept = maximal_well_separated(&family, &enl);
            prop_assert!(is_well_separated(&kept, &enl));
            prop_assert!(kept.len() as f64 >= distinct.len() as f64 * 201f64.powi(-2));
        }

        #[test]
        fn mixed_scales_prefer_larger_boxes(x in 0i64..40, y in 0i64..40) {
            let enl = Enlargement::compact();
            let big = LBox::containing(&[x * 4, y * 4], 8);
            let small = LBox::containing(&[x * 4 + 1, y * 4], 1);
            let kept = maximal_well_separated(&[small, big.clone()], &enl);
            prop_assert_eq!(kept, vec![big]);
        }
    }
}
