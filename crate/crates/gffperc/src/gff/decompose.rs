use super::FieldSample;
use crate::lattice::{BoxKind, Enlargement, LBox, Region};
use crate::solver::SineBasis;
use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Sine bases keyed by box shape; the Dirichlet solve is translation invariant.
#[derive(Debug, Default)]
pub struct BasisCache {
    bases: Mutex<HashMap<Vec<usize>, Arc<SineBasis>>>,
}

impl BasisCache {
    pub fn get(&self, region: &Region) -> Arc<SineBasis> {
        let mut map = self.bases.lock().unwrap();
        map.entry(region.shape().to_vec())
            .or_insert_with(|| {
                let origin = Region::new(vec![0; region.dim()], region.shape().to_vec()).unwrap();
                Arc::new(SineBasis::new(&origin))
            })
            .clone()
    }
}

/// `φ = ξ + ψ` around a base box: `ξ` is harmonic in `region` and equals `φ`
/// outside it, `ψ = φ − ξ` vanishes outside `region`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub base: LBox,
    /// The field's domain; `xi` and `psi` are indexed by it.
    pub domain: Region,
    pub region: Region,
    /// `ξ` on the field's domain.
    pub xi: Vec<f64>,
    /// `ψ` on the field's domain.
    pub psi: Vec<f64>,
}

/// Harmonic extension into `region ⊆ domain` of the field's values outside it.
pub fn harmonic_extension(phi: &FieldSample, region: &Region, cache: &BasisCache) -> Result<Vec<f64>> {
    let domain = &phi.domain;
    if !domain.contains_region(region) {
        return Err(Error::geometry("extension region must lie in the field's domain"));
    }
    let mut rhs = vec![0.0; region.len()];
    let mut xr = vec![0i64; region.dim()];
    let mut y = vec![0i64; region.dim()];
    for (k, r) in rhs.iter_mut().enumerate() {
        region.point_into(k, &mut xr);
        for j in 0..region.dim() {
            for s in [-1i64, 1] {
                y.copy_from_slice(&xr);
                y[j] += s;
                if !region.contains(&y) {
                    *r += phi.value(&y);
                }
            }
        }
    }
    let inside = cache.get(region).solve(&rhs);
    let mut xi = phi.values.clone();
    for (k, v) in inside.into_iter().enumerate() {
        region.point_into(k, &mut xr);
        xi[domain.index(&xr).unwrap()] = v;
    }
    Ok(xi)
}

fn split(phi: &FieldSample, base: &LBox, region: Region, cache: &BasisCache) -> Result<Decomposition> {
    let xi = harmonic_extension(phi, &region, cache)?;
    let psi = phi.values.iter().zip(&xi).map(|(p, x)| p - x).collect();
    Ok(Decomposition { base: base.clone(), domain: phi.domain.clone(), region, xi, psi })
}

/// Decomposition with respect to the K-kind enlargement of `base`, which must
/// lie strictly inside the field's domain.
pub fn decompose(phi: &FieldSample, base: &LBox, enl: &Enlargement, cache: &BasisCache) -> Result<Decomposition> {
    let k = base.kind(BoxKind::K, enl);
    if !phi.domain.strictly_contains(&k) {
        return Err(Error::geometry(format!("enlargement {k:?} is not strictly inside the domain")));
    }
    split(phi, base, k, cache)
}

/// Decomposition with respect to the K-kind enlargement intersected with the
/// domain. The field vanishes outside the domain, so this is the Markov
/// decomposition of the killed field for that smaller set.
pub fn decompose_clipped(phi: &FieldSample, base: &LBox, enl: &Enlargement, cache: &BasisCache) -> Result<Decomposition> {
    let k = base
        .kind(BoxKind::K, enl)
        .intersect(&phi.domain)
        .ok_or_else(|| Error::geometry("enlargement misses the domain"))?;
    split(phi, base, k, cache)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gff::Sampler;

    fn setup() -> (Sampler, LBox, Enlargement) {
        let domain = Region::centered(3, 13).unwrap();
        (Sampler::new(&domain), LBox::new(1, vec![0, 0, 0]).unwrap(), Enlargement::compact())
    }

    #[test]
    fn parts_sum_to_the_field_and_psi_vanishes_outside() {
        let (s, b, enl) = setup();
        let phi = s.sample(1, 0);
        let dec = decompose(&phi, &b, &enl, &BasisCache::default()).unwrap();
        for i in 0..phi.values.len() {
            assert!((dec.xi[i] + dec.psi[i] - phi.values[i]).abs() < 1e-12);
            if !dec.region.contains(&phi.domain.point(i)) {
                assert_eq!(dec.psi[i], 0.0);
            }
        }
    }

    #[test]
    fn xi_is_harmonic_inside_the_enlargement() {
        let (s, b, enl) = setup();
        let phi = s.sample(2, 0);
        let dec = decompose(&phi, &b, &enl, &BasisCache::default()).unwrap();
        let domain = &phi.domain;
        for k in 0..dec.region.len() {
            let x = dec.region.point(k);
            let i = domain.index(&x).unwrap();
            let mut lap = -6.0 * dec.xi[i];
            domain.for_each_neighbor(i, |j| lap += dec.xi[j]);
            assert!(lap.abs() < 1e-10);
        }
    }

    #[test]
    fn decomposition_is_linear_in_the_field() {
        let (s, b, enl) = setup();
        let cache = BasisCache::default();
        let (p1, p2) = (s.sample(3, 0), s.sample(3, 1));
        let mut mix = p1.clone();
        for i in 0..mix.values.len() {
            mix.values[i] = 2.0 * p1.values[i] - 0.5 * p2.values[i];
        }
        let (d1, d2, dm) = (
            decompose(&p1, &b, &enl, &cache).unwrap(),
            decompose(&p2, &b, &enl, &cache).unwrap(),
            decompose(&mix, &b, &enl, &cache).unwrap(),
        );
        for i in 0..mix.values.len() {
            assert!((dm.xi[i] - 2.0 * d1.xi[i] + 0.5 * d2.xi[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn enlargement_must_fit_strictly() {
        let (s, _, _) = setup();
        let phi = s.sample(4, 0);
        let b = LBox::new(1, vec![0, 0, 0]).unwrap();
        assert!(decompose(&phi, &b, &Enlargement::default(), &BasisCache::default()).is_err());
        let clipped = decompose_clipped(&phi, &b, &Enlargement::default(), &BasisCache::default()).unwrap();
        // the clipped region is the whole domain, where the extension of zero data is zero
        assert!(clipped.xi.iter().all(|v| v.abs() < 1e-12));
    }
}
