use crate::lattice::{Region, VertexSet};
use crate::solver::{CgOptions, MaskedLaplacian};
use crate::{Error, Result};

/// Column `y ↦ g_D(·, y)` of the Green function killed outside `domain`.
pub fn killed_green_column(domain: &Region, y: &[i64], opts: CgOptions) -> Result<Vec<f64>> {
    let iy = domain
        .index(y)
        .ok_or_else(|| Error::geometry(format!("{y:?} lies outside the domain")))?;
    let free = vec![true; domain.len()];
    let mut b = vec![0.0; domain.len()];
    b[iy] = 1.0;
    Ok(MaskedLaplacian::new(domain, &free).solve(&b, opts)?.x)
}

/// `f = P_·[H_K < T_domain]`: one on `K`, harmonic on `domain ∖ K`, zero outside.
#[derive(Clone, Debug)]
pub struct HarmonicPotential {
    pub domain: Region,
    pub values: Vec<f64>,
    /// Flat indices of the sites of `K` with positive `−Δf`.
    pub support: Vec<usize>,
    /// `−Δf` on `support`, the equilibrium measure of `K` relative to the domain.
    pub weights: Vec<f64>,
    /// `Σ weights = E(f, f)`.
    pub capacity: f64,
}

impl HarmonicPotential {
    /// `E(f, φ) = Σ_x (−Δf)(x) φ(x)` for a field on the same domain.
    pub fn energy_with(&self, field: &[f64]) -> f64 {
        self.support.iter().zip(&self.weights).map(|(&i, w)| w * field[i]).sum()
    }
}

pub fn harmonic_potential(set: &VertexSet, domain: &Region, opts: CgOptions) -> Result<HarmonicPotential> {
    let mut in_set = vec![false; domain.len()];
    for p in set.iter() {
        let i = domain
            .index(p)
            .ok_or_else(|| Error::geometry(format!("{p:?} lies outside the domain")))?;
        in_set[i] = true;
    }
    let free: Vec<bool> = in_set.iter().map(|&k| !k).collect();
    let mut b = vec![0.0; domain.len()];
    for i in 0..domain.len() {
        if free[i] {
            domain.for_each_neighbor(i, |j| {
                if in_set[j] {
                    b[i] += 1.0;
                }
            });
        }
    }
    let mut values = if set.is_empty() {
        vec![0.0; domain.len()]
    } else {
        MaskedLaplacian::new(domain, &free).solve(&b, opts)?.x
    };
    let mut support = Vec::new();
    let mut weights = Vec::new();
    for i in 0..domain.len() {
        if !in_set[i] {
            continue;
        }
        values[i] = 1.0;
        let mut e = domain.outside_neighbors(i) as f64;
        domain.for_each_neighbor(i, |j| {
            if !in_set[j] {
                e += 1.0 - values[j];
            }
        });
        if e > 0.0 {
            support.push(i);
            weights.push(e);
        }
    }
    let capacity = weights.iter().sum();
    Ok(HarmonicPotential { domain: domain.clone(), values, support, weights, capacity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{capacity, dirichlet_energy, FreeGreen};
    use approx::assert_relative_eq;

    #[test]
    fn killed_green_deficit_is_an_exit_average_of_free_green() {
        // g(0,0) − g_D(0,0) = E_0[g(X_T)] lies between the extremes of g on the exit sites
        let domain = Region::centered(3, 41).unwrap();
        let col = killed_green_column(&domain, &[0, 0, 0], CgOptions::default()).unwrap();
        let green = FreeGreen::new(3, 1e-11).unwrap();
        let deficit = green.value(&[0, 0, 0]).unwrap() - col[domain.index(&[0, 0, 0]).unwrap()];
        let face = green.value(&[21, 0, 0]).unwrap();
        let corner = green.value(&[21, 20, 20]).unwrap();
        assert!(corner < deficit && deficit < face, "{corner} < {deficit} < {face}");
        assert!(killed_green_column(&domain, &[40, 0, 0], CgOptions::default()).is_err());
    }

    #[test]
    fn killed_green_is_symmetric() {
        let domain = Region::cube(3, 0, 9).unwrap();
        let (x, y) = ([2i64, 3, 4], [6i64, 1, 5]);
        let gx = killed_green_column(&domain, &x, CgOptions::default()).unwrap();
        let gy = killed_green_column(&domain, &y, CgOptions::default()).unwrap();
        assert_relative_eq!(gx[domain.index(&y).unwrap()], gy[domain.index(&x).unwrap()], epsilon = 1e-11);
    }

    #[test]
    fn domain_capacity_decreases_towards_free_capacity() {
        let k = VertexSet::from_points(3, [vec![0, 0, 0], vec![1, 0, 0], vec![0, 1, 0]]).unwrap();
        let free_cap = capacity(&k, &FreeGreen::new(3, 1e-11).unwrap()).unwrap();
        let mut last = f64::INFINITY;
        for side in [9, 17, 33] {
            let hp = harmonic_potential(&k, &Region::centered(3, side).unwrap(), CgOptions::default()).unwrap();
            assert!(hp.capacity > free_cap && hp.capacity < last);
            let energy = dirichlet_energy(&hp.domain, &hp.values, &hp.values).unwrap();
            assert_relative_eq!(energy, hp.capacity, max_relative = 1e-8);
            last = hp.capacity;
        }
        assert!(last - free_cap < 0.05 * free_cap);
    }
}
