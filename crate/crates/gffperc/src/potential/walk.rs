use super::{green_asymptotic, require_transient};
use crate::lattice::{Metric, VertexSet};
use crate::par::{self, Execution};
use crate::rng::stream;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McCapacity {
    pub estimate: f64,
    pub stderr: f64,
    /// `2d Σ_x P̂_x[walk reaches radius R before returning]`, before correction.
    pub uncorrected: f64,
    pub radius: f64,
    pub walks_per_site: u64,
}

/// Random-walk capacity estimate.
///
/// From each `x ∈ K` walks run until they return to `K` or reach Euclidean
/// distance `R` from the centroid. A walk at distance `R` still returns with
/// probability about `cap(K) g(R)`, so with `c_R = 2d Σ_x P̂_x[escape]` the
/// estimate is `c_R / (1 + c_R g(R))`.
pub fn capacity_mc(set: &VertexSet, walks_per_site: u64, radius: f64, seed: u64, exec: Execution) -> Result<McCapacity> {
    let d = set.dim();
    require_transient(d)?;
    if walks_per_site == 0 {
        return Err(Error::precondition("capacity_mc needs at least one walk per site"));
    }
    if set.is_empty() {
        return Err(Error::precondition("capacity_mc of the empty set"));
    }
    let diam = set.diameter(Metric::LInf).unwrap_or(0) as f64;
    if radius <= 2.0 * diam.max(0.5) {
        return Err(Error::precondition(format!("escape radius {radius} must exceed twice the diameter {diam}")));
    }
    let pts = set.to_vec();
    let centroid: Vec<f64> = (0..d).map(|j| pts.iter().map(|p| p[j] as f64).sum::<f64>() / pts.len() as f64).collect();
    let bbox = set.bounding_region().unwrap();
    let mut mask = vec![false; bbox.len()];
    for p in &pts {
        mask[bbox.index(p).unwrap()] = true;
    }
    let r2 = radius * radius;
    let escapes = par::map(exec, pts.len(), |site| {
        let mut rng = stream(seed, site as u64);
        let mut hits = 0u64;
        let mut pos = vec![0i64; d];
        for _ in 0..walks_per_site {
            pos.copy_from_slice(&pts[site]);
            loop {
                let dir = rng.random_range(0..2 * d);
                pos[dir / 2] += if dir % 2 == 0 { 1 } else { -1 };
                if let Some(i) = bbox.index(&pos) {
                    if mask[i] {
                        break;
                    }
                }
                let dist2: f64 = pos.iter().zip(&centroid).map(|(&a, b)| (a as f64 - b).powi(2)).sum();
                if dist2 >= r2 {
                    hits += 1;
                    break;
                }
            }
        }
        hits
    });
    let deg = 2.0 * d as f64;
    let w = walks_per_site as f64;
    let mut raw = 0.0;
    let mut var = 0.0;
    for &h in &escapes {
        let p = h as f64 / w;
        raw += deg * p;
        var += deg * deg * p * (1.0 - p) / w;
    }
    let g_r = green_asymptotic(d, radius);
    let denom = 1.0 + raw * g_r;
    Ok(McCapacity {
        estimate: raw / denom,
        stderr: var.sqrt() / (denom * denom),
        uncorrected: raw,
        radius,
        walks_per_site,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{capacity, FreeGreen};

    #[test]
    fn singleton_estimate_is_within_three_stderr() {
        let k = VertexSet::from_points(3, [vec![0, 0, 0]]).unwrap();
        let mc = capacity_mc(&k, 4000, 30.0, 5, Execution::default()).unwrap();
        let exact = capacity(&k, &FreeGreen::new(3, 1e-10).unwrap()).unwrap();
        assert!((mc.estimate - exact).abs() < 3.0 * mc.stderr, "{mc:?} vs {exact}");
    }

    #[test]
    fn invalid_arguments() {
        let k = VertexSet::from_points(3, [vec![0, 0, 0], vec![3, 0, 0]]).unwrap();
        assert!(capacity_mc(&k, 0, 30.0, 1, Execution::Sequential).is_err());
        assert!(capacity_mc(&k, 10, 6.0, 1, Execution::Sequential).is_err());
        let flat = VertexSet::from_points(2, [vec![0, 0]]).unwrap();
        assert!(capacity_mc(&flat, 10, 6.0, 1, Execution::Sequential).is_err());
    }

    #[test]
    fn execution_modes_agree() {
        let k = VertexSet::from_points(3, [vec![0, 0, 0], vec![1, 0, 0]]).unwrap();
        let a = capacity_mc(&k, 200, 10.0, 9, Execution::Sequential).unwrap();
        let b = capacity_mc(&k, 200, 10.0, 9, Execution::Parallel).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    }
}
