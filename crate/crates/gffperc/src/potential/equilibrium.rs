use super::FreeGreen;
use crate::lattice::{Point, Region, VertexSet};
use crate::stats::{fit_line, LineFit};
use crate::{Error, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Largest support handled by the dense equilibrium solve.
pub const EXACT_LIMIT: usize = 4000;

/// Relative size below which negative equilibrium weights count as round-off.
const NEGATIVE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquilibriumMeasure {
    /// Inner boundary of the set; interior vertices carry zero weight.
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub capacity: f64,
    /// Squared ratio of extreme Cholesky pivots, a cheap condition estimate.
    pub condition_estimate: f64,
}

impl EquilibriumMeasure {
    fn empty() -> Self {
        EquilibriumMeasure { points: vec![], weights: vec![], capacity: 0.0, condition_estimate: 1.0 }
    }

    pub fn weight_of(&self, x: &[i64]) -> f64 {
        self.points
            .binary_search_by(|p| p.as_slice().cmp(x))
            .map_or(0.0, |i| self.weights[i])
    }

    /// `P_x[H_K < ∞] = Σ_y g(x, y) e_K(y)`.
    pub fn hitting_probability(&self, x: &[i64], green: &FreeGreen) -> Result<f64> {
        let mut s = 0.0;
        for (p, w) in self.points.iter().zip(&self.weights) {
            let diff: Vec<i64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
            s += w * green.value(&diff)?;
        }
        Ok(s)
    }
}

/// Solves `Σ_y g(x, y) e(y) = 1` on the inner boundary of `set`.
///
/// The equilibrium measure vanishes off the inner boundary, so restricting the
/// system there is exact.
pub fn equilibrium_exact(set: &VertexSet, green: &FreeGreen) -> Result<EquilibriumMeasure> {
    if set.is_empty() {
        return Ok(EquilibriumMeasure::empty());
    }
    let points = set.inner_boundary().to_vec();
    if points.len() > EXACT_LIMIT {
        return Err(Error::Size { size: points.len(), limit: EXACT_LIMIT });
    }
    let g = green.matrix(&points)?;
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::numeric("Green matrix is not positive definite"))?;
    let l = chol.l();
    let diag: Vec<f64> = (0..points.len()).map(|i| l[(i, i)]).collect();
    let (mn, mx) = diag.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let condition_estimate = (mx / mn).powi(2);
    if !condition_estimate.is_finite() || condition_estimate > 1e13 {
        return Err(Error::numeric(format!("Green matrix ill-conditioned (estimate {condition_estimate:e})")));
    }
    let e = chol.solve(&DVector::from_element(points.len(), 1.0));
    let top = e.iter().cloned().fold(0.0f64, f64::max);
    let mut weights = Vec::with_capacity(points.len());
    for (i, &w) in e.iter().enumerate() {
        if w < 0.0 {
            if w < -NEGATIVE_TOL * top {
                return Err(Error::numeric(format!("negative equilibrium weight {w:e} at {:?}", points[i])));
            }
            log::warn!("clipping equilibrium weight {w:e} at {:?} to zero", points[i]);
            weights.push(0.0);
        } else {
            weights.push(w);
        }
    }
    let capacity = weights.iter().sum();
    Ok(EquilibriumMeasure { points, weights, capacity, condition_estimate })
}

pub fn capacity(set: &VertexSet, green: &FreeGreen) -> Result<f64> {
    Ok(equilibrium_exact(set, green)?.capacity)
}

/// `cap(K) − Σ_{x∈K'} e_{K'}(x) P_x[H_K < ∞]` for `K ⊆ K'`; zero up to round-off.
pub fn sweeping_check(k: &VertexSet, k_outer: &VertexSet, green: &FreeGreen) -> Result<f64> {
    if !k.is_subset(k_outer) {
        return Err(Error::precondition("sweeping needs K ⊆ K'"));
    }
    let inner = equilibrium_exact(k, green)?;
    let outer = equilibrium_exact(k_outer, green)?;
    let mut swept = 0.0;
    for (x, w) in outer.points.iter().zip(&outer.weights) {
        let hit = if k.contains(x) { 1.0 } else { inner.hitting_probability(x, green)? };
        swept += w * hit;
    }
    Ok(inner.capacity - swept)
}

/// `(|K| / sup_x Σ_y g(x,y), |K| / inf_x Σ_y g(x,y))`, bracketing `cap(K)`.
pub fn cap_bounds(set: &VertexSet, green: &FreeGreen) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::precondition("capacity bounds of the empty set"));
    }
    let pts = set.to_vec();
    if pts.len() > EXACT_LIMIT {
        return Err(Error::Size { size: pts.len(), limit: EXACT_LIMIT });
    }
    let g = green.matrix(&pts)?;
    let sums: Vec<f64> = (0..pts.len()).map(|i| g.row(i).sum()).collect();
    let sup = sums.iter().cloned().fold(0.0f64, f64::max);
    let inf = sums.iter().cloned().fold(f64::INFINITY, f64::min);
    let n = pts.len() as f64;
    Ok((n / sup, n / inf))
}

/// `Σ_{x,y} ν(x) g(x, y) ν(y)`.
pub fn measure_energy(points: &[Point], weights: &[f64], green: &FreeGreen) -> Result<f64> {
    let g = green.matrix(points)?;
    let v = DVector::from_column_slice(weights);
    Ok(v.dot(&(&g * &v)))
}

/// `E(f, g) = Σ_{edges {x,y}} (f(x) − f(y)) (g(x) − g(y))` for fields on
/// `region` extended by zero; equals `−Σ_x Δf(x) g(x)`.
pub fn dirichlet_energy(region: &Region, f: &[f64], g: &[f64]) -> Result<f64> {
    if f.len() != region.len() || g.len() != region.len() {
        return Err(Error::precondition("fields do not match the region"));
    }
    let strides = region.strides();
    let shape = region.shape();
    let mut e = 0.0;
    for i in 0..region.len() {
        e += region.outside_neighbors(i) as f64 * f[i] * g[i];
        let mut rest = i;
        for j in (0..region.dim()).rev() {
            let c = rest % shape[j];
            rest /= shape[j];
            if c + 1 < shape[j] {
                let k = i + strides[j];
                e += (f[i] - f[k]) * (g[i] - g[k]);
            }
        }
    }
    Ok(e)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoxCapacityFit {
    pub scales: Vec<i64>,
    pub capacities: Vec<f64>,
    /// Slope of `log cap(B_L)` against `log L`.
    pub fit: LineFit,
    /// `cap(B_L) / L^{d−2}` at the largest scale.
    pub constant: f64,
}

/// Capacities of the cubes `[0, L)^d` and their log-log slope.
pub fn box_capacity_fit(green: &FreeGreen, scales: &[i64]) -> Result<BoxCapacityFit> {
    let d = green.dim();
    let mut capacities = Vec::new();
    for &l in scales {
        let cube = VertexSet::from_region(&Region::cube(d, 0, l as usize)?);
        capacities.push(capacity(&cube, green)?);
    }
    let xs: Vec<f64> = scales.iter().map(|&l| (l as f64).ln()).collect();
    let ys: Vec<f64> = capacities.iter().map(|c| c.ln()).collect();
    let fit = fit_line(&xs, &ys, None).ok_or_else(|| Error::precondition("need at least two distinct scales"))?;
    let last = *scales.last().unwrap();
    let constant = capacities.last().unwrap() / (last as f64).powi(d as i32 - 2);
    Ok(BoxCapacityFit { scales: scales.to_vec(), capacities, fit, constant })
}
