//! Linear algebra for the lattice Laplacian: conjugate gradients on masked
//! regions, and the sine basis that diagonalises the Dirichlet Laplacian of a box.

use crate::lattice::Region;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    /// Relative residual `‖b − Ax‖ / ‖b‖` at which to stop.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions { tol: 1e-12, max_iter: 20_000 }
    }
}

#[derive(Clone, Debug)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

pub fn conjugate_gradient(apply: impl Fn(&[f64], &mut [f64]), b: &[f64], opts: CgOptions) -> Result<CgSolution> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgSolution { x, iterations: 0, relative_residual: 0.0 });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 0..opts.max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::numeric("conjugate gradients met a non-positive curvature"));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= opts.tol * bnorm {
            return Ok(CgSolution { x, iterations: it + 1, relative_residual: rr_new.sqrt() / bnorm });
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::Accuracy { requested: opts.tol, achieved: rr.sqrt() / bnorm })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `−Δ` on the sites of `region` flagged in `free`, with zero values outside
/// the region and on unflagged sites.
pub struct MaskedLaplacian<'a> {
    region: &'a Region,
    free: &'a [bool],
}

impl<'a> MaskedLaplacian<'a> {
    pub fn new(region: &'a Region, free: &'a [bool]) -> Self {
        assert_eq!(region.len(), free.len());
        MaskedLaplacian { region, free }
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let deg = 2.0 * self.region.dim() as f64;
        for i in 0..u.len() {
            if !self.free[i] {
                out[i] = 0.0;
                continue;
            }
            let mut s = deg * u[i];
            self.region.for_each_neighbor(i, |j| {
                if self.free[j] {
                    s -= u[j];
                }
            });
            out[i] = s;
        }
    }

    pub fn solve(&self, b: &[f64], opts: CgOptions) -> Result<CgSolution> {
        conjugate_gradient(|u, out| self.apply(u, out), b, opts)
    }
}

/// Orthonormal sine basis of a box: the eigenvectors of the Dirichlet Laplacian.
///
/// Along an axis of length `n` the basis matrix is
/// `S[i][k] = sqrt(2/(n+1)) · sin(π (i+1)(k+1) / (n+1))`, which is symmetric and
/// its own inverse, with eigenvalue `2 − 2 cos(π (k+1)/(n+1))`.
#[derive(Clone, Debug)]
pub struct SineBasis {
    region: Region,
    mats: Vec<Vec<f64>>,
    eigen: Vec<f64>,
}

impl SineBasis {
    pub fn new(region: &Region) -> Self {
        let mut mats = Vec::new();
        let mut axis_eigs = Vec::new();
        for &n in region.shape() {
            let scale = (2.0 / (n as f64 + 1.0)).sqrt();
            let theta = std::f64::consts::PI / (n as f64 + 1.0);
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    m[i * n + k] = scale * (theta * ((i + 1) * (k + 1)) as f64).sin();
                }
            }
            mats.push(m);
            axis_eigs.push((1..=n).map(|k| 2.0 - 2.0 * (theta * k as f64).cos()).collect::<Vec<_>>());
        }
        let eigen = (0..region.len())
            .map(|idx| {
                let mut rest = idx;
                let mut lam = 0.0;
                for j in (0..region.dim()).rev() {
                    let n = region.shape()[j];
                    lam += axis_eigs[j][rest % n];
                    rest /= n;
                }
                lam
            })
            .collect();
        SineBasis { region: region.clone(), mats, eigen }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    /// Eigenvalue of `−Δ` for each basis function, in flat index order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen
    }

    /// Applies the (self-inverse) basis change in place.
    pub fn transform(&self, v: &mut [f64]) {
        let shape = self.region.shape();
        let strides = self.region.strides();
        let total = v.len();
        let mut line = Vec::new();
        let mut out = Vec::new();
        for j in 0..shape.len() {
            let n = shape[j];
            let s = strides[j];
            let m = &self.mats[j];
            line.resize(n, 0.0);
            out.resize(n, 0.0);
            // line starts: indices with coordinate j equal to zero
            let block = n * s;
            for start_block in (0..total).step_by(block) {
                for off in 0..s {
                    let base = start_block + off;
                    for i in 0..n {
                        line[i] = v[base + i * s];
                    }
                    for i in 0..n {
                        let row = &m[i * n..(i + 1) * n];
                        out[i] = row.iter().zip(&line).map(|(a, b)| a * b).sum();
                    }
                    for i in 0..n {
                        v[base + i * s] = out[i];
                    }
                }
            }
        }
    }

    /// Solves `−Δ u = b` with zero boundary values outside the box.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut u = b.to_vec();
        self.transform(&mut u);
        for (x, lam) in u.iter_mut().zip(&self.eigen) {
            *x /= lam;
        }
        self.transform(&mut u);
        u
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert_relative_eq!(int, 2.0 / 19.0, epsilon = 1e-14);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn sine_transform_is_an_involution() {
        let r = Region::new(vec![0, 0, 0], vec![4, 5, 3]).unwrap();
        let basis = SineBasis::new(&r);
        let v: Vec<f64> = (0..r.len()).map(|i| (i as f64 * 0.7).cos()).collect();
        let mut w = v.clone();
        basis.transform(&mut w);
        basis.transform(&mut w);
        for (a, b) in v.iter().zip(&w) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn sine_solver_agrees_with_conjugate_gradients() {
        let r = Region::new(vec![0, 0, 0], vec![6, 7, 5]).unwrap();
        let b: Vec<f64> = (0..r.len()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let u = SineBasis::new(&r).solve(&b);
        let free = vec![true; r.len()];
        let cg = MaskedLaplacian::new(&r, &free).solve(&b, CgOptions::default()).unwrap();
        for (a, c) in u.iter().zip(&cg.x) {
            assert_relative_eq!(a, c, epsilon = 1e-9);
        }
    }
}
