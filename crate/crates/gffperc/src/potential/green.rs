use super::require_transient;
use crate::lattice::Point;
use crate::solver::gauss_legendre;
use crate::{Error, Result};
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::sync::RwLock;

/// `e^{−t} I_n(t)` for `n = 0..=nmax`, by Miller's backward recurrence
/// normalised with `e^t = I_0(t) + 2 Σ_{k≥1} I_k(t)`.
pub fn scaled_bessel_i(nmax: usize, t: f64) -> Vec<f64> {
    let mut vals = vec![0.0; nmax + 1];
    if t <= 0.0 {
        vals[0] = 1.0;
        return vals;
    }
    let start = nmax + 20 + (10.0 * t.sqrt()).ceil() as usize;
    let mut above = 0.0f64;
    let mut cur = 1e-280f64;
    let mut sum = 0.0f64;
    for k in (1..=start).rev() {
        let below = (2.0 * k as f64 / t) * cur + above;
        sum += 2.0 * cur;
        if k <= nmax {
            vals[k] = cur;
        }
        above = cur;
        cur = below;
        if cur > 1e250 {
            above *= 1e-250;
            cur *= 1e-250;
            sum *= 1e-250;
            vals.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    vals[0] = cur;
    sum += cur;
    vals.iter_mut().for_each(|v| *v /= sum);
    vals
}

/// Coefficients of the large-`t` expansion `√(2πt) e^{−t} I_n(t) ≈ Σ_k c_k t^{−k}`.
fn bessel_asymptotic_coeffs(n: u32, terms: usize) -> Vec<f64> {
    let mu = 4.0 * (n as f64).powi(2);
    let mut c = vec![1.0; terms];
    for k in 1..terms {
        c[k] = -c[k - 1] * (mu - ((2 * k - 1) as f64).powi(2)) / (8.0 * k as f64);
    }
    c
}

const TAIL_TERMS: usize = 10;
const GL_HIGH: usize = 24;
const GL_LOW: usize = 16;

/// Free lattice Green function `g(0, x)` evaluated through
/// `g(0,x) = ½ ∫_0^∞ Π_j e^{−t} I_{x_j}(t) dt`: Gauss–Legendre on dyadic
/// panels up to `T ≫ max|x_j|²`, then the asymptotic series integrated exactly.
///
/// Values are memoised by canonical displacement (sorted absolute coordinates),
/// which is exact by the lattice symmetries.
#[derive(Debug)]
pub struct FreeGreen {
    d: usize,
    tol: f64,
    table: RwLock<HashMap<Vec<u32>, f64>>,
}

impl FreeGreen {
    pub fn new(d: usize, tol: f64) -> Result<Self> {
        require_transient(d)?;
        if !(tol > 0.0) {
            return Err(Error::precondition("Green tolerance must be positive"));
        }
        Ok(FreeGreen { d, tol, table: RwLock::new(HashMap::new()) })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn canonical(x: &[i64]) -> Vec<u32> {
        let mut k: Vec<u32> = x.iter().map(|c| c.unsigned_abs() as u32).collect();
        k.sort_unstable();
        k
    }

    pub fn value(&self, x: &[i64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let key = Self::canonical(x);
        if let Some(v) = self.table.read().unwrap().get(&key) {
            return Ok(*v);
        }
        self.ensure(std::iter::once(key.clone()))?;
        Ok(self.table.read().unwrap()[&key])
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.d {
            return Err(Error::geometry(format!("displacement of dimension {d} for a d = {} Green function", self.d)));
        }
        Ok(())
    }

    /// Computes every missing canonical displacement in one quadrature pass.
    pub fn ensure(&self, keys: impl IntoIterator<Item = Vec<u32>>) -> Result<()> {
        let missing: Vec<Vec<u32>> = {
            let table = self.table.read().unwrap();
            let mut m: Vec<Vec<u32>> = keys.into_iter().filter(|k| !table.contains_key(k)).collect();
            m.sort_unstable();
            m.dedup();
            m
        };
        if missing.is_empty() {
            return Ok(());
        }
        let values = evaluate(self.d, &missing, self.tol)?;
        let mut table = self.table.write().unwrap();
        for (k, v) in missing.into_iter().zip(values) {
            table.insert(k, v);
        }
        Ok(())
    }

    /// Matrix `[g(x_i − x_j)]`.
    pub fn matrix(&self, pts: &[Point]) -> Result<DMatrix<f64>> {
        let n = pts.len();
        for p in pts {
            self.check_dim(p.len())?;
        }
        let diff = |i: usize, j: usize| -> Vec<u32> {
            let mut k: Vec<u32> = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).unsigned_abs() as u32).collect();
            k.sort_unstable();
            k
        };
        let mut keys = std::collections::HashSet::new();
        for i in 0..n {
            for j in i..n {
                keys.insert(diff(i, j));
            }
        }
        self.ensure(keys)?;
        let table = self.table.read().unwrap();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = table[&diff(i, j)];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// Sorted `(canonical displacement, value)` pairs computed so far.
    pub fn entries(&self) -> Vec<(Vec<u32>, f64)> {
        let mut e: Vec<(Vec<u32>, f64)> = self.table.read().unwrap().iter().map(|(k, v)| (k.clone(), *v)).collect();
        e.sort_by(|a, b| a.0.cmp(&b.0));
        e
    }

    /// Seeds the memo table, e.g. from a cache file.
    pub fn preload(&self, entries: impl IntoIterator<Item = (Vec<u32>, f64)>) {
        let mut table = self.table.write().unwrap();
        for (k, v) in entries {
            if k.len() == self.d {
                let mut k = k;
                k.sort_unstable();
                table.insert(k, v);
            }
        }
    }
}

fn evaluate(d: usize, keys: &[Vec<u32>], tol: f64) -> Result<Vec<f64>> {
    let nmax = keys.iter().flat_map(|k| k.iter()).copied().max().unwrap_or(0) as usize;
    let target = (32 * (nmax + 1) * (nmax + 1)).max(256) as f64;
    let t_max = 2f64.powi(target.log2().ceil() as i32);
    let mut best = None;
    for refine in 0..3u32 {
        let mut edges = vec![0.0, 0.25, 0.5];
        let mut t = 1.0;
        while t <= t_max {
            edges.push(t);
            t *= 2.0;
        }
        let parts = 1usize << refine;
        let (xh, wh) = gauss_legendre(GL_HIGH);
        let (xl, wl) = gauss_legendre(GL_LOW);
        let mut high = vec![0.0; keys.len()];
        let mut low = vec![0.0; keys.len()];
        for win in edges.windows(2) {
            let step = (win[1] - win[0]) / parts as f64;
            for p in 0..parts {
                let a = win[0] + p as f64 * step;
                let b = a + step;
                let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
                for (rule, xs, ws) in [(&mut high, &xh, &wh), (&mut low, &xl, &wl)] {
                    for (x, w) in xs.iter().zip(ws) {
                        let bes = scaled_bessel_i(nmax, mid + half * x);
                        for (acc, key) in rule.iter_mut().zip(keys) {
                            *acc += half * w * key.iter().map(|&n| bes[n as usize]).product::<f64>();
                        }
                    }
                }
            }
        }
        let mut err = 0.0f64;
        let vals: Vec<f64> = keys
            .iter()
            .enumerate()
            .map(|(i, key)| {
                err = err.max(0.5 * (high[i] - low[i]).abs());
                0.5 * (high[i] + tail(d, key, t_max))
            })
            .collect();
        if err <= tol {
            return Ok(vals);
        }
        best = Some(err);
    }
    Err(Error::Accuracy { requested: tol, achieved: best.unwrap_or(f64::NAN) })
}

/// `∫_T^∞ Π_j e^{−t} I_{n_j}(t) dt` from the asymptotic series.
fn tail(d: usize, key: &[u32], t: f64) -> f64 {
    let mut poly = vec![0.0; TAIL_TERMS];
    poly[0] = 1.0;
    for &n in key {
        let c = bessel_asymptotic_coeffs(n, TAIL_TERMS);
        let mut next = vec![0.0; TAIL_TERMS];
        for i in 0..TAIL_TERMS {
            for j in 0..TAIL_TERMS - i {
                next[i + j] += poly[i] * c[j];
            }
        }
        poly = next;
    }
    let half = d as f64 / 2.0;
    let pref = (2.0 * std::f64::consts::PI).powf(-half);
    pref * poly
        .iter()
        .enumerate()
        .map(|(k, c)| c * t.powf(1.0 - half - k as f64) / (half + k as f64 - 1.0))
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Watson's integral in closed form, an oracle independent of the quadrature.
    fn watson_simple_cubic() -> f64 {
        use statrs::function::gamma::gamma;
        let pi = std::f64::consts::PI;
        6f64.sqrt() / (32.0 * pi.powi(3)) * gamma(1.0 / 24.0) * gamma(5.0 / 24.0) * gamma(7.0 / 24.0) * gamma(11.0 / 24.0)
    }

    #[test]
    fn origin_value_matches_watson_constant() {
        let g = FreeGreen::new(3, 1e-11).unwrap();
        let w = watson_simple_cubic();
        assert_relative_eq!(w, 1.516_386_059_151_978, epsilon = 1e-12);
        assert_relative_eq!(g.value(&[0, 0, 0]).unwrap(), w / 6.0, epsilon = 1e-10);
    }

    #[test]
    fn neighbour_value_from_harmonicity() {
        let g = FreeGreen::new(3, 1e-11).unwrap();
        let g0 = g.value(&[0, 0, 0]).unwrap();
        assert_relative_eq!(g.value(&[1, 0, 0]).unwrap(), g0 - 1.0 / 6.0, epsilon = 1e-10);
        assert_eq!(g.value(&[0, -1, 0]).unwrap(), g.value(&[0, 0, 1]).unwrap());
    }

    #[test]
    fn harmonic_away_from_origin() {
        let g = FreeGreen::new(3, 1e-11).unwrap();
        for x in [[1i64, 0, 0], [2, 1, 0], [3, 3, 1], [7, 0, 2], [12, 5, 9]] {
            let mut lap = -6.0 * g.value(&x).unwrap();
            for j in 0..3 {
                for s in [-1, 1] {
                    let mut y = x;
                    y[j] += s;
                    lap += g.value(&y).unwrap();
                }
            }
            assert!(lap.abs() < 1e-9, "Δg({x:?}) = {lap}");
        }
    }

    #[test]
    fn decays_like_inverse_distance() {
        let g = FreeGreen::new(3, 1e-11).unwrap();
        let c = 1.0 / (4.0 * std::f64::consts::PI);
        for x in [[20i64, 0, 0], [15, 15, 15], [30, 10, 0]] {
            let r = (x.iter().map(|c| (c * c) as f64).sum::<f64>()).sqrt();
            let v = g.value(&x).unwrap() * r;
            assert!((v - c).abs() < 2e-3 * c, "g·r = {v} at {x:?}");
        }
    }

    #[test]
    fn four_dimensional_return_constant() {
        // expected number of visits to the origin in d = 4 is 1.23946712…
        let g = FreeGreen::new(4, 1e-11).unwrap();
        assert_relative_eq!(8.0 * g.value(&[0, 0, 0, 0]).unwrap(), 1.239_467_121, epsilon = 1e-8);
    }

    #[test]
    fn scaled_bessel_small_argument_series() {
        let t = 0.3f64;
        let b = scaled_bessel_i(3, t);
        // I_2(t) = (t/2)^2/2 · (1 + (t/2)^2/3 + …)
        let fact = |n: i32| (1..=n).map(f64::from).product::<f64>();
        let i2: f64 = (0..10).map(|k| (t / 2.0).powi(2 * k + 2) / fact(k) / fact(k + 2)).sum();
        assert_relative_eq!(b[2], (-t).exp() * i2, epsilon = 1e-14);
    }

    #[test]
    fn low_dimensions_are_errors() {
        assert!(FreeGreen::new(2, 1e-8).is_err());
    }
}
