use crate::lattice::{label_components, Point, Region, VertexSet};
use crate::par::{self, Execution};
use crate::potential::{capacity, FreeGreen};
use crate::rng::stream;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

// Sizes up to which a trial stays cheap enough for thousands of repeats.
const MAX_SIDE_D2: i64 = 64;
const MAX_SIDE_D3: i64 = 16;
const MAX_SITES: i64 = 1 << 16;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Index of the column through `p` parallel to `e_axis`.
fn column_id(p: &[i64], axis: usize, l: i64) -> usize {
    p.iter().enumerate().filter(|&(j, _)| j != axis).fold(0usize, |acc, (_, &c)| acc * l as usize + c as usize)
}

/// Full columns of `present` (indexed by `[0, L)^d`) in each direction.
pub fn full_columns(d: usize, l: i64, present: &[bool]) -> Result<Vec<usize>> {
    let region = Region::cube(d, 0, l as usize)?;
    if present.len() != region.len() {
        return Err(Error::precondition("mask does not match the box"));
    }
    let per = (l as usize).pow(d as u32 - 1);
    let mut out = Vec::with_capacity(d);
    for axis in 0..d {
        let mut broken = vec![false; per];
        let mut x = vec![0i64; d];
        for (k, &on) in present.iter().enumerate() {
            if !on {
                region.point_into(k, &mut x);
                broken[column_id(&x, axis, l)] = true;
            }
        }
        out.push(broken.iter().filter(|b| !**b).count());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectedColumnsReport {
    pub d: usize,
    pub l: i64,
    pub x: f64,
    pub trials: u64,
    /// `1 − (2d − 1)! x`.
    pub bound: f64,
    /// Smallest largest-component fraction over the trials.
    pub min_fraction: f64,
    /// Smallest full-column fraction over trials and directions.
    pub min_full_fraction: f64,
    pub mean_deleted: f64,
    pub failures: u64,
}

impl ConnectedColumnsReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Deletion state with per-direction broken-column counters.
struct Carver {
    d: usize,
    l: i64,
    region: Region,
    present: Vec<bool>,
    hits: Vec<Vec<u32>>,
    broken: Vec<usize>,
    budget: usize,
}

impl Carver {
    fn new(d: usize, l: i64, x: f64) -> Result<Self> {
        let region = Region::cube(d, 0, l as usize)?;
        let per = (l as usize).pow(d as u32 - 1);
        Ok(Carver {
            d,
            l,
            present: vec![true; region.len()],
            region,
            hits: vec![vec![0; per]; d],
            broken: vec![0; d],
            budget: (x * per as f64).floor() as usize,
        })
    }

    /// Deletes `sites` if every direction keeps enough full columns.
    fn try_delete(&mut self, sites: &[Point]) -> bool {
        let fresh: BTreeSet<usize> = sites.iter().filter_map(|p| self.region.index(p)).filter(|&k| self.present[k]).collect();
        if fresh.is_empty() {
            return false;
        }
        let mut x = vec![0i64; self.d];
        for axis in 0..self.d {
            let mut newly = BTreeSet::new();
            for &k in &fresh {
                self.region.point_into(k, &mut x);
                let c = column_id(&x, axis, self.l);
                if self.hits[axis][c] == 0 {
                    newly.insert(c);
                }
            }
            if self.broken[axis] + newly.len() > self.budget {
                return false;
            }
        }
        for &k in &fresh {
            self.present[k] = false;
            self.region.point_into(k, &mut x);
            for axis in 0..self.d {
                let c = column_id(&x, axis, self.l);
                if self.hits[axis][c] == 0 {
                    self.broken[axis] += 1;
                }
                self.hits[axis][c] += 1;
            }
        }
        true
    }

    fn random_point(&self, rng: &mut impl Rng) -> Point {
        (0..self.d).map(|_| rng.random_range(0..self.l)).collect()
    }

    /// Sites of the cube `lo + [0, s)^d`, or only its faces when `shell`.
    fn cube(&self, lo: &[i64], s: i64, shell: bool) -> Vec<Point> {
        let Ok(r) = Region::new(lo.to_vec(), vec![s as usize; self.d]) else { return Vec::new() };
        r.points()
            .filter(|p| !shell || p.iter().zip(lo).any(|(&c, &a)| c == a || c == a + s - 1))
            .collect()
    }
}

/// One randomised `Γ` satisfying the column hypothesis: sites, cubes and
/// hollow cube shells are deleted while every direction keeps at least
/// `(1 − x)L^{d−1}` full columns. Shells cut their interior off the rest,
/// corner-anchored ones most cheaply.
fn carve(d: usize, l: i64, x: f64, seed: u64, trial: u64) -> Result<Carver> {
    let mut rng = stream(seed, trial);
    let mut c = Carver::new(d, l, x)?;
    let mode = trial % 4;
    let mut misses = 0;
    while misses < 32 {
        let pick = if mode == 3 { rng.random_range(0..3) } else { mode };
        let sites = match pick {
            0 => vec![c.random_point(&mut rng)],
            1 => {
                let s = rng.random_range(1..=((l + 2) / 3).max(1));
                let lo = c.random_point(&mut rng);
                c.cube(&lo, s, false)
            }
            _ => {
                let s = rng.random_range(3..=l.max(3));
                let lo: Point = (0..d)
                    .map(|_| match rng.random_range(0..3) {
                        0 => -1,
                        1 => l - s + 1,
                        _ => rng.random_range(-1..l),
                    })
                    .collect();
                c.cube(&lo, s, true)
            }
        };
        if c.try_delete(&sites) {
            misses = 0;
        } else {
            misses += 1;
        }
    }
    Ok(c)
}

/// Randomised and adversarial check that a set holding `(1 − x)L^{d−1}` full
/// columns per direction has a component of size `(1 − (2d − 1)! x) L^d`.
pub fn connected_columns_check(d: usize, l: i64, x: f64, trials: u64, seed: u64, exec: Execution) -> Result<ConnectedColumnsReport> {
    if d < 2 || l < 1 {
        return Err(Error::precondition(format!("need d ≥ 2 and L ≥ 1, got d = {d}, L = {l}")));
    }
    let too_big = match d {
        2 => l > MAX_SIDE_D2,
        3 => l > MAX_SIDE_D3,
        _ => l.checked_pow(d as u32).is_none_or(|n| n > MAX_SITES),
    };
    if too_big {
        return Err(Error::precondition(format!("L = {l} in d = {d} exceeds the brute-force size")));
    }
    let fact = factorial(2 * d - 1);
    if !(x > 0.0 && x < 1.0 / fact) {
        return Err(Error::precondition(format!("x = {x} must lie in (0, 1/{fact})")));
    }
    let bound = 1.0 - fact * x;
    let vol = (l as f64).powi(d as i32);
    let per = (l as f64).powi(d as i32 - 1);
    let rows = par::map(exec, trials as usize, |t| -> Result<(f64, f64, usize)> {
        let c = carve(d, l, x, seed, t as u64)?;
        // recount from scratch rather than trusting the counters
        let full = full_columns(d, l, &c.present)?;
        let full_fraction = full.iter().map(|&f| f as f64 / per).fold(1.0, f64::min);
        let comps = label_components(&c.region, &c.present);
        let largest = comps.sizes.iter().copied().max().unwrap_or(0);
        Ok((largest as f64 / vol, full_fraction, c.present.iter().filter(|p| !**p).count()))
    });
    let mut report = ConnectedColumnsReport {
        d,
        l,
        x,
        trials,
        bound,
        min_fraction: 1.0,
        min_full_fraction: 1.0,
        mean_deleted: 0.0,
        failures: 0,
    };
    for row in rows {
        let (frac, full, deleted) = row?;
        if full < 1.0 - x - 1e-12 {
            return Err(Error::Invariant(format!("generated Γ keeps only {full} of the columns in some direction")));
        }
        report.min_fraction = report.min_fraction.min(frac);
        report.min_full_fraction = report.min_full_fraction.min(full);
        report.mean_deleted += deleted as f64 / trials.max(1) as f64;
        if frac < bound {
            report.failures += 1;
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnCapacityReport {
    pub l: i64,
    pub r: f64,
    /// Columns parallel to `e₁` met by `Γ`.
    pub columns_met: usize,
    pub cap_gamma: f64,
    /// Capacity of the projection of `Γ` onto the face `x₀ = 0`.
    pub cap_projection: f64,
    /// `cap(Γ) / L^{d−2}`.
    pub scaled: f64,
    /// `cap(Γ) / cap(Γ′)`.
    pub ratio: f64,
}

/// Exact capacities of `Γ ⊂ [0, L)^d` meeting at least `rL^{d−1}` columns
/// parallel to the first axis, and of its projection onto the face.
pub fn column_capacity_check(gamma: &VertexSet, l: i64, r: f64, green: &FreeGreen) -> Result<ColumnCapacityReport> {
    let d = gamma.dim();
    if gamma.is_empty() {
        return Err(Error::precondition("Γ is empty"));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::precondition(format!("r = {r} must lie in (0, 1)")));
    }
    let b = Region::cube(d, 0, l as usize)?;
    if gamma.iter().any(|p| !b.contains(p)) {
        return Err(Error::precondition(format!("Γ leaves [0, {l})^d")));
    }
    let projection = VertexSet::from_points(
        d,
        gamma.iter().map(|p| {
            let mut q = p.clone();
            q[0] = 0;
            q
        }),
    )?;
    let columns_met = projection.len();
    let need = r * (l as f64).powi(d as i32 - 1);
    if (columns_met as f64) < need {
        return Err(Error::precondition(format!("Γ meets {columns_met} columns, fewer than rL^(d−1) = {need}")));
    }
    let cap_gamma = capacity(gamma, green)?;
    let cap_projection = capacity(&projection, green)?;
    Ok(ColumnCapacityReport {
        l,
        r,
        columns_met,
        cap_gamma,
        cap_projection,
        scaled: cap_gamma / (l as f64).powi(d as i32 - 2),
        ratio: cap_gamma / cap_projection,
    })
}
