use super::{finite_cluster_of, Ensemble, LevelSetConfig};
use crate::lattice::{Metric, Point, VertexSet};
use crate::par::Execution;
use crate::potential::{capacity, capacity_mc, FreeGreen};
use crate::rng::derive_seed;
use crate::stats::{fit_line, wilson, LineFit};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

/// Distance from the configured `h_*` below which a decay run is flagged.
const CRITICAL_WINDOW: f64 = 0.05;

/// The bracket index `N` with `N − 1 ≤ cap < N`.
pub fn bin_of(cap: f64) -> u64 {
    cap.max(0.0).floor() as u64 + 1
}

/// Free-space capacities of cluster closures, memoised by translated shape.
pub struct CapacityCache<'g> {
    green: &'g FreeGreen,
    table: Mutex<HashMap<Vec<Point>, f64>>,
    /// Walks per site for the random-walk fallback on oversized closures.
    pub mc_walks: u64,
    pub mc_seed: u64,
}

impl<'g> CapacityCache<'g> {
    pub fn new(green: &'g FreeGreen) -> Self {
        CapacityCache { green, table: Mutex::new(HashMap::new()), mc_walks: 64, mc_seed: 0 }
    }

    pub fn green(&self) -> &FreeGreen {
        self.green
    }

    fn key(set: &VertexSet) -> Vec<Point> {
        match set.bounding_region() {
            Some(r) => {
                let shift: Vec<i64> = r.lo().iter().map(|c| -c).collect();
                set.translate(&shift).to_vec()
            }
            None => Vec::new(),
        }
    }

    /// Exact capacity; [`Error::Size`] when the dense solve is too large.
    pub fn exact(&self, set: &VertexSet) -> Result<f64> {
        let key = Self::key(set);
        if let Some(&c) = self.table.lock().unwrap().get(&key) {
            return Ok(c);
        }
        let c = capacity(set, self.green)?;
        self.table.lock().unwrap().insert(key, c);
        Ok(c)
    }

    /// Exact capacity, or a random-walk estimate past the dense limit.
    /// The flag is true when the estimate was used.
    pub fn with_fallback(&self, set: &VertexSet) -> Result<(f64, bool)> {
        match self.exact(set) {
            Err(Error::Size { .. }) => {
                let diam = set.diameter(Metric::LInf).unwrap_or(0) as f64;
                let seed = derive_seed(self.mc_seed, set.len() as u64);
                let mc = capacity_mc(set, self.mc_walks, 3.0 * (diam + 1.0), seed, Execution::Sequential)?;
                Ok((mc.estimate, true))
            }
            other => other.map(|c| (c, false)),
        }
    }

    pub fn len(&self) -> usize {
        self.table.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The event `A^X_N(h)`: `C_X` finite and `N − 1 ≤ cap(closure C_X) < N`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EventAN {
    pub n: u64,
    pub occurs: bool,
    pub finite: bool,
    /// Capacity of the closure; `None` for an infinite cluster.
    pub capacity: Option<f64>,
}

/// Exact evaluation; fails with a size error when the closure is too large
/// for the dense solve (use `capacity_mc` there).
pub fn event_an(cfg: &LevelSetConfig, x: &VertexSet, n: u64, caps: &CapacityCache) -> Result<EventAN> {
    if n == 0 {
        return Err(Error::precondition("N must be at least 1"));
    }
    match finite_cluster_of(cfg, x)? {
        None => Ok(EventAN { n, occurs: false, finite: false, capacity: None }),
        Some(c) => {
            let cap = caps.exact(&c.vertex_set(cfg.domain()).closure())?;
            Ok(EventAN { n, occurs: bin_of(cap) == n, finite: true, capacity: Some(cap) })
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: u64,
    pub count: u64,
    pub freq: f64,
    pub stderr: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

/// `P̂[N ≤ |C_X| < ∞]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VolumeRow {
    pub n: u64,
    pub count: u64,
    pub freq: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayCurve {
    pub h: f64,
    pub samples: u64,
    pub rows: Vec<DecayRow>,
    /// Samples where `C_X` reaches the shell.
    pub infinite: u64,
    /// Finite clusters with capacity at least the largest bracket.
    pub overflow: u64,
    /// Closures whose capacity came from the random-walk fallback.
    pub mc_fallbacks: u64,
    /// Count-weighted fit of `log P̂[A_N]` against `N`.
    pub rate_fit: Option<LineFit>,
    pub volume: Vec<VolumeRow>,
    /// Fit of the log volume tail against `N^{(d−2)/d}`.
    pub volume_fit: Option<LineFit>,
}

impl DecayCurve {
    /// Fitted exponential rate `t̂` with its standard error.
    pub fn rate(&self) -> Option<(f64, f64)> {
        self.rate_fit.map(|f| (-f.slope, f.slope_stderr))
    }

    /// Brackets where `P̂[A_N(h)] > exp{−½h²(N−1)} + 3·stderr`.
    pub fn negative_level_violations(&self) -> Vec<u64> {
        self.rows
            .iter()
            .filter(|r| r.freq > (-0.5 * self.h * self.h * (r.n as f64 - 1.0)).exp() + 3.0 * r.stderr)
            .map(|r| r.n)
            .collect()
    }

    /// `Σ_N count + infinite + overflow`, equal to the sample count.
    pub fn total(&self) -> u64 {
        self.rows.iter().map(|r| r.count).sum::<u64>() + self.infinite + self.overflow
    }
}

#[derive(Clone, Default)]
struct Tally {
    counts: Vec<u64>,
    infinite: u64,
    overflow: u64,
    mc: u64,
    sizes: BTreeMap<usize, u64>,
}

impl Tally {
    fn merge(&mut self, o: Tally) {
        for (a, b) in self.counts.iter_mut().zip(o.counts) {
            *a += b;
        }
        self.infinite += o.infinite;
        self.overflow += o.overflow;
        self.mc += o.mc;
        for (k, v) in o.sizes {
            *self.sizes.entry(k).or_default() += v;
        }
    }
}

/// Bracket histogram of `cap(closure C_X(h))` for `N = 1..=n_max` at each
/// level, all levels evaluated on the same samples.
pub fn decay_curves(
    hs: &[f64],
    n_max: u64,
    x: &VertexSet,
    e: &Ensemble,
    caps: &CapacityCache,
    exec: Execution,
    h_star: Option<f64>,
) -> Result<Vec<DecayCurve>> {
    if let Some(hs_) = h_star {
        for &h in hs {
            if (h - hs_).abs() < CRITICAL_WINDOW {
                log::warn!("level {h} lies within {CRITICAL_WINDOW} of the h_* estimate {hs_}");
            }
        }
    }
    let empty = || vec![Tally { counts: vec![0; n_max as usize], ..Tally::default() }; hs.len()];
    let tallies = e.fold(
        exec,
        empty,
        |acc, _, phi| {
            for (t, &h) in acc.iter_mut().zip(hs) {
                let cfg = LevelSetConfig::new(phi, h, e.margin);
                match finite_cluster_of(&cfg, x)? {
                    None => t.infinite += 1,
                    Some(c) => {
                        *t.sizes.entry(c.members.len()).or_default() += 1;
                        let (cap, mc) = caps.with_fallback(&c.vertex_set(cfg.domain()).closure())?;
                        t.mc += u64::from(mc);
                        let b = bin_of(cap);
                        if b <= n_max {
                            t.counts[b as usize - 1] += 1;
                        } else {
                            t.overflow += 1;
                        }
                    }
                }
            }
            Ok(())
        },
        |a, b| a.iter_mut().zip(b).for_each(|(a, b)| a.merge(b)),
    )?;
    let n = e.samples;
    let exponent = (e.d as f64 - 2.0) / e.d as f64;
    Ok(hs
        .iter()
        .zip(tallies)
        .map(|(&h, t)| {
            let rows: Vec<DecayRow> = t
                .counts
                .iter()
                .enumerate()
                .map(|(i, &k)| {
                    let p = k as f64 / n.max(1) as f64;
                    let (wilson_lo, wilson_hi) = wilson(k, n, 1.96);
                    DecayRow {
                        n: i as u64 + 1,
                        count: k,
                        freq: p,
                        stderr: (p * (1.0 - p) / n.max(1) as f64).sqrt(),
                        wilson_lo,
                        wilson_hi,
                    }
                })
                .collect();
            let seen: Vec<&DecayRow> = rows.iter().filter(|r| r.count > 0).collect();
            let rate_fit = fit_line(
                &seen.iter().map(|r| r.n as f64).collect::<Vec<_>>(),
                &seen.iter().map(|r| r.freq.ln()).collect::<Vec<_>>(),
                Some(&seen.iter().map(|r| r.count as f64).collect::<Vec<_>>()),
            );
            let max_size = t.sizes.keys().next_back().copied().unwrap_or(0);
            let mut volume = Vec::new();
            let mut tail: u64 = t.sizes.values().sum();
            for s in 1..=max_size {
                tail -= t.sizes.get(&(s - 1)).copied().unwrap_or(0);
                volume.push(VolumeRow { n: s as u64, count: tail, freq: tail as f64 / n.max(1) as f64 });
            }
            let vseen: Vec<&VolumeRow> = volume.iter().filter(|r| r.count > 0).collect();
            let volume_fit = fit_line(
                &vseen.iter().map(|r| (r.n as f64).powf(exponent)).collect::<Vec<_>>(),
                &vseen.iter().map(|r| r.freq.ln()).collect::<Vec<_>>(),
                Some(&vseen.iter().map(|r| r.count as f64).collect::<Vec<_>>()),
            );
            DecayCurve {
                h,
                samples: n,
                rows,
                infinite: t.infinite,
                overflow: t.overflow,
                mc_fallbacks: t.mc,
                rate_fit,
                volume,
                volume_fit,
            }
        })
        .collect())
}
