//! Analytic extension of cluster observables to complex heights.
//!
//! For a finite cluster shape `S` the map `h ↦ P[C_X(h) = S]` continues to
//! `θ_S(z) = E[exp{−½z²E(f,f) − zE(f,φ)} 1{C_X(0) = S}]` where `f` is the
//! harmonic potential of the tilt set `closure(S) ∪ X`, the set of sites the
//! event depends on. Estimates reuse samples drawn at a real anchor `a` and
//! apply the weight for the remaining shift `z − a`.

mod derivative;
mod series;
mod theta;

pub use derivative::{derivative_estimate, DerivativeEstimate, DerivativeScaling, FiniteDifference};
pub use series::{f_bar_n_complex, series_eval, SeriesResult, TailCertificate};
pub use theta::{theta_s_complex, ThetaS};

use crate::gff::tilt_complex_weight;
use crate::lattice::{Metric, Point, Region, VertexSet};
use crate::observables::{finite_cluster_of, CapacityCache, LevelSetConfig};
use crate::potential::harmonic_potential;
use crate::solver::CgOptions;
use crate::stats::ComplexAccumulator;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub value: Complex64,
    /// Standard error of the mean, real and imaginary parts combined.
    pub stderr: f64,
    pub samples: u64,
}

impl ComplexEstimate {
    pub fn zero(samples: u64) -> Self {
        ComplexEstimate { value: Complex64::new(0.0, 0.0), stderr: 0.0, samples }
    }

    pub fn conj(self) -> Self {
        ComplexEstimate { value: self.value.conj(), ..self }
    }
}

impl From<&ComplexAccumulator> for ComplexEstimate {
    fn from(a: &ComplexAccumulator) -> Self {
        if a.count() > 0 && a.re.sumsq == 0.0 && a.im.sumsq == 0.0 {
            return ComplexEstimate::zero(a.count());
        }
        ComplexEstimate { value: a.mean(), stderr: a.stderr(), samples: a.count() }
    }
}

/// Declared growth of `|F(S)|` in terms of `c = cap(closure S)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Growth {
    /// `|F| ≤ c0`.
    Bounded { c0: f64 },
    /// `|F| ≤ c0 · max(c, 1)^power`.
    Polynomial { c0: f64, power: f64 },
    /// `|F| ≤ c0 · exp(c^beta)` with `beta < 1`.
    Subexponential { c0: f64, beta: f64 },
}

impl Growth {
    /// Envelope for clusters in the bracket `N − 1 ≤ cap < N`.
    pub fn envelope(&self, n: f64) -> f64 {
        match *self {
            Growth::Bounded { c0 } => c0,
            Growth::Polynomial { c0, power } => c0 * n.max(1.0).powf(power),
            Growth::Subexponential { c0, beta } => c0 * n.powf(beta).exp(),
        }
    }

    pub fn admits(&self, value: f64, cap: f64) -> bool {
        let bound = match *self {
            Growth::Bounded { c0 } => c0,
            Growth::Polynomial { c0, power } => c0 * cap.max(1.0).powf(power),
            Growth::Subexponential { c0, beta } => c0 * cap.powf(beta).exp(),
        };
        value.abs() <= bound * (1.0 + 1e-12)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Growth::Subexponential { beta, .. } if !(0.0..1.0).contains(&beta) => {
                Err(Error::precondition("subexponential growth needs 0 ≤ beta < 1"))
            }
            _ => Ok(()),
        }
    }
}

/// What an observable sees of a cluster.
pub struct ClusterView<'a> {
    pub set: &'a VertexSet,
    pub sources: &'a VertexSet,
    /// Free-space capacity of the closure.
    pub capacity: f64,
}

type Evaluator = dyn Fn(&ClusterView) -> f64 + Send + Sync;

/// A real cluster observable with its declared growth class.
#[derive(Clone)]
pub struct ObservableSpec {
    pub name: String,
    pub growth: Option<Growth>,
    eval: Arc<Evaluator>,
}

impl std::fmt::Debug for ObservableSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObservableSpec").field("name", &self.name).field("growth", &self.growth).finish()
    }
}

impl ObservableSpec {
    pub fn new(
        name: impl Into<String>,
        growth: Option<Growth>,
        eval: impl Fn(&ClusterView) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ObservableSpec { name: name.into(), growth, eval: Arc::new(eval) }
    }

    pub fn eval(&self, view: &ClusterView) -> f64 {
        (self.eval)(view)
    }

    pub fn one() -> Self {
        Self::new("one", Some(Growth::Bounded { c0: 1.0 }), |_| 1.0)
    }

    /// `|S|`; in dimension `d` the volume is at most `cap^{d/(d−2)}`.
    pub fn size(d: usize) -> Self {
        let power = d as f64 / (d as f64 - 2.0);
        Self::new("size", Some(Growth::Polynomial { c0: 1.0, power }), |v| v.set.len() as f64)
    }

    /// `|S|^{−1}`, zero for the empty cluster.
    pub fn inverse_size() -> Self {
        Self::new("inverse_size", Some(Growth::Bounded { c0: 1.0 }), |v| {
            if v.set.is_empty() {
                0.0
            } else {
                1.0 / v.set.len() as f64
            }
        })
    }

    /// `1{S is connected and contains X}`.
    pub fn connected() -> Self {
        Self::new("connected", Some(Growth::Bounded { c0: 1.0 }), |v| {
            let ok = !v.set.is_empty() && v.sources.is_subset(v.set) && v.set.diameter(Metric::Graph).is_some();
            f64::from(u8::from(ok))
        })
    }

    pub fn capacity() -> Self {
        Self::new("capacity", Some(Growth::Polynomial { c0: 1.0, power: 1.0 }), |v| v.capacity)
    }

    pub fn by_name(name: &str, d: usize) -> Option<Self> {
        match name {
            "one" => Some(Self::one()),
            "size" => Some(Self::size(d)),
            "inverse_size" => Some(Self::inverse_size()),
            "connected" => Some(Self::connected()),
            "capacity" => Some(Self::capacity()),
            _ => None,
        }
    }

    pub(crate) fn declared_growth(&self) -> Result<Growth> {
        let g = self
            .growth
            .ok_or_else(|| Error::precondition(format!("observable {} has no declared growth class", self.name)))?;
        g.validate()?;
        Ok(g)
    }
}

/// `closure(S) ∪ X`: the sites the event `{C_X = S}` depends on.
pub fn tilt_set(s: &VertexSet, x: &VertexSet) -> VertexSet {
    s.closure().union(x)
}

/// Domain equilibrium data of a tilt set.
#[derive(Clone, Debug)]
pub struct TiltData {
    support: Vec<usize>,
    weights: Vec<f64>,
    /// `E(f, f)` for the domain harmonic potential `f`.
    pub energy: f64,
}

impl TiltData {
    /// `E(f, φ)`.
    pub fn pairing(&self, field: &[f64]) -> f64 {
        self.support.iter().zip(&self.weights).map(|(&i, w)| w * field[i]).sum()
    }
}

/// Harmonic potentials of tilt sets on one domain, memoised by position.
pub struct TiltCache {
    domain: Region,
    opts: CgOptions,
    table: Mutex<HashMap<Vec<Point>, Arc<TiltData>>>,
}

impl TiltCache {
    pub fn new(domain: &Region) -> Self {
        TiltCache {
            domain: domain.clone(),
            opts: CgOptions { tol: 1e-11, ..CgOptions::default() },
            table: Mutex::new(HashMap::new()),
        }
    }

    pub fn get(&self, set: &VertexSet) -> Result<Arc<TiltData>> {
        let key = set.to_vec();
        if let Some(t) = self.table.lock().unwrap().get(&key) {
            return Ok(t.clone());
        }
        let hp = harmonic_potential(set, &self.domain, self.opts)?;
        let t = Arc::new(TiltData { support: hp.support, weights: hp.weights, energy: hp.capacity });
        self.table.lock().unwrap().insert(key, t.clone());
        Ok(t)
    }
}

/// Weight for moving the level from the anchor `a` to `z`; the lower half
/// plane is obtained by conjugation so conjugate heights give conjugate values
/// bit for bit.
pub(crate) fn shift_weight(z: Complex64, anchor: f64, energy: f64, pairing: f64) -> Complex64 {
    let w = tilt_complex_weight(Complex64::new(z.re - anchor, z.im.abs()), energy, pairing);
    if z.im < 0.0 {
        w.conj()
    } else {
        w
    }
}

/// One sample's cluster at the anchor.
pub(crate) struct Visit {
    /// Capacity bracket of the closure.
    pub bin: u64,
    pub value: f64,
    pub capacity: f64,
    /// `(E(f,f), E(f,φ))` when requested and the bracket is at most the maximum.
    pub tilt: Option<(f64, f64)>,
}

pub(crate) struct Visitor<'a> {
    pub x: &'a VertexSet,
    pub spec: &'a ObservableSpec,
    pub caps: &'a CapacityCache<'a>,
    pub tilts: &'a TiltCache,
    pub margin: usize,
    pub n_max: u64,
}

impl Visitor<'_> {
    /// `None` when `C_X` reaches the shell.
    pub fn visit(&self, phi: &crate::gff::FieldSample, level: f64, with_tilt: bool) -> Result<Option<Visit>> {
        let cfg = LevelSetConfig::new(phi, level, self.margin);
        let Some(c) = finite_cluster_of(&cfg, self.x)? else {
            return Ok(None);
        };
        let s = c.vertex_set(cfg.domain());
        let closure = s.closure();
        let (capacity, _) = self.caps.with_fallback(&closure)?;
        let bin = crate::observables::bin_of(capacity);
        let value = self.spec.eval(&ClusterView { set: &s, sources: self.x, capacity });
        let tilt = if with_tilt && bin <= self.n_max {
            let t = self.tilts.get(&closure.union(self.x))?;
            Some((t.energy, t.pairing(&phi.values)))
        } else {
            None
        };
        Ok(Some(Visit { bin, value, capacity, tilt }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_growth_declarations_hold_on_small_shapes() {
        let g = crate::potential::FreeGreen::new(3, 1e-12).unwrap();
        let x = crate::observables::origin(3);
        let shapes = [
            vec![vec![0, 0, 0]],
            vec![vec![0, 0, 0], vec![1, 0, 0]],
            vec![vec![0, 0, 0], vec![1, 0, 0], vec![2, 0, 0], vec![2, 1, 0]],
        ];
        for pts in shapes {
            let s = VertexSet::from_points(3, pts).unwrap();
            let cap = crate::potential::capacity(&s.closure(), &g).unwrap();
            for spec in ["one", "size", "inverse_size", "connected", "capacity"] {
                let spec = ObservableSpec::by_name(spec, 3).unwrap();
                let v = spec.eval(&ClusterView { set: &s, sources: &x, capacity: cap });
                assert!(spec.growth.unwrap().admits(v, cap), "{}", spec.name);
            }
        }
    }

    #[test]
    fn connected_indicator() {
        let x = crate::observables::origin(3);
        let conn = ObservableSpec::connected();
        let view = |s: &VertexSet| conn.eval(&ClusterView { set: s, sources: &x, capacity: 0.0 });
        let a = VertexSet::from_points(3, [vec![0, 0, 0], vec![0, 1, 0]]).unwrap();
        let b = VertexSet::from_points(3, [vec![0, 0, 0], vec![0, 2, 0]]).unwrap();
        assert_eq!(view(&a), 1.0);
        assert_eq!(view(&b), 0.0);
        assert_eq!(view(&VertexSet::new(3)), 0.0);
    }

    #[test]
    fn undeclared_growth_is_rejected() {
        let spec = ObservableSpec::new("mystery", None, |_| 2.0);
        assert!(spec.declared_growth().is_err());
        let bad = ObservableSpec::new("fast", Some(Growth::Subexponential { c0: 1.0, beta: 1.5 }), |_| 0.0);
        assert!(bad.declared_growth().is_err());
    }

    #[test]
    fn lower_half_plane_is_the_conjugate() {
        let z = Complex64::new(0.4, 0.7);
        assert_eq!(shift_weight(z.conj(), 0.1, 5.0, -0.8), shift_weight(z, 0.1, 5.0, -0.8).conj());
    }
}
