use super::{shift_weight, tilt_set, ComplexEstimate, TiltCache};
use crate::lattice::VertexSet;
use crate::observables::{finite_cluster_of, Ensemble, LevelSetConfig};
use crate::par::Execution;
use crate::stats::{Accumulator, ComplexAccumulator, Estimate};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThetaS {
    pub z: Complex64,
    pub anchor: f64,
    pub value: ComplexEstimate,
    /// `P̂[C_X(Re z) = S]` on the same samples.
    pub direct: Estimate,
    /// `E(f, f)` of the tilt set in the domain.
    pub tilt_energy: f64,
    /// `exp{½(Im z)² E(f,f)} · P̂[C_X(Re z) = S]`.
    pub modulus_bound: f64,
}

/// `θ_S(z)` for each `z`, from samples whose clusters are read at `anchor`.
pub fn theta_s_complex(
    s: &VertexSet,
    x: &VertexSet,
    zs: &[Complex64],
    anchor: f64,
    e: &Ensemble,
    exec: Execution,
) -> Result<Vec<ThetaS>> {
    let domain = e.domain()?;
    let t = tilt_set(s, x);
    for p in t.iter() {
        match domain.index(p) {
            Some(i) if domain.depth(i) > e.margin => {}
            _ => return Err(Error::geometry(format!("{p:?} of closure(S) ∪ X is not inside the margin"))),
        }
    }
    let target: Vec<usize> = s.iter().map(|p| domain.index(p).unwrap()).collect();
    let tilt = TiltCache::new(&domain).get(&t)?;
    let is_s = |phi: &crate::gff::FieldSample, level: f64| -> Result<bool> {
        let cfg = LevelSetConfig::new(phi, level, e.margin);
        Ok(finite_cluster_of(&cfg, x)?.is_some_and(|c| c.members == target))
    };
    let k = zs.len();
    let (vals, direct) = e.fold(
        exec,
        || (vec![ComplexAccumulator::default(); k], vec![Accumulator::default(); k]),
        |(vals, direct), _, phi| {
            let hit = is_s(phi, anchor)?;
            let pairing = if hit { tilt.pairing(&phi.values) } else { 0.0 };
            for (j, z) in zs.iter().enumerate() {
                vals[j].push(if hit {
                    shift_weight(*z, anchor, tilt.energy, pairing)
                } else {
                    Complex64::new(0.0, 0.0)
                });
                let d = if z.re == anchor { hit } else { is_s(phi, z.re)? };
                direct[j].push(f64::from(u8::from(d)));
            }
            Ok(())
        },
        |(a, b), (c, d)| {
            a.iter_mut().zip(&c).for_each(|(a, c)| a.merge(c));
            b.iter_mut().zip(&d).for_each(|(b, d)| b.merge(d));
        },
    )?;
    Ok(zs
        .iter()
        .zip(vals.iter().zip(&direct))
        .map(|(z, (v, d))| {
            let direct: Estimate = d.into();
            ThetaS {
                z: *z,
                anchor,
                value: v.into(),
                direct,
                tilt_energy: tilt.energy,
                modulus_bound: (0.5 * z.im * z.im * tilt.energy).exp() * direct.mean,
            }
        })
        .collect())
}
