use super::{FieldSample, Sampler};
use crate::potential::dirichlet_energy;
use crate::Result;
use num_complex::Complex64;

/// `log` of `dP̃_f/dP = exp{−½E(f,f) − E(f,φ)}`.
pub fn tilt_log_weight(energy_ff: f64, energy_f_phi: f64) -> f64 {
    -0.5 * energy_ff - energy_f_phi
}

/// `exp{−½z² E(f,f) − z E(f,φ)}`, the analytic continuation of the tilt weight.
pub fn tilt_complex_weight(z: Complex64, energy_ff: f64, energy_f_phi: f64) -> Complex64 {
    (-0.5 * z * z * energy_ff - z * energy_f_phi).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TiltMode {
    /// Draw `φ − f` directly.
    Shift,
    /// Draw `φ` and attach the Cameron–Martin weight.
    Weight,
}

/// Sampler for the law of `φ − f`, by shifting or by reweighting.
pub struct TiltedSampler<'a> {
    base: &'a Sampler,
    f: Vec<f64>,
    energy_ff: f64,
    mode: TiltMode,
}

impl<'a> TiltedSampler<'a> {
    /// `f` is given on the sampler's domain and taken as zero outside it.
    pub fn new(base: &'a Sampler, f: Vec<f64>, mode: TiltMode) -> Result<Self> {
        let energy_ff = dirichlet_energy(base.domain(), &f, &f)?;
        Ok(TiltedSampler { base, f, energy_ff, mode })
    }

    pub fn energy(&self) -> f64 {
        self.energy_ff
    }

    /// A draw and its weight (one for the shift mode).
    pub fn draw(&self, seed: u64, index: u64) -> Result<(FieldSample, f64)> {
        let mut phi = self.base.sample(seed, index);
        match self.mode {
            TiltMode::Shift => {
                phi.values.iter_mut().zip(&self.f).for_each(|(p, f)| *p -= f);
                Ok((phi, 1.0))
            }
            TiltMode::Weight => {
                let e = dirichlet_energy(&phi.domain, &self.f, &phi.values)?;
                Ok((phi, tilt_log_weight(self.energy_ff, e).exp()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn complex_weight_restricts_to_real_weight() {
        let w = tilt_complex_weight(Complex64::new(0.7, 0.0), 3.0, -0.4);
        assert_relative_eq!(w.re, tilt_log_weight(0.49 * 3.0, 0.7 * -0.4).exp(), epsilon = 1e-14);
        assert_eq!(w.im, 0.0);
    }

    #[test]
    fn conjugate_heights_give_conjugate_weights() {
        let z = Complex64::new(-0.3, 0.45);
        let a = tilt_complex_weight(z, 5.0, 1.3);
        let b = tilt_complex_weight(z.conj(), 5.0, 1.3);
        assert_eq!(a.conj(), b);
    }

    #[test]
    fn purely_imaginary_shift_has_modulus_from_energy_only() {
        let t = 0.6;
        let w = tilt_complex_weight(Complex64::new(0.0, t), 4.0, 2.7);
        assert_relative_eq!(w.norm(), (0.5 * t * t * 4.0f64).exp(), epsilon = 1e-12);
    }
}
