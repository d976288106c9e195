//! Potential theory of simple random walk on ℤ^d: Green functions,
//! equilibrium measures and capacities.
//!
//! Normalisation: `(−Δ) g(·, y) = δ_y` with `Δf(x) = Σ_{y∼x} (f(y) − f(x))`, so
//! `g(0,0) = 0.25273…` in three dimensions.

mod cache;
mod equilibrium;
mod green;
mod killed;
mod walk;

pub use cache::{read_cache, write_cache, CACHE_ENV, CACHE_MAGIC, CACHE_VERSION};
pub use equilibrium::{
    box_capacity_fit, cap_bounds, capacity, dirichlet_energy, equilibrium_exact, measure_energy,
    sweeping_check, BoxCapacityFit, EquilibriumMeasure, EXACT_LIMIT,
};
pub use green::{scaled_bessel_i, FreeGreen};
pub use killed::{harmonic_potential, killed_green_column, HarmonicPotential};
pub use walk::{capacity_mc, McCapacity};

use crate::{Error, Result};

/// Leading large-distance behaviour `c_d r^{2−d}` of the free Green function.
pub fn green_asymptotic(d: usize, r: f64) -> f64 {
    let half = d as f64 / 2.0;
    gamma(half - 1.0) / (4.0 * std::f64::consts::PI.powf(half)) * r.powf(2.0 - d as f64)
}

/// Γ at integers and half-integers, the only arguments used here.
fn gamma(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    debug_assert!((2.0 * x - twice).abs() < 1e-12 && x > 0.0);
    if twice as i64 % 2 == 0 {
        (1..x.round() as i64).map(|k| k as f64).product()
    } else {
        // Γ(n + 1/2) = (2n)! √π / (4^n n!)
        let mut g = std::f64::consts::PI.sqrt();
        let mut y = 0.5;
        while y < x - 0.25 {
            g *= y;
            y += 1.0;
        }
        g
    }
}

pub(crate) fn require_transient(d: usize) -> Result<()> {
    if d < 3 {
        return Err(Error::Dimension {
            d,
            reason: "the walk is recurrent; the Green function and capacities need d ≥ 3".into(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn asymptotic_constant_in_three_dimensions() {
        assert_relative_eq!(green_asymptotic(3, 1.0), 1.0 / (4.0 * std::f64::consts::PI), epsilon = 1e-15);
        assert_relative_eq!(green_asymptotic(4, 1.0), 1.0 / (4.0 * std::f64::consts::PI.powi(2)), epsilon = 1e-15);
        assert_relative_eq!(gamma(2.5), 1.329_340_388_179_137, epsilon = 1e-14);
    }

    #[test]
    fn recurrent_dimensions_are_rejected() {
        assert!(matches!(require_transient(2), Err(Error::Dimension { d: 2, .. })));
        assert!(require_transient(3).is_ok());
    }
}
