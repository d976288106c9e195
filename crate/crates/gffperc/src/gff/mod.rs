//! The Gaussian free field killed outside a box: exact sampling, the Markov
//! decomposition `φ = ξ + ψ` and Cameron–Martin tilts.

mod decompose;
mod sampler;
mod tilt;

pub use decompose::{decompose, decompose_clipped, harmonic_extension, BasisCache, Decomposition};
pub use sampler::{FieldSample, Sampler, SAMPLER_ID};
pub use tilt::{tilt_complex_weight, tilt_log_weight, TiltMode, TiltedSampler};
