//! Level-set percolation of the discrete Gaussian free field on ℤ^d.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: points, boxes at dyadic scales, boundaries, clusters.
//! * [`potential`]: Green functions, equilibrium measures, capacities.
//! * [`gff`]: exact sampling in boxes, the Markov decomposition, tilting.
//! * [`observables`]: cluster statistics and the capacity-bin events.
//! * [`analytic`]: complex-height estimators built on Cameron–Martin tilts.
//! * [`coarse`]: bad/very-bad box events, interfaces, and their audits.
//!
//! Monte Carlo loops go through [`par`], which runs on rayon when the
//! `parallel` feature is enabled and sequentially otherwise. Results do not
//! depend on which path ran.

pub mod analytic;
pub mod coarse;
pub mod error;
pub mod export;
pub mod gff;
pub mod lattice;
pub mod observables;
pub mod par;
pub mod potential;
pub mod rng;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
