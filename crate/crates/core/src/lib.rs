//! One-dimensional Schrödinger scattering for potentials that combine
//! Dirac-delta spikes with rapid periodic microstructure.
//!
//! The crate solves u'' = (V(x) - k^2) u directly (adaptive Runge-Kutta
//! between interfaces, exact transfer matrices across spikes) and evaluates
//! the corrected homogenization expansion of the transmission coefficient,
//! so that the two can be compared across a sweep of the period eps.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod homogenization;
pub mod jet;
pub mod potential;
pub mod propagator;
pub mod quadrature;
pub mod scattering;

pub use error::{Error, Result};
