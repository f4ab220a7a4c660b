//! Jost solutions, scattering coefficients, the outgoing resolvent and
//! the integral-equation oracle.

pub mod field;
pub mod jost;
pub mod resolvent;
pub mod volterra;

pub use field::{field_grid, wronskian, FieldMeta, WaveField};
pub use jost::{
    is_generic, plane_wave_amplitudes, scattering_coefficients, GenericityReport, JostSolutions,
    ScatteringCoefficients, Wave, GENERICITY_THRESHOLD,
};
pub use resolvent::{resolvent_apply, resolvent_at, Source, DEFAULT_PANEL};
pub use volterra::{jost_volterra_oracle, VolterraJost};
