//! Optical-side forward models for a gated quantum dot under SAW modulation.
//!
//! Spectral axes in this module are detunings (Hz) from the emitter's reference
//! frequency `EmitterState::base_frequency`, which keeps optical-scale numbers out
//! of the fits.

mod bessel;
mod emitter;
mod spectrum;

pub use bessel::{bessel_j, bessel_j_all, bessel_j_signed, MAX_ARG as BESSEL_MAX_ARG, MAX_ORDER as BESSEL_MAX_ORDER};
pub use emitter::{charge_state, emission_frequency, modulation_index, Emission, EmitterState, ModulationDrive, Plateau};
pub use spectrum::{
    filtered_spectrum, lorentzian_density, pl_bias_map, sideband_spectrum, BiasMap, FilterSpec, SidebandComb,
    SIDEBAND_RESIDUAL_TOL,
};
