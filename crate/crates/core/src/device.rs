//! Substrate and doped-layer descriptions, plus SAW kinematics.
//!
//! Frequencies are plain `f64` values in Hz. Angular frequencies are never stored;
//! helpers that need `2π` compute it locally.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Rayleigh-wave phase velocity on GaAs (001) along [110], m/s (literature value).
pub const GAAS_SAW_VELOCITY: f64 = 2864.0;
/// Coupling constant of insulating GaAs (0.07 %).
pub const GAAS_K2_BULK: f64 = 7.0e-4;
/// Relaxation crossover conductivity, S/m.
pub const DEFAULT_SIGMA_M: f64 = 10.0;

/// Physical constants of the piezoelectric substrate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// SAW phase velocity (m/s).
    pub saw_velocity: f64,
    /// Bulk piezoelectric coupling k² (fraction, not percent).
    pub k2_bulk: f64,
    /// Crossover conductivity of the relaxation model (S/m).
    pub sigma_m: f64,
}

impl MaterialParams {
    pub fn new(saw_velocity: f64, k2_bulk: f64, sigma_m: f64) -> Result<Self> {
        if !(saw_velocity > 0.0 && saw_velocity.is_finite()) {
            return Err(Error::domain(format!(
                "saw_velocity must be > 0, got {saw_velocity}"
            )));
        }
        if !(k2_bulk > 0.0 && k2_bulk < 1.0) {
            return Err(Error::domain(format!(
                "k2_bulk must lie in (0, 1), got {k2_bulk}"
            )));
        }
        if !(sigma_m > 0.0 && sigma_m.is_finite()) {
            return Err(Error::domain(format!("sigma_m must be > 0, got {sigma_m}")));
        }
        Ok(Self {
            saw_velocity,
            k2_bulk,
            sigma_m,
        })
    }
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            saw_velocity: GAAS_SAW_VELOCITY,
            k2_bulk: GAAS_K2_BULK,
            sigma_m: DEFAULT_SIGMA_M,
        }
    }
}

/// Buried n-doped layer geometry and conductivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    /// Depth of the top of the doped layer below the surface (m).
    pub depth: f64,
    /// Layer thickness (m).
    pub thickness: f64,
    /// Sheet-averaged conductivity (S/m).
    pub sigma_xx: f64,
}

impl LayerStack {
    pub fn new(depth: f64, thickness: f64, sigma_xx: f64) -> Result<Self> {
        if !(depth >= 0.0 && depth.is_finite()) {
            return Err(Error::domain(format!("depth must be >= 0, got {depth}")));
        }
        if !(thickness > 0.0 && thickness.is_finite()) {
            return Err(Error::domain(format!(
                "thickness must be > 0, got {thickness}"
            )));
        }
        if !(sigma_xx >= 0.0 && sigma_xx.is_finite()) {
            return Err(Error::domain(format!(
                "sigma_xx must be >= 0, got {sigma_xx}"
            )));
        }
        Ok(Self {
            depth,
            thickness,
            sigma_xx,
        })
    }
}

impl Default for LayerStack {
    /// 360 nm deep, 47 nm thick, 1e5 S/m. The growth notes quote 46 nm for the
    /// same layer; the difference does not enter any model here.
    fn default() -> Self {
        Self {
            depth: 360e-9,
            thickness: 47e-9,
            sigma_xx: 1e5,
        }
    }
}

fn check_frequency(f: f64) -> Result<()> {
    if f > 0.0 && f.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("frequency must be > 0, got {f}")))
    }
}

/// SAW wavelength `v / f` in metres.
pub fn saw_wavelength(f: f64, m: &MaterialParams) -> Result<f64> {
    check_frequency(f)?;
    Ok(m.saw_velocity / f)
}

/// SAW wavevector `2πf / v` in rad/m.
pub fn wavevector(f: f64, m: &MaterialParams) -> Result<f64> {
    check_frequency(f)?;
    Ok(2.0 * PI * f / m.saw_velocity)
}
