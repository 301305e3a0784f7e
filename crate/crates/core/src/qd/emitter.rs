use serde::{Deserialize, Serialize};

use crate::acoustic::ResonatorParams;
use crate::error::{Error, Result};

/// Bias interval `[v_min, v_max)` with a fixed charge state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub v_min: f64,
    pub v_max: f64,
    /// Emission offset at `v_min` relative to the emitter reference (Hz).
    pub frequency_offset: f64,
}

impl Plateau {
    pub fn contains(&self, bias: f64) -> bool {
        bias >= self.v_min && bias < self.v_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterState {
    /// Optical reference frequency (Hz).
    pub base_frequency: f64,
    /// Homogeneous emission linewidth, FWHM (Hz).
    pub linewidth_fwhm: f64,
    /// Linear Stark tuning (Hz/V).
    pub stark_slope: f64,
    pub plateaus: Vec<Plateau>,
    /// Integrated count scale (arbitrary units).
    pub brightness: f64,
}

impl EmitterState {
    pub fn new(
        base_frequency: f64,
        linewidth_fwhm: f64,
        stark_slope: f64,
        plateaus: Vec<Plateau>,
        brightness: f64,
    ) -> Result<Self> {
        if !(linewidth_fwhm > 0.0 && linewidth_fwhm.is_finite()) {
            return Err(Error::domain(format!("linewidth_fwhm must be > 0, got {linewidth_fwhm}")));
        }
        if !(brightness >= 0.0 && brightness.is_finite()) {
            return Err(Error::domain(format!("brightness must be >= 0, got {brightness}")));
        }
        if !stark_slope.is_finite() || !base_frequency.is_finite() {
            return Err(Error::domain("stark_slope and base_frequency must be finite"));
        }
        for (i, p) in plateaus.iter().enumerate() {
            if !(p.v_min < p.v_max) {
                return Err(Error::domain(format!("plateau {i}: v_min must be < v_max")));
            }
            if i > 0 && p.v_min < plateaus[i - 1].v_max {
                return Err(Error::domain(format!(
                    "plateau {i}: overlaps or is out of order with plateau {}",
                    i - 1
                )));
            }
        }
        Ok(Self {
            base_frequency,
            linewidth_fwhm,
            stark_slope,
            plateaus,
            brightness,
        })
    }
}

/// Index of the plateau containing `bias`, or `None` when the emitter is dark.
pub fn charge_state(bias: f64, e: &EmitterState) -> Option<usize> {
    // Half-open intervals: a shared edge belongs to the upper plateau.
    e.plateaus.iter().position(|p| p.contains(bias))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Emission {
    Bright {
        plateau: usize,
        /// Absolute optical frequency (Hz).
        frequency: f64,
        /// Offset from `base_frequency` (Hz).
        detuning: f64,
    },
    Dark,
}

impl Emission {
    pub fn detuning(&self) -> Option<f64> {
        match self {
            Emission::Bright { detuning, .. } => Some(*detuning),
            Emission::Dark => None,
        }
    }
}

/// Emission line position at `bias`: plateau offset plus a linear Stark shift
/// measured from the plateau's lower edge.
pub fn emission_frequency(bias: f64, e: &EmitterState) -> Emission {
    match charge_state(bias, e) {
        Some(k) => {
            let p = &e.plateaus[k];
            let detuning = p.frequency_offset + e.stark_slope * (bias - p.v_min);
            Emission::Bright {
                plateau: k,
                frequency: e.base_frequency + detuning,
                detuning,
            }
        }
        None => Emission::Dark,
    }
}

/// Microwave drive of one acoustic mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationDrive {
    pub drive_frequency: f64,
    pub mode: ResonatorParams,
    /// Modulation index on resonance.
    pub delta_max: f64,
}

impl ModulationDrive {
    pub fn new(drive_frequency: f64, mode: ResonatorParams, delta_max: f64) -> Result<Self> {
        if !(drive_frequency > 0.0 && drive_frequency.is_finite()) {
            return Err(Error::domain(format!("drive_frequency must be > 0, got {drive_frequency}")));
        }
        if !(delta_max >= 0.0 && delta_max.is_finite()) {
            return Err(Error::domain(format!("delta_max must be >= 0, got {delta_max}")));
        }
        Ok(Self {
            drive_frequency,
            mode,
            delta_max,
        })
    }

    /// On-resonance index from a drive amplitude, assuming δ ∝ amplitude.
    /// `index_per_unit` is not calibrated against any measurement.
    pub fn from_drive_amplitude(
        drive_frequency: f64,
        mode: ResonatorParams,
        amplitude: f64,
        index_per_unit: f64,
    ) -> Result<Self> {
        Self::new(drive_frequency, mode, amplitude * index_per_unit)
    }

    pub fn at_frequency(&self, drive_frequency: f64) -> Result<Self> {
        Self::new(drive_frequency, self.mode, self.delta_max)
    }
}

/// δ at the drive frequency; δ² is a Lorentzian of FWHM κ_tot centred on the mode.
pub fn modulation_index(drive: &ModulationDrive) -> f64 {
    let x = 2.0 * (drive.drive_frequency - drive.mode.f0) / drive.mode.kappa_total();
    drive.delta_max / (1.0 + x * x).sqrt()
}
