//! Effects of the buried conductive layer on SAW propagation and transduction.
//!
//! The relaxation model gives, for a layer of conductivity `σ_xx`,
//!
//! ```text
//! Δv/v = (α²/2) / (1 + (σ_xx/σ_m)²)
//! κ/q  = (α²/2)(σ_xx/σ_m) / (1 + (σ_xx/σ_m)²)
//! ```
//!
//! Both are dimensionless: a fractional velocity shift and an attenuation per unit
//! wavevector. The temporal loss rate is `(κ/q)·f` in Hz and is read as an energy
//! decay rate.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::device::{LayerStack, MaterialParams};
use crate::error::{Error, Result};
use crate::interp::Pchip;

/// Coefficients of the relaxation model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationCoeffs {
    /// Effective coupling α² (dimensionless).
    pub alpha2: f64,
    /// Crossover conductivity σ_m (S/m).
    pub sigma_m: f64,
}

impl RelaxationCoeffs {
    pub fn new(alpha2: f64, sigma_m: f64) -> Result<Self> {
        if !(alpha2 > 0.0 && alpha2 < 1.0) {
            return Err(Error::domain(format!("alpha2 must lie in (0, 1), got {alpha2}")));
        }
        if !(sigma_m > 0.0 && sigma_m.is_finite()) {
            return Err(Error::domain(format!("sigma_m must be > 0, got {sigma_m}")));
        }
        Ok(Self { alpha2, sigma_m })
    }

    /// α² taken from the coupling curve at the layer depth, σ_m from the material.
    pub fn for_stack(stack: &LayerStack, material: &MaterialParams, cal: &K2Calibration) -> Result<Self> {
        Self::new(k2_effective(stack.depth, cal)?, material.sigma_m)
    }
}

fn reduced_conductivity(sigma_xx: f64, c: &RelaxationCoeffs) -> Result<f64> {
    if !(sigma_xx >= 0.0) {
        return Err(Error::domain(format!("conductivity must be >= 0, got {sigma_xx}")));
    }
    Ok(sigma_xx / c.sigma_m)
}

/// Fractional SAW velocity shift Δv/v.
pub fn velocity_shift_fraction(sigma_xx: f64, c: &RelaxationCoeffs) -> Result<f64> {
    let r = reduced_conductivity(sigma_xx, c)?;
    if r.is_infinite() {
        return Ok(0.0);
    }
    Ok(0.5 * c.alpha2 / (1.0 + r * r))
}

/// Attenuation per unit wavevector κ/q.
pub fn attenuation_per_wavevector(sigma_xx: f64, c: &RelaxationCoeffs) -> Result<f64> {
    let r = reduced_conductivity(sigma_xx, c)?;
    if r.is_infinite() {
        return Ok(0.0);
    }
    // r/(1+r²) written as 1/(r + 1/r) for large r to avoid overflow of r².
    let shape = if r > 1.0 { 1.0 / (r + 1.0 / r) } else { r / (1.0 + r * r) };
    Ok(0.5 * c.alpha2 * shape)
}

/// Temporal loss rate in Hz at SAW frequency `f`.
pub fn attenuation_rate_hz(sigma_xx: f64, c: &RelaxationCoeffs, f: f64) -> Result<f64> {
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::domain(format!("frequency must be > 0, got {f}")));
    }
    Ok(attenuation_per_wavevector(sigma_xx, c)? * f)
}

/// Conduction regime of the layer relative to σ_m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Dielectric,
    Crossover,
    Metallic,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Dielectric => "dielectric",
            Regime::Crossover => "crossover",
            Regime::Metallic => "metallic",
        })
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dielectric" => Ok(Regime::Dielectric),
            "crossover" => Ok(Regime::Crossover),
            "metallic" => Ok(Regime::Metallic),
            other => Err(Error::Parse(format!("unknown regime `{other}`"))),
        }
    }
}

/// Dielectric below σ_m/10, metallic above 10·σ_m. Metadata only.
pub fn regime_classify(sigma_xx: f64, c: &RelaxationCoeffs) -> Result<Regime> {
    let r = reduced_conductivity(sigma_xx, c)?;
    Ok(if r < 0.1 {
        Regime::Dielectric
    } else if r > 10.0 {
        Regime::Metallic
    } else {
        Regime::Crossover
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct K2Anchor {
    /// Depth of the conductive layer below the surface (m).
    pub depth: f64,
    pub k2: f64,
}

/// Effective coupling k² as a function of conductive-layer depth.
///
/// Interpolation is PCHIP in ln(depth), so the curve is a smooth monotone S-shape
/// that hits every anchor exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct K2Calibration {
    anchors: Vec<K2Anchor>,
    k2_bulk: f64,
    curve: Option<Pchip>,
}

impl K2Calibration {
    /// Anchors must have strictly increasing positive depths and non-decreasing
    /// k² values within `(0, k2_bulk]`. An empty list is accepted here and
    /// reported when the curve is evaluated.
    pub fn new(anchors: Vec<K2Anchor>, k2_bulk: f64) -> Result<Self> {
        if !(k2_bulk > 0.0 && k2_bulk < 1.0) {
            return Err(Error::config(None, format!("k2_bulk must lie in (0, 1), got {k2_bulk}")));
        }
        for (i, a) in anchors.iter().enumerate() {
            if !(a.depth > 0.0 && a.depth.is_finite()) {
                return Err(Error::config(None, format!("anchor {i}: depth must be > 0")));
            }
            if !(a.k2 > 0.0 && a.k2 <= k2_bulk) {
                return Err(Error::config(
                    None,
                    format!("anchor {i}: k2 = {} outside (0, k2_bulk = {k2_bulk}]", a.k2),
                ));
            }
            if i > 0 {
                let prev = &anchors[i - 1];
                if a.depth <= prev.depth {
                    return Err(Error::config(None, format!("anchor {i}: depths must be strictly increasing")));
                }
                if a.k2 < prev.k2 {
                    return Err(Error::config(None, format!("anchor {i}: k2 must not decrease with depth")));
                }
            }
        }
        let curve = if anchors.is_empty() {
            None
        } else {
            Some(Pchip::new(
                anchors.iter().map(|a| a.depth.ln()).collect(),
                anchors.iter().map(|a| a.k2).collect(),
            )?)
        };
        Ok(Self {
            anchors,
            k2_bulk,
            curve,
        })
    }

    /// Coupling curve for GaAs: 360 nm and 500 nm anchors are computed values; the
    /// 50 nm and 100 nm anchors only encode strong screening near the surface.
    pub fn gaas_default() -> Self {
        let k2_bulk = crate::device::GAAS_K2_BULK;
        Self::new(
            vec![
                K2Anchor { depth: 50e-9, k2: 0.1 * k2_bulk },
                K2Anchor { depth: 100e-9, k2: 0.5 * k2_bulk },
                K2Anchor { depth: 360e-9, k2: 5.5e-4 },
                K2Anchor { depth: 500e-9, k2: 7.0e-4 },
            ],
            k2_bulk,
        )
        .expect("default anchors are valid")
    }

    pub fn anchors(&self) -> &[K2Anchor] {
        &self.anchors
    }

    pub fn k2_bulk(&self) -> f64 {
        self.k2_bulk
    }
}

impl Default for K2Calibration {
    fn default() -> Self {
        Self::gaas_default()
    }
}

/// Effective k² for a conductive layer at `depth` (m).
pub fn k2_effective(depth: f64, cal: &K2Calibration) -> Result<f64> {
    if !(depth >= 0.0) {
        return Err(Error::domain(format!("depth must be >= 0, got {depth}")));
    }
    let curve = cal
        .curve
        .as_ref()
        .ok_or_else(|| Error::config(None, "k2_calibration has no anchors"))?;
    let first = cal.anchors[0];
    let last = cal.anchors[cal.anchors.len() - 1];
    if depth > last.depth {
        return Ok(cal.k2_bulk);
    }
    if depth <= first.depth {
        return Ok(first.k2);
    }
    Ok(curve.eval(depth.ln()).min(cal.k2_bulk))
}

/// Fraction of incident power reflected at a `z_line` / `z_ref` impedance step.
pub fn cpw_mismatch_reflected_fraction(z_line: f64, z_ref: f64) -> Result<f64> {
    if !(z_line > 0.0 && z_ref > 0.0) || !z_line.is_finite() || !z_ref.is_finite() {
        return Err(Error::domain(format!(
            "impedances must be > 0, got z_line = {z_line}, z_ref = {z_ref}"
        )));
    }
    let gamma = (z_line - z_ref) / (z_line + z_ref);
    Ok(gamma * gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn coeffs() -> RelaxationCoeffs {
        RelaxationCoeffs::new(7e-4, 10.0).unwrap()
    }

    #[test]
    fn velocity_shift_examples() {
        let c = coeffs();
        assert_eq!(velocity_shift_fraction(0.0, &c).unwrap(), 3.5e-4);
        assert_eq!(velocity_shift_fraction(10.0, &c).unwrap(), 1.75e-4);
        assert_relative_eq!(velocity_shift_fraction(100.0, &c).unwrap(), 3.465e-6, max_relative = 1e-3);
        assert!(velocity_shift_fraction(-1.0, &c).is_err());
    }

    #[test]
    fn attenuation_examples() {
        let c = coeffs();
        assert_eq!(attenuation_per_wavevector(0.0, &c).unwrap(), 0.0);
        assert_relative_eq!(attenuation_per_wavevector(10.0, &c).unwrap(), 1.75e-4, max_relative = 1e-15);
        assert_eq!(attenuation_per_wavevector(f64::INFINITY, &c).unwrap(), 0.0);
        assert!(attenuation_per_wavevector(1e300, &c).unwrap() < 1e-300);
        assert!(attenuation_per_wavevector(-1e-3, &c).is_err());
    }

    #[test]
    fn loss_rate_examples() {
        let c = RelaxationCoeffs::new(5.5e-4, 10.0).unwrap();
        // (α²/2)·r/(1+r²)·f with r = 1e4: 2.75e-4 · 9.9999999e-5 · 3.5e9
        let rate = attenuation_rate_hz(1e5, &c, 3.5e9).unwrap();
        assert_relative_eq!(rate, 96.25, max_relative = 1e-6);
        assert_eq!(attenuation_rate_hz(0.0, &c, 3.5e9).unwrap(), 0.0);
        assert_relative_eq!(attenuation_rate_hz(10.0, &c, 3.5e9).unwrap(), 5.5e-4 * 3.5e9 / 4.0, max_relative = 1e-14);
        assert!(attenuation_rate_hz(1.0, &c, 0.0).is_err());
    }

    #[test]
    fn regimes() {
        let c = coeffs();
        assert_eq!(regime_classify(1e5, &c).unwrap(), Regime::Metallic);
        assert_eq!(regime_classify(10.0, &c).unwrap(), Regime::Crossover);
        assert_eq!(regime_classify(0.0, &c).unwrap(), Regime::Dielectric);
        assert_eq!(regime_classify(0.99, &c).unwrap(), Regime::Dielectric);
        assert_eq!(regime_classify(1.0, &c).unwrap(), Regime::Crossover);
        assert_eq!(regime_classify(100.0, &c).unwrap(), Regime::Crossover);
        assert!(regime_classify(-1.0, &c).is_err());
    }

    #[test]
    fn k2_examples() {
        let cal = K2Calibration::gaas_default();
        assert_eq!(k2_effective(360e-9, &cal).unwrap(), 5.5e-4);
        assert_eq!(k2_effective(500e-9, &cal).unwrap(), 7.0e-4);
        assert_eq!(k2_effective(2e-6, &cal).unwrap(), 7.0e-4);
        assert_eq!(k2_effective(100e-9, &cal).unwrap(), 3.5e-4);
        assert_eq!(k2_effective(0.0, &cal).unwrap(), 0.1 * 7.0e-4);
        assert!(k2_effective(-1e-9, &cal).is_err());
        // roughly 80 % of the bulk value at the device depth
        assert_relative_eq!(k2_effective(360e-9, &cal).unwrap() / cal.k2_bulk(), 0.7857, max_relative = 1e-3);
    }

    #[test]
    fn k2_empty_and_invalid_calibrations() {
        let empty = K2Calibration::new(vec![], 7e-4).unwrap();
        assert!(matches!(k2_effective(1e-7, &empty), Err(Error::Config { .. })));
        let bad_order = vec![
            K2Anchor { depth: 2e-7, k2: 1e-4 },
            K2Anchor { depth: 1e-7, k2: 2e-4 },
        ];
        assert!(K2Calibration::new(bad_order, 7e-4).is_err());
        let above_bulk = vec![K2Anchor { depth: 1e-7, k2: 8e-4 }];
        assert!(K2Calibration::new(above_bulk, 7e-4).is_err());
    }

    #[test]
    fn k2_clamps_to_bulk_past_last_anchor() {
        let cal = K2Calibration::new(
            vec![K2Anchor { depth: 1e-7, k2: 1e-4 }, K2Anchor { depth: 3e-7, k2: 5e-4 }],
            7e-4,
        )
        .unwrap();
        assert_eq!(k2_effective(3e-7, &cal).unwrap(), 5e-4);
        assert_eq!(k2_effective(3.0001e-7, &cal).unwrap(), 7e-4);
        assert_eq!(k2_effective(5e-8, &cal).unwrap(), 1e-4);
    }

    #[test]
    fn cpw_examples() {
        assert_eq!(cpw_mismatch_reflected_fraction(50.0, 50.0).unwrap(), 0.0);
        assert_relative_eq!(cpw_mismatch_reflected_fraction(25.0, 50.0).unwrap(), 1.0 / 9.0, max_relative = 1e-15);
        assert_relative_eq!(cpw_mismatch_reflected_fraction(100.0, 50.0).unwrap(), 1.0 / 9.0, max_relative = 1e-15);
        assert!(cpw_mismatch_reflected_fraction(0.0, 50.0).is_err());
        assert!(cpw_mismatch_reflected_fraction(50.0, -50.0).is_err());
    }

    proptest! {
        #[test]
        fn shift_and_attenuation_pair(sigma in 0.0f64..1e7, alpha2 in 1e-5f64..0.5, sigma_m in 1e-2f64..1e3) {
            let c = RelaxationCoeffs::new(alpha2, sigma_m).unwrap();
            let lhs = velocity_shift_fraction(sigma, &c).unwrap() * sigma / sigma_m;
            let rhs = attenuation_per_wavevector(sigma, &c).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn attenuation_peaks_at_sigma_m(sigma in 0.0f64..1e6, sigma_m in 1e-1f64..1e3) {
            let c = RelaxationCoeffs::new(7e-4, sigma_m).unwrap();
            let peak = attenuation_per_wavevector(sigma_m, &c).unwrap();
            prop_assert!(attenuation_per_wavevector(sigma, &c).unwrap() <= peak * (1.0 + 1e-15));
        }

        #[test]
        fn k2_stays_below_bulk(depth in 0.0f64..2e-6) {
            let cal = K2Calibration::gaas_default();
            let k = k2_effective(depth, &cal).unwrap();
            prop_assert!(k > 0.0 && k <= cal.k2_bulk());
        }

        #[test]
        fn cpw_reciprocal_symmetry(z in 1.0f64..500.0) {
            let a = cpw_mismatch_reflected_fraction(z, 50.0).unwrap();
            let b = cpw_mismatch_reflected_fraction(2500.0 / z, 50.0).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
