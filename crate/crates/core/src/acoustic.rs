//! Frequency-domain models of IDTs, Bragg mirrors, delay lines and one-port SAW
//! resonators.
//!
//! Linewidths (`kappa_*`) are full widths in Hz, so the one-port reflection is
//!
//! ```text
//! S11(f) = 1 − κ_ext / (i(f − f0) + (κ_int + κ_ext)/2) + crosstalk
//! ```
//!
//! which tends to `1 + crosstalk` away from resonance and dips at `f0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be > 0, got {v}")))
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Interdigitated transducer in the delta-function (sinc envelope) approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdtSpec {
    /// Synchronous frequency (Hz).
    pub center_frequency: f64,
    /// Number of finger pairs.
    pub n_pairs: u32,
    /// Peak electrical-to-acoustic amplitude conversion.
    pub peak_conversion: f64,
    /// Coupling k² the conversion refers to.
    pub k2: f64,
}

impl IdtSpec {
    pub fn new(center_frequency: f64, n_pairs: u32, peak_conversion: f64, k2: f64) -> Result<Self> {
        check_positive("center_frequency", center_frequency)?;
        if n_pairs < 1 {
            return Err(Error::domain("n_pairs must be >= 1"));
        }
        if !(peak_conversion > 0.0 && peak_conversion <= 1.0) {
            return Err(Error::domain(format!(
                "peak_conversion must lie in (0, 1], got {peak_conversion}"
            )));
        }
        if !(k2 > 0.0 && k2 < 1.0) {
            return Err(Error::domain(format!("k2 must lie in (0, 1), got {k2}")));
        }
        Ok(Self {
            center_frequency,
            n_pairs,
            peak_conversion,
            k2,
        })
    }

    /// Same transducer on a substrate with coupling `k2`. Converted power scales
    /// with k², so the amplitude scales with its square root.
    pub fn with_coupling(&self, k2: f64) -> Result<Self> {
        let ratio = (k2 / self.k2).sqrt();
        Self::new(
            self.center_frequency,
            self.n_pairs,
            (self.peak_conversion * ratio).min(1.0),
            k2,
        )
    }
}

/// Complex conversion amplitude of an IDT at `f`.
pub fn idt_response(f: f64, s: &IdtSpec) -> Result<Complex64> {
    check_positive("frequency", f)?;
    let f0 = s.center_frequency;
    let n = s.n_pairs as f64;
    let amp = s.peak_conversion * sinc(n * PI * (f - f0) / f0);
    // Delay from the transducer edge to its acoustic centre, N/(2 f0).
    let phase = -2.0 * PI * f * n / (2.0 * f0);
    Ok(Complex64::from_polar(1.0, phase) * amp)
}

/// Electrical reflection of a delay-line IDT: the power not converted to SAW.
pub fn idt_reflection(f: f64, s: &IdtSpec) -> Result<Complex64> {
    let a = idt_response(f, s)?.norm_sqr();
    Ok(Complex64::new((1.0 - a).max(0.0).sqrt(), 0.0))
}

/// Etched-groove Bragg mirror.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorSpec {
    pub n_lines: u32,
    /// Reflectivity of a single groove, |r_s| ≪ 1.
    pub reflectivity_per_line: f64,
    pub stopband_center: f64,
    pub stopband_width: f64,
}

impl MirrorSpec {
    pub fn new(n_lines: u32, reflectivity_per_line: f64, stopband_center: f64, stopband_width: f64) -> Result<Self> {
        if n_lines < 1 {
            return Err(Error::domain("n_lines must be >= 1"));
        }
        if !(reflectivity_per_line > 0.0 && reflectivity_per_line < 1.0) {
            return Err(Error::domain(format!(
                "reflectivity_per_line must lie in (0, 1), got {reflectivity_per_line}"
            )));
        }
        check_positive("stopband_center", stopband_center)?;
        check_positive("stopband_width", stopband_width)?;
        Ok(Self {
            n_lines,
            reflectivity_per_line,
            stopband_center,
            stopband_width,
        })
    }
}

/// Complex mirror reflection coefficient.
///
/// Flat `tanh(N·r_s)` over the central half of the stopband, raised-cosine roll-off
/// to zero at `±stopband_width` from the centre. The phase is linear in detuning.
/// Only the in-band magnitude is physically calibrated.
pub fn mirror_reflectivity(f: f64, s: &MirrorSpec) -> Result<Complex64> {
    check_positive("frequency", f)?;
    let detune = f - s.stopband_center;
    let half = 0.5 * s.stopband_width;
    let a = detune.abs();
    let window = if a <= half {
        1.0
    } else if a < s.stopband_width {
        0.5 * (1.0 + (PI * (a - half) / half).cos())
    } else {
        0.0
    };
    let mag = (s.n_lines as f64 * s.reflectivity_per_line).tanh() * window;
    Ok(Complex64::from_polar(mag, -PI * detune / s.stopband_width))
}

/// One-port resonator mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    /// Mode frequency (Hz).
    pub f0: f64,
    /// Internal loss rate, full width (Hz).
    pub kappa_int: f64,
    /// External (port) coupling rate, full width (Hz).
    pub kappa_ext: f64,
    /// Frequency-independent electrical crosstalk.
    pub crosstalk: Complex64,
}

impl ResonatorParams {
    pub fn new(f0: f64, kappa_int: f64, kappa_ext: f64, crosstalk: Complex64) -> Result<Self> {
        check_positive("f0", f0)?;
        check_positive("kappa_int", kappa_int)?;
        if !(kappa_ext >= 0.0 && kappa_ext.is_finite()) {
            return Err(Error::domain(format!("kappa_ext must be >= 0, got {kappa_ext}")));
        }
        Ok(Self {
            f0,
            kappa_int,
            kappa_ext,
            crosstalk,
        })
    }

    pub fn kappa_total(&self) -> f64 {
        self.kappa_int + self.kappa_ext
    }
}

/// One-port reflection S11 at `f`.
pub fn s11_resonator(f: f64, p: &ResonatorParams) -> Complex64 {
    let denom = Complex64::new(0.5 * p.kappa_total(), f - p.f0);
    Complex64::new(1.0, 0.0) - p.kappa_ext / denom + p.crosstalk
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QFactors {
    pub q_int: f64,
    /// Infinite when the mode is uncoupled.
    pub q_ext: f64,
    pub q_loaded: f64,
}

pub fn q_factors(p: &ResonatorParams) -> QFactors {
    QFactors {
        q_int: p.f0 / p.kappa_int,
        q_ext: if p.kappa_ext == 0.0 {
            f64::INFINITY
        } else {
            p.f0 / p.kappa_ext
        },
        q_loaded: p.f0 / p.kappa_total(),
    }
}

/// Two-IDT delay line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayLineSpec {
    pub idt_a: IdtSpec,
    pub idt_b: IdtSpec,
    /// Edge-to-edge propagation length (m).
    pub gap: f64,
    /// Amplitude attenuation coefficient (1/m).
    pub loss_per_length: f64,
    pub crosstalk: Complex64,
    /// SAW phase velocity used for the propagation phase (m/s).
    pub saw_velocity: f64,
}

impl DelayLineSpec {
    pub fn new(
        idt_a: IdtSpec,
        idt_b: IdtSpec,
        gap: f64,
        loss_per_length: f64,
        crosstalk: Complex64,
        saw_velocity: f64,
    ) -> Result<Self> {
        check_positive("gap", gap)?;
        if !(loss_per_length >= 0.0 && loss_per_length.is_finite()) {
            return Err(Error::domain(format!(
                "loss_per_length must be >= 0, got {loss_per_length}"
            )));
        }
        check_positive("saw_velocity", saw_velocity)?;
        Ok(Self {
            idt_a,
            idt_b,
            gap,
            loss_per_length,
            crosstalk,
            saw_velocity,
        })
    }

    /// Acoustic path only, without crosstalk.
    pub fn acoustic_term(&self, f: f64) -> Result<Complex64> {
        let a = idt_response(f, &self.idt_a)?;
        let b = idt_response(f, &self.idt_b)?;
        let prop = Complex64::from_polar(
            (-self.loss_per_length * self.gap).exp(),
            2.0 * PI * f * self.gap / self.saw_velocity,
        );
        Ok(a * b * prop)
    }
}

/// Transmission S21 of a delay line: acoustic path plus constant crosstalk.
pub fn s21_delay_line(f: f64, d: &DelayLineSpec) -> Result<Complex64> {
    Ok(d.acoustic_term(f)? + d.crosstalk)
}

/// Sum of per-length amplitude loss contributions (1/m).
pub fn total_propagation_loss(contributions: &[f64]) -> Result<f64> {
    if let Some((i, v)) = contributions
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
    {
        return Err(Error::domain(format!("loss contribution {i} = {v} is negative")));
    }
    Ok(contributions.iter().sum())
}

/// Converts a temporal loss rate (Hz) into a per-length coefficient (1/m).
pub fn rate_to_loss_per_length(rate_hz: f64, saw_velocity: f64) -> Result<f64> {
    check_positive("saw_velocity", saw_velocity)?;
    if !(rate_hz >= 0.0) {
        return Err(Error::domain(format!("loss rate must be >= 0, got {rate_hz}")));
    }
    Ok(rate_hz / saw_velocity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn idt() -> IdtSpec {
        IdtSpec::new(3.5e9, 50, 0.5, 7e-4).unwrap()
    }

    #[test]
    fn idt_examples() {
        let s = idt();
        assert_relative_eq!(idt_response(3.5e9, &s).unwrap().norm(), 0.5, max_relative = 1e-14);
        assert!(idt_response(3.5e9 * (1.0 + 1.0 / 50.0), &s).unwrap().norm() < 1e-14);
        assert_relative_eq!(
            idt_response(3.5e9 * (1.0 + 0.5 / 50.0), &s).unwrap().norm(),
            0.5 * 2.0 / PI,
            max_relative = 1e-12
        );
        assert!(idt_response(0.0, &s).is_err());
        assert!(IdtSpec::new(3.5e9, 0, 0.5, 7e-4).is_err());
        assert!(IdtSpec::new(3.5e9, 10, 1.5, 7e-4).is_err());
    }

    #[test]
    fn idt_coupling_scaling() {
        let s = idt().with_coupling(5.5e-4).unwrap();
        assert_relative_eq!(s.peak_conversion, 0.5 * (5.5f64 / 7.0).sqrt(), max_relative = 1e-14);
        let r = idt_reflection(3.5e9, &idt()).unwrap();
        assert_relative_eq!(r.norm_sqr(), 0.75, max_relative = 1e-12);
    }

    #[test]
    fn mirror_examples() {
        let small = MirrorSpec::new(100, 1e-4, 3.5e9, 50e6).unwrap();
        assert_relative_eq!(mirror_reflectivity(3.5e9, &small).unwrap().norm(), 0.01f64.tanh(), max_relative = 1e-14);
        assert!((mirror_reflectivity(3.5e9, &small).unwrap().norm() - 0.0100).abs() < 1e-6);
        let strong = MirrorSpec::new(500, 0.01, 3.5e9, 50e6).unwrap();
        assert_relative_eq!(mirror_reflectivity(3.5e9, &strong).unwrap().norm(), 0.999_909_2, max_relative = 1e-6);
        assert_eq!(mirror_reflectivity(3.7e9, &strong).unwrap().norm(), 0.0);
        for i in 0..200 {
            let f = 3.4e9 + i as f64 * 1e6;
            assert!(mirror_reflectivity(f, &strong).unwrap().norm() < 1.0);
        }
    }

    #[test]
    fn s11_examples() {
        let crit = ResonatorParams::new(3.5e9, 1e5, 1e5, Complex64::new(0.0, 0.0)).unwrap();
        assert!(s11_resonator(3.5e9, &crit).norm() < 1e-15);
        // half-width offset of the total linewidth
        for sign in [-1.0, 1.0] {
            let f = 3.5e9 + sign * crit.kappa_total() / 2.0;
            assert_relative_eq!(s11_resonator(f, &crit).norm_sqr(), 0.5, max_relative = 1e-9);
        }
        let x = Complex64::new(0.02, -0.01);
        let off = ResonatorParams::new(3.5e9, 1e5, 0.0, x).unwrap();
        for f in [3.4e9, 3.5e9, 3.6e9] {
            assert_eq!(s11_resonator(f, &off), Complex64::new(1.0, 0.0) + x);
        }
    }

    #[test]
    fn q_factor_examples() {
        let p = ResonatorParams::new(3.5e9, 125e3, 125e3, Complex64::default()).unwrap();
        let q = q_factors(&p);
        assert_relative_eq!(q.q_int, 28_000.0, max_relative = 1e-14);
        assert_relative_eq!(q.q_loaded, q.q_int / 2.0, max_relative = 1e-14);
        let fig3d = ResonatorParams::new(3.53388e9, 116e3, 116e3, Complex64::default()).unwrap();
        assert_relative_eq!(q_factors(&fig3d).q_loaded, 15_232.24, max_relative = 1e-6);
        let uncoupled = ResonatorParams::new(3.5e9, 1e5, 0.0, Complex64::default()).unwrap();
        assert!(q_factors(&uncoupled).q_ext.is_infinite());
    }

    #[test]
    fn delay_line_examples() {
        let clean = DelayLineSpec::new(idt(), idt(), 400e-6, 0.0, Complex64::default(), 2864.0).unwrap();
        assert_relative_eq!(s21_delay_line(3.5e9, &clean).unwrap().norm(), 0.25, max_relative = 1e-12);

        let lossy = |gap| DelayLineSpec::new(idt(), idt(), gap, 35.0, Complex64::default(), 2864.0).unwrap();
        let a1 = s21_delay_line(3.5e9, &lossy(400e-6)).unwrap().norm();
        let a2 = s21_delay_line(3.5e9, &lossy(800e-6)).unwrap().norm();
        assert_relative_eq!(a2 / a1, (-35.0f64 * 400e-6).exp(), max_relative = 1e-12);

        // ripple from a crosstalk phasor at 10 % of the acoustic amplitude; a
        // single-pair IDT keeps the envelope flat over one ripple period
        let broad = IdtSpec::new(3.5e9, 1, 0.5, 7e-4).unwrap();
        let acoustic = 0.25;
        let d = DelayLineSpec::new(broad, broad, 400e-6, 0.0, Complex64::new(0.1 * acoustic, 0.0), 2864.0).unwrap();
        let period = 2864.0 / 400e-6;
        let mags: Vec<f64> = (0..2001)
            .map(|i| 3.5e9 - period + i as f64 * period / 1000.0)
            .map(|f| s21_delay_line(f, &d).unwrap().norm())
            .collect();
        let max = mags.iter().cloned().fold(f64::MIN, f64::max);
        let min = mags.iter().cloned().fold(f64::MAX, f64::min);
        assert_relative_eq!(max - min, 0.2 * acoustic, max_relative = 2e-3);
    }

    #[test]
    fn loss_aggregation() {
        assert_eq!(total_propagation_loss(&[]).unwrap(), 0.0);
        assert_eq!(total_propagation_loss(&[1.5, 2.25]).unwrap(), 3.75);
        assert!(total_propagation_loss(&[1.0, -0.5]).is_err());
        let layer = rate_to_loss_per_length(96.2, 2864.0).unwrap();
        assert_relative_eq!(layer, 0.03359, max_relative = 1e-3);
        let typical = rate_to_loss_per_length(100e3, 2864.0).unwrap();
        assert!(layer / typical < 1e-3);
    }

    proptest! {
        #[test]
        fn s11_bounded_without_crosstalk(ki in 1e3f64..1e6, ke in 0.0f64..1e6, df in -1e7f64..1e7) {
            let p = ResonatorParams::new(3.5e9, ki, ke, Complex64::default()).unwrap();
            prop_assert!(s11_resonator(3.5e9 + df, &p).norm() <= 1.0 + 1e-12);
        }

        #[test]
        fn s11_dip_depth(ki in 1e3f64..1e6, ke in 0.0f64..1e6) {
            let p = ResonatorParams::new(3.5e9, ki, ke, Complex64::default()).unwrap();
            let expect = ((ki - ke) / (ki + ke)).powi(2);
            prop_assert!((s11_resonator(3.5e9, &p).norm_sqr() - expect).abs() < 1e-10);
        }

        #[test]
        fn idt_magnitude_is_even(df in 0.0f64..2e8) {
            let s = idt();
            let lo = idt_response(3.5e9 - df, &s).unwrap().norm();
            let hi = idt_response(3.5e9 + df, &s).unwrap().norm();
            prop_assert!((lo - hi).abs() < 1e-12);
            prop_assert!(hi <= s.peak_conversion + 1e-15);
        }

        #[test]
        fn delay_line_log_magnitude_linear_in_gap(loss in 1e-3f64..100.0, g1 in 1e-5f64..2e-3, g2 in 1e-5f64..2e-3) {
            let mk = |gap| DelayLineSpec::new(idt(), idt(), gap, loss, Complex64::default(), 2864.0).unwrap();
            let l1 = s21_delay_line(3.5e9, &mk(g1)).unwrap().norm().ln();
            let l2 = s21_delay_line(3.5e9, &mk(g2)).unwrap().norm().ln();
            prop_assert!(((l2 - l1) - (-loss * (g2 - g1))).abs() < 1e-9);
            if g2 > g1 { prop_assert!(l2 < l1); }
        }
    }
}
