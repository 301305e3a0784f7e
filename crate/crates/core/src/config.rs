//! TOML device description. Every key has a default; the shipped `config/reference.toml`
//! spells all of them out with their sources.

use crate::acoustic::{rate_to_loss_per_length, total_propagation_loss, IdtSpec, ResonatorParams};
use crate::device::{LayerStack, MaterialParams};
use crate::error::{Error, Result};
use crate::layer::{attenuation_rate_hz, cpw_mismatch_reflected_fraction, k2_effective, K2Anchor, K2Calibration, RelaxationCoeffs};
use crate::qd::{EmitterState, FilterSpec, ModulationDrive, Plateau};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

const REFERENCE_TOML: &str = include_str!("../config/reference.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub material: MaterialSection,
    pub layer: LayerSection,
    pub k2_calibration: K2Section,
    pub cpw: CpwSection,
    pub resonator: ResonatorSection,
    pub delay_line: DelayLineSection,
    pub emitter: EmitterSection,
    pub acoustic_mode: AcousticModeSection,
    pub filter: FilterSection,
    pub sweeps: SweepSection,
    pub noise: NoiseSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialSection {
    pub saw_velocity_m_per_s: f64,
    pub k2_bulk: f64,
    #[serde(rename = "sigma_m_S_per_m")]
    pub sigma_m: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self {
            saw_velocity_m_per_s: 2864.0,
            k2_bulk: 7.0e-4,
            sigma_m: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayerSection {
    pub depth_nm: f64,
    pub thickness_nm: f64,
    #[serde(rename = "sigma_xx_S_per_m")]
    pub sigma_xx: f64,
    /// Relaxation α²; when absent, k² at the layer depth is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
}

impl Default for LayerSection {
    fn default() -> Self {
        Self {
            depth_nm: 360.0,
            thickness_nm: 47.0,
            sigma_xx: 1.0e5,
            alpha2: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorEntry {
    pub depth_nm: f64,
    pub k2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct K2Section {
    pub anchors: Vec<AnchorEntry>,
}

impl Default for K2Section {
    fn default() -> Self {
        let a = |depth_nm, k2| AnchorEntry { depth_nm, k2 };
        Self {
            anchors: vec![a(50.0, 7.0e-5), a(100.0, 3.5e-4), a(360.0, 5.5e-4), a(500.0, 7.0e-4)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpwSection {
    pub z_ref_ohm: f64,
    /// Line impedance when the doped layer runs under the CPW.
    pub z_line_doped_ohm: f64,
    pub doped_layer_under_cpw: bool,
}

impl Default for CpwSection {
    fn default() -> Self {
        Self {
            z_ref_ohm: 50.0,
            z_line_doped_ohm: 40.0,
            doped_layer_under_cpw: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonatorSection {
    pub f0_hz: f64,
    pub kappa_int_hz: f64,
    pub kappa_ext_hz: f64,
    pub crosstalk_re: f64,
    pub crosstalk_im: f64,
    pub span_hz: f64,
    pub n_points: usize,
}

impl Default for ResonatorSection {
    fn default() -> Self {
        Self {
            f0_hz: 3.5e9,
            kappa_int_hz: 125.0e3,
            kappa_ext_hz: 100.0e3,
            crosstalk_re: 0.0,
            crosstalk_im: 0.0,
            span_hz: 2.0e6,
            n_points: 801,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayLineSection {
    pub center_frequency_hz: f64,
    pub n_pairs: u32,
    pub peak_conversion: f64,
    /// Substrate carries the buried doped layer.
    pub doped_layer: bool,
    /// Amplitude loss without the layer (1/m).
    pub base_loss_per_m: f64,
    pub crosstalk_reference: f64,
    pub crosstalk_doped: f64,
    pub gaps_um: Vec<f64>,
    pub span_hz: f64,
    pub n_points: usize,
}

impl Default for DelayLineSection {
    fn default() -> Self {
        Self {
            center_frequency_hz: 3.5e9,
            n_pairs: 40,
            peak_conversion: 0.5,
            doped_layer: true,
            base_loss_per_m: 35.0,
            crosstalk_reference: 0.003,
            crosstalk_doped: 0.006,
            gaps_um: vec![200.0, 400.0, 600.0, 800.0, 1000.0],
            span_hz: 400.0e6,
            n_points: 801,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateauEntry {
    pub v_min: f64,
    pub v_max: f64,
    pub frequency_offset_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitterSection {
    pub base_frequency_hz: f64,
    pub linewidth_hz: f64,
    pub stark_slope_hz_per_v: f64,
    pub brightness: f64,
    pub plateaus: Vec<PlateauEntry>,
}

impl Default for EmitterSection {
    fn default() -> Self {
        let p = |v_min, v_max, frequency_offset_hz| PlateauEntry {
            v_min,
            v_max,
            frequency_offset_hz,
        };
        Self {
            base_frequency_hz: 3.2e14,
            linewidth_hz: 643.6e6,
            stark_slope_hz_per_v: 1.3e11,
            brightness: 1.0,
            plateaus: vec![p(-0.06, -0.02, 5.0e9), p(-0.02, 0.04, -2.6e9), p(0.04, 0.08, -8.0e9)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcousticModeSection {
    pub f0_hz: f64,
    pub kappa_int_hz: f64,
    pub kappa_ext_hz: f64,
    pub delta_max: f64,
    pub drive_frequency_hz: f64,
    pub bias_v: f64,
}

impl Default for AcousticModeSection {
    fn default() -> Self {
        Self {
            f0_hz: 3.53388e9,
            kappa_int_hz: 116.0e3,
            kappa_ext_hz: 116.0e3,
            delta_max: 1.0,
            drive_frequency_hz: 3.53388e9,
            bias_v: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub fwhm_hz: f64,
    pub scan_min_hz: f64,
    pub scan_max_hz: f64,
    pub n_points: usize,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            fwhm_hz: 600.0e6,
            scan_min_hz: -15.0e9,
            scan_max_hz: 15.0e9,
            n_points: 601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    #[serde(rename = "sigma_min_S_per_m")]
    pub sigma_min: f64,
    #[serde(rename = "sigma_max_S_per_m")]
    pub sigma_max: f64,
    pub sigma_points: usize,
    pub loss_frequency_hz: f64,
    pub depth_min_nm: f64,
    pub depth_max_nm: f64,
    pub depth_points: usize,
    pub bias_min_v: f64,
    pub bias_max_v: f64,
    pub bias_points: usize,
    pub drive_span_hz: f64,
    pub drive_points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            sigma_min: 1.0e-2,
            sigma_max: 1.0e8,
            sigma_points: 201,
            loss_frequency_hz: 3.5e9,
            depth_min_nm: 10.0,
            depth_max_nm: 1000.0,
            depth_points: 199,
            bias_min_v: -0.08,
            bias_max_v: 0.10,
            bias_points: 181,
            drive_span_hz: 1.2e6,
            drive_points: 61,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub snr_db: f64,
    pub seed: u64,
    pub monte_carlo_trials: usize,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            snr_db: 30.0,
            seed: 1,
            monte_carlo_trials: 1000,
        }
    }
}

/// 1-based line of `key` inside `[section]` (or of the `nth` `[[section]]` header
/// when `key` is empty). Falls back to the section header, then to `None`.
fn locate(src: &str, section: &str, key: &str, nth: usize) -> Option<usize> {
    let mut current = String::new();
    let mut header_line = None;
    let mut seen = 0usize;
    let mut key_hits = 0usize;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') {
            let name = line.trim_matches(|c| c == '[' || c == ']').trim();
            current = name.to_string();
            if name == section {
                if line.starts_with("[[") {
                    if seen == nth {
                        if key.is_empty() {
                            return Some(i + 1);
                        }
                        header_line = Some(i + 1);
                    }
                    seen += 1;
                } else {
                    header_line = Some(i + 1);
                }
            }
            continue;
        }
        if current != section || key.is_empty() {
            continue;
        }
        let mut rest = line;
        while let Some(pos) = rest.find(key) {
            let before_ok = pos == 0 || !rest.as_bytes()[pos - 1].is_ascii_alphanumeric() && rest.as_bytes()[pos - 1] != b'_';
            let after = rest[pos + key.len()..].trim_start();
            if before_ok && after.starts_with('=') {
                if key_hits == nth {
                    return Some(i + 1);
                }
                key_hits += 1;
            }
            rest = &rest[pos + key.len()..];
        }
    }
    header_line
}

struct Checker<'a> {
    src: &'a str,
}

impl Checker<'_> {
    fn err(&self, section: &str, key: &str, nth: usize, msg: impl std::fmt::Display) -> Error {
        Error::config(locate(self.src, section, key, nth), format!("[{section}] {key}: {msg}"))
    }

    fn positive(&self, section: &str, key: &str, v: f64) -> Result<()> {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(self.err(section, key, 0, format!("must be > 0, got {v}")))
        }
    }

    fn non_negative(&self, section: &str, key: &str, v: f64) -> Result<()> {
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(self.err(section, key, 0, format!("must be >= 0, got {v}")))
        }
    }

    fn finite(&self, section: &str, key: &str, v: f64) -> Result<()> {
        if v.is_finite() {
            Ok(())
        } else {
            Err(self.err(section, key, 0, format!("must be finite, got {v}")))
        }
    }

    fn at_least(&self, section: &str, key: &str, v: usize, min: usize) -> Result<()> {
        if v >= min {
            Ok(())
        } else {
            Err(self.err(section, key, 0, format!("must be >= {min}, got {v}")))
        }
    }

    fn ordered(&self, section: &str, lo_key: &str, lo: f64, hi: f64) -> Result<()> {
        if lo < hi {
            Ok(())
        } else {
            Err(self.err(section, lo_key, 0, format!("must be below the upper bound ({lo} >= {hi})")))
        }
    }

    /// Re-labels an error from a domain constructor with the section's position.
    fn wrap<T>(&self, section: &str, key: &str, r: Result<T>) -> Result<T> {
        r.map_err(|e| match e {
            Error::Domain(m) => self.err(section, key, 0, m),
            Error::Config { line: None, msg } => self.err(section, key, 0, msg),
            other => other,
        })
    }
}

impl Config {
    /// The shipped calibrated device description.
    pub fn reference() -> Self {
        Self::parse(REFERENCE_TOML).expect("shipped config is valid")
    }

    pub fn reference_toml() -> &'static str {
        REFERENCE_TOML
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::config(None, format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&src)
    }

    /// Parses and validates; errors carry the 1-based line of the offending key.
    pub fn parse(src: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1);
            Error::config(line, e.message().trim().to_string())
        })?;
        cfg.validate(src)?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self, src: &str) -> Result<()> {
        let c = Checker { src };
        let m = &self.material;
        c.positive("material", "saw_velocity_m_per_s", m.saw_velocity_m_per_s)?;
        if !(m.k2_bulk > 0.0 && m.k2_bulk < 1.0) {
            return Err(c.err("material", "k2_bulk", 0, format!("must lie in (0, 1), got {}", m.k2_bulk)));
        }
        c.positive("material", "sigma_m_S_per_m", m.sigma_m)?;

        let l = &self.layer;
        c.non_negative("layer", "depth_nm", l.depth_nm)?;
        c.positive("layer", "thickness_nm", l.thickness_nm)?;
        c.non_negative("layer", "sigma_xx_S_per_m", l.sigma_xx)?;
        if let Some(a) = l.alpha2 {
            if !(a > 0.0 && a < 1.0) {
                return Err(c.err("layer", "alpha2", 0, format!("must lie in (0, 1), got {a}")));
            }
        }

        if self.k2_calibration.anchors.is_empty() {
            return Err(c.err("k2_calibration", "anchors", 0, "anchor list is empty"));
        }
        for (i, a) in self.k2_calibration.anchors.iter().enumerate() {
            if !(a.depth_nm > 0.0 && a.depth_nm.is_finite()) {
                return Err(c.err("k2_calibration", "depth_nm", i, format!("anchor {i}: depth must be > 0, got {}", a.depth_nm)));
            }
        }
        c.wrap("k2_calibration", "anchors", self.k2_calibration())?;

        let p = &self.cpw;
        c.positive("cpw", "z_ref_ohm", p.z_ref_ohm)?;
        c.positive("cpw", "z_line_doped_ohm", p.z_line_doped_ohm)?;

        let r = &self.resonator;
        c.positive("resonator", "f0_hz", r.f0_hz)?;
        c.positive("resonator", "kappa_int_hz", r.kappa_int_hz)?;
        c.non_negative("resonator", "kappa_ext_hz", r.kappa_ext_hz)?;
        c.finite("resonator", "crosstalk_re", r.crosstalk_re)?;
        c.finite("resonator", "crosstalk_im", r.crosstalk_im)?;
        c.positive("resonator", "span_hz", r.span_hz)?;
        c.at_least("resonator", "n_points", r.n_points, 8)?;

        let d = &self.delay_line;
        c.positive("delay_line", "center_frequency_hz", d.center_frequency_hz)?;
        c.at_least("delay_line", "n_pairs", d.n_pairs as usize, 1)?;
        if !(d.peak_conversion > 0.0 && d.peak_conversion <= 1.0) {
            return Err(c.err("delay_line", "peak_conversion", 0, format!("must lie in (0, 1], got {}", d.peak_conversion)));
        }
        c.non_negative("delay_line", "base_loss_per_m", d.base_loss_per_m)?;
        c.non_negative("delay_line", "crosstalk_reference", d.crosstalk_reference)?;
        c.non_negative("delay_line", "crosstalk_doped", d.crosstalk_doped)?;
        for &g in &d.gaps_um {
            c.positive("delay_line", "gaps_um", g)?;
        }
        c.positive("delay_line", "span_hz", d.span_hz)?;
        c.at_least("delay_line", "n_points", d.n_points, 2)?;

        let e = &self.emitter;
        c.finite("emitter", "base_frequency_hz", e.base_frequency_hz)?;
        c.positive("emitter", "linewidth_hz", e.linewidth_hz)?;
        c.finite("emitter", "stark_slope_hz_per_v", e.stark_slope_hz_per_v)?;
        c.non_negative("emitter", "brightness", e.brightness)?;
        for (i, pl) in e.plateaus.iter().enumerate() {
            if !(pl.v_min < pl.v_max) || !pl.v_min.is_finite() || !pl.v_max.is_finite() {
                return Err(c.err("emitter.plateaus", "v_min", i, format!("plateau {i}: need v_min < v_max")));
            }
            if i > 0 && pl.v_min < e.plateaus[i - 1].v_max {
                return Err(c.err(
                    "emitter.plateaus",
                    "v_min",
                    i,
                    format!("plateau {i} overlaps or precedes plateau {}", i - 1),
                ));
            }
        }
        c.wrap("emitter", "plateaus", self.emitter())?;

        let a = &self.acoustic_mode;
        c.positive("acoustic_mode", "f0_hz", a.f0_hz)?;
        c.positive("acoustic_mode", "kappa_int_hz", a.kappa_int_hz)?;
        c.non_negative("acoustic_mode", "kappa_ext_hz", a.kappa_ext_hz)?;
        c.non_negative("acoustic_mode", "delta_max", a.delta_max)?;
        c.positive("acoustic_mode", "drive_frequency_hz", a.drive_frequency_hz)?;
        c.finite("acoustic_mode", "bias_v", a.bias_v)?;

        let f = &self.filter;
        c.positive("filter", "fwhm_hz", f.fwhm_hz)?;
        c.ordered("filter", "scan_min_hz", f.scan_min_hz, f.scan_max_hz)?;
        c.at_least("filter", "n_points", f.n_points, 2)?;

        let s = &self.sweeps;
        c.positive("sweeps", "sigma_min_S_per_m", s.sigma_min)?;
        c.ordered("sweeps", "sigma_min_S_per_m", s.sigma_min, s.sigma_max)?;
        c.at_least("sweeps", "sigma_points", s.sigma_points, 2)?;
        c.positive("sweeps", "loss_frequency_hz", s.loss_frequency_hz)?;
        c.non_negative("sweeps", "depth_min_nm", s.depth_min_nm)?;
        c.ordered("sweeps", "depth_min_nm", s.depth_min_nm, s.depth_max_nm)?;
        c.at_least("sweeps", "depth_points", s.depth_points, 2)?;
        c.ordered("sweeps", "bias_min_v", s.bias_min_v, s.bias_max_v)?;
        c.at_least("sweeps", "bias_points", s.bias_points, 2)?;
        c.positive("sweeps", "drive_span_hz", s.drive_span_hz)?;
        c.at_least("sweeps", "drive_points", s.drive_points, 5)?;

        let n = &self.noise;
        if n.snr_db.is_nan() || n.snr_db == f64::NEG_INFINITY {
            return Err(c.err("noise", "snr_db", 0, format!("must be a number or inf, got {}", n.snr_db)));
        }
        c.at_least("noise", "monte_carlo_trials", n.monte_carlo_trials, 1)?;

        c.wrap("layer", "depth_nm", self.relaxation())?;
        Ok(())
    }

    pub fn material(&self) -> Result<MaterialParams> {
        let m = &self.material;
        MaterialParams::new(m.saw_velocity_m_per_s, m.k2_bulk, m.sigma_m)
    }

    pub fn layer_stack(&self) -> Result<LayerStack> {
        let l = &self.layer;
        LayerStack::new(l.depth_nm * 1e-9, l.thickness_nm * 1e-9, l.sigma_xx)
    }

    pub fn k2_calibration(&self) -> Result<K2Calibration> {
        let anchors = self
            .k2_calibration
            .anchors
            .iter()
            .map(|a| K2Anchor {
                depth: a.depth_nm * 1e-9,
                k2: a.k2,
            })
            .collect();
        K2Calibration::new(anchors, self.material.k2_bulk)
    }

    /// Relaxation coefficients of the configured layer.
    pub fn relaxation(&self) -> Result<RelaxationCoeffs> {
        match self.layer.alpha2 {
            Some(a) => RelaxationCoeffs::new(a, self.material.sigma_m),
            None => RelaxationCoeffs::for_stack(&self.layer_stack()?, &self.material()?, &self.k2_calibration()?),
        }
    }

    /// Layer loss rate (Hz) at frequency `f`.
    pub fn layer_loss_rate(&self, f: f64) -> Result<f64> {
        attenuation_rate_hz(self.layer.sigma_xx, &self.relaxation()?, f)
    }

    pub fn resonator(&self) -> Result<ResonatorParams> {
        let r = &self.resonator;
        ResonatorParams::new(r.f0_hz, r.kappa_int_hz, r.kappa_ext_hz, Complex64::new(r.crosstalk_re, r.crosstalk_im))
    }

    /// Delay-line transducer. On the doped substrate the coupling drops to k² at the
    /// layer depth and any CPW mismatch removes power before the transducer.
    pub fn delay_line_idt(&self) -> Result<IdtSpec> {
        let d = &self.delay_line;
        let bulk = IdtSpec::new(d.center_frequency_hz, d.n_pairs, d.peak_conversion, self.material.k2_bulk)?;
        if !d.doped_layer {
            return Ok(bulk);
        }
        let k2 = k2_effective(self.layer.depth_nm * 1e-9, &self.k2_calibration()?)?;
        let idt = bulk.with_coupling(k2)?;
        if self.cpw.doped_layer_under_cpw {
            let g2 = cpw_mismatch_reflected_fraction(self.cpw.z_line_doped_ohm, self.cpw.z_ref_ohm)?;
            return IdtSpec::new(idt.center_frequency, idt.n_pairs, idt.peak_conversion * (1.0 - g2).sqrt(), idt.k2);
        }
        Ok(idt)
    }

    /// Amplitude loss per length (1/m): base loss plus the layer term when present.
    pub fn delay_line_loss_per_length(&self) -> Result<f64> {
        let d = &self.delay_line;
        let mut terms = vec![d.base_loss_per_m];
        if d.doped_layer {
            let rate = self.layer_loss_rate(d.center_frequency_hz)?;
            terms.push(rate_to_loss_per_length(rate, self.material.saw_velocity_m_per_s)?);
        }
        total_propagation_loss(&terms)
    }

    pub fn delay_line_crosstalk(&self) -> f64 {
        let d = &self.delay_line;
        if d.doped_layer {
            d.crosstalk_doped
        } else {
            d.crosstalk_reference
        }
    }

    pub fn emitter(&self) -> Result<EmitterState> {
        let e = &self.emitter;
        let plateaus = e
            .plateaus
            .iter()
            .map(|p| Plateau {
                v_min: p.v_min,
                v_max: p.v_max,
                frequency_offset: p.frequency_offset_hz,
            })
            .collect();
        EmitterState::new(e.base_frequency_hz, e.linewidth_hz, e.stark_slope_hz_per_v, plateaus, e.brightness)
    }

    pub fn acoustic_mode(&self) -> Result<ResonatorParams> {
        let a = &self.acoustic_mode;
        ResonatorParams::new(a.f0_hz, a.kappa_int_hz, a.kappa_ext_hz, Complex64::new(0.0, 0.0))
    }

    pub fn drive(&self) -> Result<ModulationDrive> {
        let a = &self.acoustic_mode;
        ModulationDrive::new(a.drive_frequency_hz, self.acoustic_mode()?, a.delta_max)
    }

    pub fn filter(&self) -> Result<FilterSpec> {
        let f = &self.filter;
        FilterSpec::new(f.fwhm_hz, (f.scan_min_hz, f.scan_max_hz), f.n_points)
    }
}
