use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::bessel::{bessel_j_all, MAX_ARG, MAX_ORDER};
use super::emitter::{emission_frequency, modulation_index, Emission, EmitterState, ModulationDrive, Plateau};
use crate::error::{Error, Result};
use crate::trace::{linspace, Trace, TraceMeta};

/// Largest tolerated sideband weight left outside the retained orders.
pub const SIDEBAND_RESIDUAL_TOL: f64 = 1e-6;

/// Unit-area Lorentzian with full width `fwhm`, evaluated at offset `u`.
pub fn lorentzian_density(u: f64, fwhm: f64) -> f64 {
    let g = 0.5 * fwhm;
    g / (PI * (u * u + g * g))
}

/// Phase-modulated emission line: Lorentzians at `center + n·omega_m` weighted by `J_n(δ)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidebandComb {
    pub center: f64,
    pub linewidth: f64,
    pub delta: f64,
    pub omega_m: f64,
    /// Orders kept, `-n_max..=n_max`.
    pub n_max: u32,
    /// Orders asked for; smaller than `n_max` when the comb was widened.
    pub requested_n_max: u32,
    /// `J_n(δ)²` for `n = 0..=n_max`.
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Builds the sideband comb, widening `n_max` until less than 1e-6 of the weight
/// is discarded.
pub fn sideband_spectrum(center: f64, linewidth: f64, delta: f64, omega_m: f64, n_max: u32) -> Result<SidebandComb> {
    if n_max < 1 {
        return Err(Error::domain("n_max must be >= 1"));
    }
    if !(delta >= 0.0 && delta <= MAX_ARG) {
        return Err(Error::domain(format!("delta must lie in [0, {MAX_ARG}], got {delta}")));
    }
    if !(linewidth > 0.0 && linewidth.is_finite()) {
        return Err(Error::domain(format!("linewidth must be > 0, got {linewidth}")));
    }
    if !omega_m.is_finite() || !center.is_finite() {
        return Err(Error::domain("center and omega_m must be finite"));
    }
    let requested = n_max.min(MAX_ORDER);
    let j = bessel_j_all(MAX_ORDER, delta)?;
    let sq: Vec<f64> = j.iter().map(|v| v * v).collect();
    let mut kept = sq[0];
    let mut used = 0u32;
    for n in 1..=MAX_ORDER {
        kept += 2.0 * sq[n as usize];
        used = n;
        if n >= requested && 1.0 - kept < SIDEBAND_RESIDUAL_TOL {
            break;
        }
    }
    let mut warnings = Vec::new();
    if 1.0 - kept >= SIDEBAND_RESIDUAL_TOL {
        warnings.push(format!("sideband residual {:.3e} at maximum order {MAX_ORDER}", 1.0 - kept));
    }
    if used > requested {
        warnings.push(format!("n_max widened from {requested} to {used}"));
    }
    Ok(SidebandComb {
        center,
        linewidth,
        delta,
        omega_m,
        n_max: used,
        requested_n_max: n_max,
        weights: sq[..=used as usize].to_vec(),
        warnings,
    })
}

impl SidebandComb {
    /// Weight of order `n` (same for `±n`).
    pub fn weight(&self, n: i32) -> f64 {
        self.weights.get(n.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    /// `Σ J_n(δ)²` over the retained orders.
    pub fn total_weight(&self) -> f64 {
        self.weights[0] + 2.0 * self.weights[1..].iter().sum::<f64>()
    }

    pub fn was_widened(&self) -> bool {
        self.n_max > self.requested_n_max
    }

    /// `(order, position, weight)` for every retained line.
    pub fn lines(&self) -> impl Iterator<Item = (i32, f64, f64)> + '_ {
        let n = self.n_max as i32;
        (-n..=n).map(move |k| (k, self.center + k as f64 * self.omega_m, self.weight(k)))
    }

    /// Spectral density (integrates to `total_weight`).
    pub fn density(&self, x: f64) -> f64 {
        self.lines()
            .map(|(_, pos, w)| w * lorentzian_density(x - pos, self.linewidth))
            .sum()
    }

    /// The comb seen through a Lorentzian filter of width `filter_fwhm`.
    /// Lorentzian widths add under convolution; areas are unchanged.
    pub fn filtered(&self, filter_fwhm: f64) -> Self {
        Self {
            linewidth: self.linewidth + filter_fwhm,
            ..self.clone()
        }
    }

    pub fn to_trace(&self, x: Vec<f64>, scale: f64) -> Result<Trace> {
        let meta = TraceMeta::new("detuning", "Hz", "intensity", "counts/Hz").with_provenance(format!(
            "sideband comb: delta={}, omega_m={}, linewidth={}, n_max={}",
            self.delta, self.omega_m, self.linewidth, self.n_max
        ));
        let mut t = Trace::from_fn(x, meta, |v| scale * self.density(v))?;
        t.meta_mut().warnings.extend(self.warnings.iter().cloned());
        Ok(t)
    }
}

/// Scanning Fabry-Perot filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub fwhm: f64,
    /// Detuning range covered by the scan (Hz).
    pub scan_range: (f64, f64),
    pub n_points: usize,
}

impl FilterSpec {
    pub fn new(fwhm: f64, scan_range: (f64, f64), n_points: usize) -> Result<Self> {
        if !(fwhm > 0.0 && fwhm.is_finite()) {
            return Err(Error::domain(format!("filter fwhm must be > 0, got {fwhm}")));
        }
        if !(scan_range.0 < scan_range.1) || !scan_range.0.is_finite() || !scan_range.1.is_finite() {
            return Err(Error::domain("scan range must satisfy lo < hi"));
        }
        if n_points < 2 {
            return Err(Error::domain("filter scan needs at least 2 points"));
        }
        Ok(Self {
            fwhm,
            scan_range,
            n_points,
        })
    }

    pub fn grid(&self) -> Vec<f64> {
        linspace(self.scan_range.0, self.scan_range.1, self.n_points)
    }
}

/// Convolves a sampled spectrum with a unit-area Lorentzian filter and samples the
/// result on the filter's scan grid.
///
/// The input is treated as piecewise linear between samples and zero outside them,
/// and each segment is convolved in closed form. The result is exact for that
/// interpretation, conserves the trapezoidal area of the input over the whole line,
/// and reduces to linear interpolation of the input as the filter width goes to zero.
pub fn filtered_spectrum(ideal: &Trace, filt: &FilterSpec) -> Result<Trace> {
    let xs = ideal.x();
    let ys = ideal.y();
    if xs.len() < 2 {
        return Err(Error::InsufficientData("filtering needs at least 2 input samples".into()));
    }
    let g = 0.5 * filt.fwhm;
    let grid = filt.grid();
    let out: Vec<f64> = grid
        .par_iter()
        .map(|&x| {
            let mut acc = 0.0;
            let mut a_prev = ((x - xs[0]) / g).atan();
            let mut l_prev = ((x - xs[0]).powi(2) + g * g).ln();
            for j in 0..xs.len() - 1 {
                let u_next = x - xs[j + 1];
                let a_next = (u_next / g).atan();
                let l_next = (u_next * u_next + g * g).ln();
                let slope = (ys[j + 1] - ys[j]) / (xs[j + 1] - xs[j]);
                let c = ys[j] + slope * (x - xs[j]);
                // u runs from x - x_{j+1} to x - x_j
                acc += c / PI * (a_prev - a_next) - slope * g / (2.0 * PI) * (l_prev - l_next);
                a_prev = a_next;
                l_prev = l_next;
            }
            acc
        })
        .collect();

    let mut meta = ideal.meta().clone();
    meta.provenance = format!("{} | lorentzian filter fwhm={}", meta.provenance, filt.fwhm);
    let pad = 5.0 * filt.fwhm;
    if xs[0] > filt.scan_range.0 - pad || xs[xs.len() - 1] < filt.scan_range.1 + pad {
        meta.warnings.push(format!(
            "insufficient padding: input spans [{}, {}], needs [{}, {}]",
            xs[0],
            xs[xs.len() - 1],
            filt.scan_range.0 - pad,
            filt.scan_range.1 + pad
        ));
    }
    Trace::new(grid, out, meta)
}

/// Photoluminescence versus gate bias and detected detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasMap {
    pub bias: Vec<f64>,
    /// Detected detuning grid (Hz), shared by every row.
    pub detuning: Vec<f64>,
    /// `counts[row][col]`, one row per bias value.
    pub counts: Vec<Vec<f64>>,
    /// Plateau index of each row, `None` for dark rows.
    pub plateau_of_row: Vec<Option<usize>>,
    pub plateaus: Vec<Plateau>,
    pub stark_slope: f64,
    pub filter_fwhm: f64,
}

impl BiasMap {
    pub fn row_trace(&self, row: usize) -> Result<Trace> {
        let meta = TraceMeta::new("detuning", "Hz", "counts", "a.u.")
            .with_provenance(format!("bias map row {row}, bias {} V", self.bias[row]));
        Trace::new(self.detuning.clone(), self.counts[row].clone(), meta)
    }
}

/// PL map: every bright row is the filtered sideband comb centred on the Stark-shifted
/// emission line; dark rows are zero.
pub fn pl_bias_map(
    bias_grid: &[f64],
    e: &EmitterState,
    drive: Option<&ModulationDrive>,
    filt: &FilterSpec,
) -> Result<BiasMap> {
    let grid = filt.grid();
    let (delta, omega_m) = match drive {
        Some(d) => (modulation_index(d), d.drive_frequency),
        None => (0.0, 1.0),
    };
    let rows: Vec<(Option<usize>, Vec<f64>)> = bias_grid
        .par_iter()
        .map(|&bias| match emission_frequency(bias, e) {
            Emission::Dark => Ok((None, vec![0.0; grid.len()])),
            Emission::Bright { plateau, detuning, .. } => {
                let comb = sideband_spectrum(detuning, e.linewidth_fwhm, delta, omega_m, 1)?.filtered(filt.fwhm);
                Ok((Some(plateau), grid.iter().map(|&x| e.brightness * comb.density(x)).collect()))
            }
        })
        .collect::<Result<_>>()?;
    let (plateau_of_row, counts) = rows.into_iter().unzip();
    Ok(BiasMap {
        bias: bias_grid.to_vec(),
        detuning: grid,
        counts,
        plateau_of_row,
        plateaus: e.plateaus.clone(),
        stark_slope: e.stark_slope,
        filter_fwhm: filt.fwhm,
    })
}
