//! Stark-slope recovery from PL bias maps.

use super::regression::fit_line;
use super::{edge_mean, FitResult};
use crate::error::{Error, Result};
use crate::qd::BiasMap;
use serde::{Deserialize, Serialize};

/// Rows whose maximum is below this fraction of the map maximum count as dark.
const BRIGHT_FRACTION: f64 = 0.3;

/// Carrier position of one spectrum: start at the maximum, then iterate the
/// baseline-subtracted centroid over a window of `half_width` around the estimate.
pub fn track_carrier(x: &[f64], y: &[f64], half_width: f64) -> Option<f64> {
    if x.len() != y.len() || x.len() < 3 || !(half_width > 0.0) {
        return None;
    }
    let base = edge_mean(y, 0.05);
    let (imax, _) = y
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    let mut c = x[imax];
    let step = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    for _ in 0..50 {
        let lo = x.partition_point(|&v| v < c - half_width);
        let hi = x.partition_point(|&v| v <= c + half_width);
        let (mut sw, mut swx) = (0.0, 0.0);
        for i in lo..hi {
            let w = (y[i] - base).max(0.0);
            sw += w;
            swx += w * x[i];
        }
        if !(sw > 0.0) {
            return None;
        }
        let next = swx / sw;
        let moved = (next - c).abs();
        c = next;
        if moved < 1e-6 * step {
            break;
        }
    }
    Some(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscontinuityKind {
    /// Emission appears going up in bias.
    Onset,
    /// Emission disappears going up in bias.
    Offset,
    /// Line jumps off the Stark trend between two bright rows.
    Jump,
}

/// A discontinuity located between two adjacent bias rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discontinuity {
    pub bias_lo: f64,
    pub bias_hi: f64,
    pub kind: DiscontinuityKind,
    /// Size of the jump off the trend (Hz); zero for onset/offset.
    pub step: f64,
}

impl Discontinuity {
    pub fn contains(&self, bias: f64) -> bool {
        self.bias_lo <= bias && bias <= self.bias_hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauSlope {
    pub plateau: usize,
    pub n_rows: usize,
    /// `slope_hz_per_v`, `intercept_hz` (line value at zero bias).
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarkFit {
    pub plateaus: Vec<PlateauSlope>,
    /// Notices for plateaus that could not be fitted.
    pub skipped: Vec<String>,
    /// Tracked carrier detuning per row; `None` for dark rows.
    pub tracked: Vec<Option<f64>>,
    pub discontinuities: Vec<Discontinuity>,
}

impl StarkFit {
    pub fn slope(&self, plateau: usize) -> Option<&FitResult> {
        self.plateaus.iter().find(|p| p.plateau == plateau).map(|p| &p.fit)
    }

    /// Flattened result with `slope_hz_per_v_p{k}` per fitted plateau.
    pub fn to_fit_result(&self) -> FitResult {
        let mut r = FitResult::new("stark_slope");
        let mut rn = 0.0f64;
        for p in &self.plateaus {
            let k = p.plateau;
            r.set(&format!("slope_hz_per_v_p{k}"), p.fit.get("slope_hz_per_v"), p.fit.sigma_of("slope_hz_per_v"));
            r.set(&format!("intercept_hz_p{k}"), p.fit.get("intercept_hz"), p.fit.sigma_of("intercept_hz"));
            rn = rn.hypot(p.fit.residual_norm);
        }
        r.residual_norm = rn;
        r.flags.extend(self.skipped.iter().map(|s| format!("skipped: {s}")));
        r
    }
}

/// Per-plateau Stark slope: track the carrier of each bright row, then regress
/// carrier detuning against bias separately within each plateau.
pub fn fit_stark_slope(map: &BiasMap) -> Result<StarkFit> {
    let n = map.bias.len();
    if map.counts.len() != n || map.plateau_of_row.len() != n {
        return Err(Error::LengthMismatch {
            what: "bias map rows",
            got: map.counts.len().min(map.plateau_of_row.len()),
            expected: n,
        });
    }
    let global = map
        .counts
        .iter()
        .flat_map(|r| r.iter())
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !(global > 0.0) {
        return Err(Error::InsufficientData("bias map has no bright rows".into()));
    }
    let half_width = 0.5 * map.filter_fwhm;
    let tracked: Vec<Option<f64>> = map
        .counts
        .iter()
        .map(|row| {
            let peak = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            if peak < BRIGHT_FRACTION * global {
                None
            } else {
                track_carrier(&map.detuning, row, half_width)
            }
        })
        .collect();

    let mut plateaus = Vec::new();
    let mut skipped = Vec::new();
    let mut labels: Vec<usize> = map.plateau_of_row.iter().flatten().copied().collect();
    labels.sort_unstable();
    labels.dedup();
    for k in labels {
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..n)
            .filter(|&i| map.plateau_of_row[i] == Some(k))
            .filter_map(|i| tracked[i].map(|c| (map.bias[i], c)))
            .unzip();
        if xs.len() < 3 {
            skipped.push(format!("plateau {k}: {} usable rows, need 3", xs.len()));
            continue;
        }
        match fit_line(&xs, &ys, None) {
            Ok((slope, intercept, ss, si, rn)) => {
                let mut fit = FitResult::new("stark_line");
                fit.set("slope_hz_per_v", slope, ss);
                fit.set("intercept_hz", intercept, si);
                fit.residual_norm = rn;
                plateaus.push(PlateauSlope {
                    plateau: k,
                    n_rows: xs.len(),
                    fit,
                });
            }
            Err(e) => skipped.push(format!("plateau {k}: {e}")),
        }
    }
    if plateaus.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no plateau has 3 usable rows ({})",
            skipped.join("; ")
        )));
    }
    let discontinuities = find_discontinuities(map, &tracked, &plateaus);
    Ok(StarkFit {
        plateaus,
        skipped,
        tracked,
        discontinuities,
    })
}

/// Walks adjacent rows and reports dark/bright transitions and jumps off the
/// Stark trend. Uses only the tracked carriers, not the plateau labels.
fn find_discontinuities(map: &BiasMap, tracked: &[Option<f64>], fits: &[PlateauSlope]) -> Vec<Discontinuity> {
    let mut slopes: Vec<f64> = fits.iter().map(|p| p.fit.get("slope_hz_per_v")).collect();
    slopes.sort_by(f64::total_cmp);
    let slope = slopes[slopes.len() / 2];
    // Scatter of tracked points about their fitted lines sets the jump threshold.
    let (mut ss, mut dof) = (0.0, 0usize);
    for p in fits {
        ss += p.fit.residual_norm.powi(2);
        dof += p.n_rows.saturating_sub(2);
    }
    let scatter = if dof > 0 { (ss / dof as f64).sqrt() } else { 0.0 };
    let threshold = (8.0 * scatter).max(0.1 * map.filter_fwhm);

    let mut out = Vec::new();
    for i in 1..tracked.len() {
        let (b0, b1) = (map.bias[i - 1], map.bias[i]);
        let kind = match (tracked[i - 1], tracked[i]) {
            (None, Some(_)) => Some((DiscontinuityKind::Onset, 0.0)),
            (Some(_), None) => Some((DiscontinuityKind::Offset, 0.0)),
            (Some(c0), Some(c1)) => {
                let off = (c1 - c0) - slope * (b1 - b0);
                (off.abs() > threshold).then_some((DiscontinuityKind::Jump, off))
            }
            (None, None) => None,
        };
        if let Some((kind, step)) = kind {
            out.push(Discontinuity {
                bias_lo: b0.min(b1),
                bias_hi: b0.max(b1),
                kind,
                step,
            });
        }
    }
    out
}
