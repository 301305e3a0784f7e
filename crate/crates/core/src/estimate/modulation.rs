//! Modulation-index extraction from phase-modulated emission spectra.

use super::lm::{minimize, LmOptions};
use super::{sigmas_from, FitResult};
use crate::error::{Error, Result};
use crate::qd::{bessel_j_all, lorentzian_density, FilterSpec, BESSEL_MAX_ARG, BESSEL_MAX_ORDER};
use crate::trace::Trace;

/// Filtered sideband comb: `Σ w_n L(x − center − n·ω_m)` with `w_n = J_n(δ)²` for
/// `n >= 0` (mirrored to negative orders) and unit-area Lorentzians of width `width`
/// (emitter linewidth plus filter width).
pub fn filtered_comb_model(x: f64, center: f64, omega_m: f64, width: f64, weights: &[f64]) -> f64 {
    let mut acc = weights[0] * lorentzian_density(x - center, width);
    for (n, w) in weights.iter().enumerate().skip(1) {
        let off = n as f64 * omega_m;
        acc += w * (lorentzian_density(x - center - off, width) + lorentzian_density(x - center + off, width));
    }
    acc
}

fn comb_weights(delta: f64) -> Vec<f64> {
    let d = delta.abs().min(BESSEL_MAX_ARG);
    let n = ((d.ceil() as u32) + 20).min(BESSEL_MAX_ORDER);
    bessel_j_all(n, d)
        .expect("argument clamped to the valid range")
        .into_iter()
        .map(|j| j * j)
        .collect()
}

/// Fits `offset + amplitude·comb(x; δ, center)` and returns `delta` (≥ 0),
/// `center`, `amplitude`, `offset`.
///
/// `linewidth` is the emitter FWHM; the filter adds its own FWHM to every line.
pub fn extract_modulation_index(spectrum: &Trace, omega_m: f64, filt: &FilterSpec, linewidth: f64) -> Result<FitResult> {
    if !(omega_m > 0.5 * filt.fwhm) {
        return Err(Error::InsufficientSidebandResolution);
    }
    if !(linewidth > 0.0) {
        return Err(Error::domain(format!("linewidth must be > 0, got {linewidth}")));
    }
    let x = spectrum.x();
    let y = spectrum.y();
    if x.len() < 8 {
        return Err(Error::InsufficientData("spectrum needs at least 8 samples".into()));
    }
    let width = linewidth + filt.fwhm;
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return Err(Error::NoPeak);
    }
    let ys = hi - lo;
    let xm = 0.5 * (x[0] + x[x.len() - 1]);
    let u: Vec<f64> = x.iter().map(|v| (v - xm) / width).collect();
    let v: Vec<f64> = y.iter().map(|w| (w - lo) / ys).collect();
    let om = omega_m / width;

    // Centroid of the baseline-subtracted spectrum; the comb is symmetric.
    let (sw, swx) = u
        .iter()
        .zip(&v)
        .fold((0.0, 0.0), |(a, b), (ui, vi)| (a + vi, b + vi * ui));
    let c0 = if sw > 0.0 { swx / sw } else { 0.0 };

    // Coarse δ scan with linear amplitude/offset at each candidate.
    let mut best = (f64::INFINITY, 0.0, 1.0, 0.0);
    for k in 0..=40 {
        let d = 0.1 * k as f64;
        let w = comb_weights(d);
        let shape: Vec<f64> = u.iter().map(|&ui| filtered_comb_model(ui, c0, om, 1.0, &w)).collect();
        if let Some((a, o, ssr)) = linear_fit(&shape, &v) {
            if ssr < best.0 && a > 0.0 {
                best = (ssr, d, a, o);
            }
        }
    }
    let p0 = [best.1.max(0.05), c0, best.2, best.3];

    let out = minimize(
        |p, r| {
            let w = comb_weights(p[0]);
            for i in 0..u.len() {
                r[i] = p[3] + p[2] * filtered_comb_model(u[i], p[1], om, 1.0, &w) - v[i];
            }
        },
        u.len(),
        &p0,
        &LmOptions::default(),
    );
    let p = &out.params;
    let s = sigmas_from(out.covariance.as_ref(), 4);
    let mut res = FitResult::new("phase_modulated_comb");
    res.set("delta", p[0].abs(), s[0]);
    res.set("center", xm + p[1] * width, s[1] * width);
    // amplitude is the integrated intensity of the comb in trace units
    res.set("amplitude", p[2] * ys * width, s[2] * ys * width);
    res.set("offset", lo + p[3] * ys, s[3] * ys);
    res.residual_norm = out.cost.sqrt() * ys;
    res.n_iter = out.n_iter;
    res.free_params = ["delta", "center", "amplitude", "offset"].map(String::from).to_vec();
    let scales = [p[0].signum(), width, ys * width, ys];
    res.covariance = out.covariance.as_ref().map(|c| {
        (0..4)
            .map(|i| (0..4).map(|j| c[(i, j)] * scales[i] * scales[j]).collect())
            .collect()
    });
    res.mark_convergence(out.converged && p[0].abs() <= BESSEL_MAX_ARG);
    Ok(res)
}

// least squares y ≈ a·s + o; returns (a, o, ssr)
fn linear_fit(s: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = s.len() as f64;
    let (ss, sy, sss, ssy) = s.iter().zip(y).fold((0.0, 0.0, 0.0, 0.0), |acc, (a, b)| {
        (acc.0 + a, acc.1 + b, acc.2 + a * a, acc.3 + a * b)
    });
    let det = n * sss - ss * ss;
    if det.abs() < 1e-300 {
        return None;
    }
    let a = (n * ssy - ss * sy) / det;
    let o = (sy - a * ss) / n;
    let ssr = s.iter().zip(y).map(|(p, q)| (a * p + o - q).powi(2)).sum();
    Some((a, o, ssr))
}
