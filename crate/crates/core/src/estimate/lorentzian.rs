use super::lm::{minimize, LmOptions};
use super::{edge_mean, sigmas_from, FitResult};
use crate::error::{Error, Result};
use crate::trace::Trace;

/// `offset + amplitude / (1 + (2(x − center)/fwhm)²)`
pub fn lorentzian(x: f64, center: f64, fwhm: f64, amplitude: f64, offset: f64) -> f64 {
    let u = 2.0 * (x - center) / fwhm;
    offset + amplitude / (1.0 + u * u)
}

/// Starting point for [`fit_lorentzian`], in the trace's own units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianGuess {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    pub offset: f64,
}

/// Peak pick plus half-maximum crossings. Baseline is the mean of the outer 5 %
/// of samples on each side; the extremum furthest from it sets the peak sign.
pub(crate) fn auto_guess(x: &[f64], y: &[f64]) -> Result<LorentzianGuess> {
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if !(range > 1e-12 * hi.abs().max(lo.abs())) || !range.is_finite() || range == 0.0 {
        return Err(Error::NoPeak);
    }
    let base = edge_mean(y, 0.05);
    let up = hi - base >= base - lo;
    let (idx, amp) = if up {
        let i = argmax(y);
        (i, y[i] - base)
    } else {
        let i = argmin(y);
        (i, y[i] - base)
    };
    if amp.abs() < 1e-3 * range {
        return Err(Error::NoPeak);
    }
    let half = base + 0.5 * amp;
    let above = |v: f64| if up { v > half } else { v < half };
    let cross = |i: usize, j: usize| -> f64 {
        let t = (half - y[i]) / (y[j] - y[i]);
        x[i] + t * (x[j] - x[i])
    };
    let left = (1..=idx).rev().find(|&i| !above(y[i - 1])).map(|i| cross(i - 1, i));
    let right = (idx..y.len() - 1).find(|&i| !above(y[i + 1])).map(|i| cross(i, i + 1));
    let span = x[x.len() - 1] - x[0];
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (x[idx] - l),
        (None, Some(r)) => 2.0 * (r - x[idx]),
        (None, None) => 0.25 * span,
    };
    let min_step = x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    Ok(LorentzianGuess {
        center: x[idx],
        fwhm: fwhm.max(min_step),
        amplitude: amp,
        offset: base,
    })
}

pub(crate) fn argmax(y: &[f64]) -> usize {
    y.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

pub(crate) fn argmin(y: &[f64]) -> usize {
    y.iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) })
        .0
}

/// Least-squares Lorentzian fit returning `center`, `fwhm`, `amplitude`, `offset`.
///
/// The fit runs on internally rescaled axes (x to the unit interval, y to unit
/// range), so results do not depend on the absolute frequency scale.
pub fn fit_lorentzian(t: &Trace, init: Option<LorentzianGuess>) -> Result<FitResult> {
    let x = t.x();
    let y = t.y();
    if x.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "Lorentzian fit needs at least 8 samples, got {}",
            x.len()
        )));
    }
    let guess = match init {
        Some(g) => g,
        None => auto_guess(x, y)?,
    };
    let span = x[x.len() - 1] - x[0];
    if span < 2.0 * guess.fwhm.abs() {
        return Err(Error::InsufficientData(format!(
            "trace spans {span}, less than two estimated FWHM ({})",
            guess.fwhm
        )));
    }

    let xm = 0.5 * (x[0] + x[x.len() - 1]);
    let xs = 0.5 * span;
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let ys = if hi > lo { hi - lo } else { guess.amplitude.abs().max(1.0) };
    let u: Vec<f64> = x.iter().map(|v| (v - xm) / xs).collect();
    let v: Vec<f64> = y.iter().map(|w| (w - lo) / ys).collect();
    let weights: Option<Vec<f64>> = t.y_err().and_then(|e| {
        if e.iter().all(|s| *s > 0.0) {
            Some(e.iter().map(|s| ys / s).collect())
        } else {
            None
        }
    });

    let p0 = [
        (guess.center - xm) / xs,
        guess.fwhm / xs,
        guess.amplitude / ys,
        (guess.offset - lo) / ys,
    ];
    let out = minimize(
        |p, r| {
            for i in 0..u.len() {
                let model = lorentzian(u[i], p[0], p[1], p[2], p[3]);
                r[i] = match &weights {
                    Some(w) => (model - v[i]) * w[i],
                    None => model - v[i],
                };
            }
        },
        u.len(),
        &p0,
        &LmOptions::default(),
    );

    let p = &out.params;
    let s = sigmas_from(out.covariance.as_ref(), 4);
    let scales = [xs, xs, ys, ys];
    let mut res = FitResult::new("lorentzian");
    res.set("center", xm + p[0] * xs, s[0] * xs);
    res.set("fwhm", p[1].abs() * xs, s[1] * xs);
    res.set("amplitude", p[2] * ys, s[2] * ys);
    res.set("offset", lo + p[3] * ys, s[3] * ys);
    let rn = out.cost.sqrt();
    res.residual_norm = if weights.is_some() { rn } else { rn * ys };
    res.n_iter = out.n_iter;
    res.mark_convergence(out.converged);
    res.free_params = ["center", "fwhm", "amplitude", "offset"].map(String::from).to_vec();
    let sign = [1.0, p[1].signum(), 1.0, 1.0];
    res.covariance = out.covariance.as_ref().map(|c| {
        (0..4)
            .map(|i| (0..4).map(|j| c[(i, j)] * scales[i] * scales[j] * sign[i] * sign[j]).collect())
            .collect()
    });
    Ok(res)
}
