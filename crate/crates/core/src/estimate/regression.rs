//! Straight-line regressions: loss per length from delay-line peaks.

use super::FitResult;
use crate::error::{Error, Result};

/// Weighted least-squares line `y = slope·x + intercept`. With `sigma_y` given,
/// uncertainties follow from the stated errors; without, from the residual scatter.
pub fn fit_line(x: &[f64], y: &[f64], sigma_y: Option<&[f64]>) -> Result<(f64, f64, f64, f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            what: "y",
            got: y.len(),
            expected: x.len(),
        });
    }
    if let Some(s) = sigma_y {
        if s.len() != x.len() {
            return Err(Error::LengthMismatch {
                what: "errors",
                got: s.len(),
                expected: x.len(),
            });
        }
        if let Some(i) = s.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::domain(format!("error bar {i} must be > 0, got {}", s[i])));
        }
    }
    let mut distinct = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::RankDeficient("need at least two distinct abscissae".into()));
    }
    let w: Vec<f64> = match sigma_y {
        Some(s) => s.iter().map(|v| 1.0 / (v * v)).collect(),
        None => vec![1.0; x.len()],
    };
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    let det = sw * sxx - sx * sx;
    if !(det > 1e-14 * sw * sxx) {
        return Err(Error::RankDeficient("abscissae are numerically identical".into()));
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2: f64 = (0..x.len())
        .map(|i| w[i] * (y[i] - slope * x[i] - intercept).powi(2))
        .sum();
    let scale = match sigma_y {
        Some(_) => 1.0,
        None if x.len() > 2 => chi2 / (x.len() - 2) as f64,
        None => 0.0,
    };
    let s_slope = (scale * sw / det).sqrt();
    let s_int = (scale * sxx / det).sqrt();
    Ok((slope, intercept, s_slope, s_int, chi2.sqrt()))
}

/// Peak transmission (dB) versus gap (m) → `slope_db_per_mm`, `intercept_db`.
pub fn fit_loss_per_length(gaps: &[f64], peak_db: &[f64], errs: &[f64]) -> Result<FitResult> {
    let mm: Vec<f64> = gaps.iter().map(|g| g * 1e3).collect();
    let (slope, intercept, ss, si, rn) = fit_line(&mm, peak_db, Some(errs))?;
    let mut r = FitResult::new("loss_per_length");
    r.set("slope_db_per_mm", slope, ss);
    r.set("intercept_db", intercept, si);
    r.residual_norm = rn;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SlopeComparison {
    pub difference: f64,
    /// Combined one-sigma uncertainty of the difference.
    pub sigma: f64,
    pub k: f64,
    pub agree: bool,
}

/// Do two fitted slopes agree within `k` combined standard deviations?
pub fn compare_slopes(a: &FitResult, b: &FitResult, k: f64) -> SlopeComparison {
    let name = "slope_db_per_mm";
    let difference = a.get(name) - b.get(name);
    let sigma = a.sigma_of(name).hypot(b.sigma_of(name));
    SlopeComparison {
        difference,
        sigma,
        k,
        agree: difference.abs() <= k * sigma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_point_line_is_exact() {
        let r = fit_loss_per_length(&[200e-6, 800e-6], &[-20.0, -23.0], &[0.5, 0.5]).unwrap();
        assert_relative_eq!(r.get("slope_db_per_mm"), -5.0, max_relative = 1e-12);
        assert_relative_eq!(r.get("intercept_db"), -19.0, max_relative = 1e-12);
    }

    #[test]
    fn slope_error_from_propagation() {
        // equal errors σ on x = 0.2, 0.4, 0.6, 0.8, 1.0 mm: σ_slope = σ/sqrt(Σ(x−x̄)²) = σ/sqrt(0.4)
        let gaps = [200e-6, 400e-6, 600e-6, 800e-6, 1000e-6];
        let y: Vec<f64> = gaps.iter().map(|g| -20.0 - 300.0 * g).collect();
        let r = fit_loss_per_length(&gaps, &y, &[0.5; 5]).unwrap();
        assert_relative_eq!(r.sigma_of("slope_db_per_mm"), 0.5 / 0.4f64.sqrt(), max_relative = 1e-9);
        assert_relative_eq!(r.get("slope_db_per_mm"), -0.3, max_relative = 1e-9);
    }

    #[test]
    fn identical_gaps_are_rank_deficient() {
        assert!(matches!(
            fit_loss_per_length(&[4e-4, 4e-4, 4e-4], &[-20.0, -21.0, -20.5], &[0.5; 3]),
            Err(Error::RankDeficient(_))
        ));
        assert!(matches!(
            fit_loss_per_length(&[4e-4], &[-20.0], &[0.5]),
            Err(Error::RankDeficient(_))
        ));
        assert!(fit_loss_per_length(&[1e-4, 2e-4], &[-1.0, -2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn injected_three_sigma_difference_disagrees() {
        let gaps = [200e-6, 400e-6, 600e-6, 800e-6];
        let a_y: Vec<f64> = gaps.iter().map(|g| -20.0 - 300.0 * g).collect();
        let a = fit_loss_per_length(&gaps, &a_y, &[0.4; 4]).unwrap();
        let sigma = a.sigma_of("slope_db_per_mm") * 2f64.sqrt();
        let extra = 3.0 * sigma;
        let b_y: Vec<f64> = gaps.iter().map(|g| -20.0 - 300.0 * g + extra * g * 1e3).collect();
        let b = fit_loss_per_length(&gaps, &b_y, &[0.4; 4]).unwrap();
        let cmp = compare_slopes(&a, &b, 2.0);
        assert_relative_eq!(cmp.difference.abs(), extra, max_relative = 1e-9);
        assert!(!cmp.agree);
        assert!(compare_slopes(&a, &a, 2.0).agree);
    }

    #[test]
    fn unweighted_line_uses_scatter() {
        let (m, b, sm, _, _) = fit_line(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.1, 4.9, 7.0], None).unwrap();
        assert!((m - 1.98).abs() < 1e-12);
        assert!((b - 1.03).abs() < 1e-12);
        assert!(sm > 0.0);
    }
}
