//! One-port resonator fits.

use num_complex::Complex64;

use super::lm::{minimize, LmOptions};
use super::lorentzian::{auto_guess, fit_lorentzian, LorentzianGuess};
use super::{edge_mean, sigmas_from, FitResult};
use crate::acoustic::{s11_resonator, ResonatorParams};
use crate::error::{Error, Result};
use crate::trace::{SParamTrace, Trace, TraceMeta};

/// Flag set when only |S11|² was available and the under/over-coupled branches
/// cannot be told apart.
pub const COUPLING_AMBIGUOUS: &str = "coupling_ambiguous";

pub enum S11Data<'a> {
    Complex(&'a SParamTrace),
    /// `|S11|²` samples.
    Power(&'a Trace),
}

/// Fits the one-port model. Complex input yields `f0`, `kappa_int`, `kappa_ext`,
/// `crosstalk_re`, `crosstalk_im` and the Q factors. Power-only input yields both
/// coupling branches (`kappa_int` / `kappa_int_alt`, ...) and sets
/// [`COUPLING_AMBIGUOUS`].
pub fn fit_s11(data: S11Data<'_>, init: Option<ResonatorParams>) -> Result<FitResult> {
    match data {
        S11Data::Complex(t) => fit_complex(t, init),
        S11Data::Power(t) => fit_power(t, init),
    }
}

fn noise_estimate(d: &[Complex64]) -> f64 {
    // first differences of white noise have twice the per-sample variance per component
    let ms: f64 = d.windows(2).map(|w| (w[1] - w[0]).norm_sqr()).sum::<f64>() / (d.len() - 1) as f64;
    (ms / 4.0).sqrt()
}

fn check_span(f: &[f64], kappa: f64) -> Result<()> {
    let span = f[f.len() - 1] - f[0];
    if span < 3.0 * kappa {
        return Err(Error::InsufficientData(format!(
            "trace spans {span} Hz, less than three linewidths ({kappa} Hz)"
        )));
    }
    Ok(())
}

fn fit_complex(t: &SParamTrace, init: Option<ResonatorParams>) -> Result<FitResult> {
    let f = t.freq();
    let s = t.values();
    if f.len() < 8 {
        return Err(Error::InsufficientData("S11 fit needs at least 8 samples".into()));
    }
    let k = ((f.len() as f64 * 0.05).ceil() as usize).max(1);
    let baseline: Complex64 =
        s[..k].iter().chain(&s[s.len() - k..]).sum::<Complex64>() / (2 * k) as f64;
    let feature: Vec<Complex64> = s.iter().map(|z| z - baseline).collect();
    let peak = feature.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(peak > 1e-9) || peak < 6.0 * noise_estimate(&feature) {
        return Err(Error::NoResonance);
    }

    let p_init = match init {
        Some(p) => p,
        None => {
            let power: Vec<f64> = feature.iter().map(|z| z.norm_sqr()).collect();
            let g = auto_guess(f, &power).map_err(|_| Error::NoResonance)?;
            let kt = g.fwhm;
            let ke = (peak * kt / 2.0).clamp(0.02 * kt, 0.98 * kt);
            ResonatorParams {
                f0: g.center,
                kappa_int: kt - ke,
                kappa_ext: ke,
                crosstalk: baseline - 1.0,
            }
        }
    };
    check_span(f, p_init.kappa_total())?;

    let fm = 0.5 * (f[0] + f[f.len() - 1]);
    let fs = p_init.kappa_total();
    let u: Vec<f64> = f.iter().map(|v| (v - fm) / fs).collect();
    let p0 = [
        (p_init.f0 - fm) / fs,
        p_init.kappa_int / fs,
        p_init.kappa_ext / fs,
        p_init.crosstalk.re,
        p_init.crosstalk.im,
    ];
    let m = u.len();
    let out = minimize(
        |p, r| {
            let rp = ResonatorParams {
                f0: p[0],
                kappa_int: p[1],
                kappa_ext: p[2],
                crosstalk: Complex64::new(p[3], p[4]),
            };
            for i in 0..m {
                let d = s11_resonator(u[i], &rp) - s[i];
                r[2 * i] = d.re;
                r[2 * i + 1] = d.im;
            }
        },
        2 * m,
        &p0,
        &LmOptions::default(),
    );

    let p = &out.params;
    let sg = sigmas_from(out.covariance.as_ref(), 5);
    let scales = [fs, fs, fs, 1.0, 1.0];
    let mut res = FitResult::new("s11_one_port");
    res.set("f0", fm + p[0] * fs, sg[0] * fs);
    res.set("kappa_int", p[1] * fs, sg[1] * fs);
    res.set("kappa_ext", p[2] * fs, sg[2] * fs);
    res.set("crosstalk_re", p[3], sg[3]);
    res.set("crosstalk_im", p[4], sg[4]);
    res.free_params = ["f0", "kappa_int", "kappa_ext", "crosstalk_re", "crosstalk_im"]
        .map(String::from)
        .to_vec();
    res.covariance = out.covariance.as_ref().map(|c| {
        (0..5)
            .map(|i| (0..5).map(|j| c[(i, j)] * scales[i] * scales[j]).collect())
            .collect()
    });
    res.residual_norm = out.cost.sqrt();
    res.n_iter = out.n_iter;
    let physical = p[1] > 0.0 && p[2] >= 0.0;
    if !physical {
        res.flags.push("unphysical_linewidth".into());
    }
    res.mark_convergence(out.converged && physical);
    add_q_factors(&mut res, "kappa_int", "kappa_ext", "");
    Ok(res)
}

fn add_q_factors(res: &mut FitResult, ki: &str, ke: &str, suffix: &str) {
    let (ki, ke) = (ki.to_string(), ke.to_string());
    let q_int = {
        let ki = ki.clone();
        move |p: &std::collections::BTreeMap<String, f64>| p["f0"] / p[&ki]
    };
    let q_ext = {
        let ke = ke.clone();
        move |p: &std::collections::BTreeMap<String, f64>| p["f0"] / p[&ke]
    };
    let q_loaded = move |p: &std::collections::BTreeMap<String, f64>| p["f0"] / (p[&ki] + p[&ke]);
    let vals = [
        (format!("q_int{suffix}"), q_int(&res.params), res.propagate(&q_int)),
        (format!("q_ext{suffix}"), q_ext(&res.params), res.propagate(&q_ext)),
        (format!("q_loaded{suffix}"), q_loaded(&res.params), res.propagate(&q_loaded)),
    ];
    for (name, v, s) in vals {
        res.set(&name, v, s);
    }
}

fn fit_power(t: &Trace, init: Option<ResonatorParams>) -> Result<FitResult> {
    if t.len() < 8 {
        return Err(Error::InsufficientData("S11 fit needs at least 8 samples".into()));
    }
    let base = edge_mean(t.y(), 0.05);
    let feature: Vec<Complex64> = t.y().iter().map(|v| Complex64::new(v - base, 0.0)).collect();
    let peak = feature.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(peak > 1e-9) || peak < 6.0 * 2.0 * noise_estimate(&feature) {
        return Err(Error::NoResonance);
    }
    let guess = init.map(|p| {
        let b = (Complex64::new(1.0, 0.0) + p.crosstalk).norm_sqr();
        let kt = p.kappa_total();
        LorentzianGuess {
            center: p.f0,
            fwhm: kt,
            amplitude: -b * 4.0 * p.kappa_int * p.kappa_ext / (kt * kt),
            offset: b,
        }
    });
    let g = match guess {
        Some(g) => g,
        None => auto_guess(t.x(), t.y()).map_err(|_| Error::NoResonance)?,
    };
    check_span(t.x(), g.fwhm)?;
    let lor = fit_lorentzian(t, Some(g))?;
    if lor.get("amplitude") >= 0.0 {
        return Err(Error::NoResonance);
    }

    // |S11|² = B·(1 − d·(κ/2)²/(Δ² + (κ/2)²)), d = 4 κ_int κ_ext / κ²
    let mut res = FitResult::new("s11_one_port_power");
    let b = lor.get("offset");
    let kt = lor.get("fwhm");
    res.set("f0", lor.get("center"), lor.sigma_of("center"));
    res.set("kappa_total", kt, lor.sigma_of("fwhm"));
    res.set("baseline", b, lor.sigma_of("offset"));
    res.set("dip_depth", -lor.get("amplitude") / b, f64::NAN);
    res.params.insert("amplitude".into(), lor.get("amplitude"));
    res.sigma.insert("amplitude".into(), lor.sigma_of("amplitude"));
    res.free_params = ["f0", "kappa_total", "amplitude", "baseline"].map(String::from).to_vec();
    res.covariance = lor.covariance.clone();
    let depth = |p: &std::collections::BTreeMap<String, f64>| (-p["amplitude"] / p["baseline"]).min(1.0);
    let ds = res.propagate(depth);
    res.sigma.insert("dip_depth".into(), ds);

    let split = |p: &std::collections::BTreeMap<String, f64>, sign: f64| {
        let root = (1.0 - depth(p)).max(0.0).sqrt();
        0.5 * p["kappa_total"] * (1.0 + sign * root)
    };
    // Under-coupled branch (κ_int > κ_ext) first, over-coupled branch as `_alt`.
    for (suffix, sign) in [("", 1.0), ("_alt", -1.0)] {
        let ki = move |p: &std::collections::BTreeMap<String, f64>| split(p, sign);
        let ke = move |p: &std::collections::BTreeMap<String, f64>| split(p, -sign);
        let (vi, si) = (ki(&res.params), res.propagate(ki));
        let (ve, se) = (ke(&res.params), res.propagate(ke));
        res.set(&format!("kappa_int{suffix}"), vi, si);
        res.set(&format!("kappa_ext{suffix}"), ve, se);
    }
    add_q_factors(&mut res, "kappa_int", "kappa_ext", "");
    add_q_factors(&mut res, "kappa_int_alt", "kappa_ext_alt", "_alt");
    res.residual_norm = lor.residual_norm;
    res.n_iter = lor.n_iter;
    res.flags.push(COUPLING_AMBIGUOUS.into());
    res.mark_convergence(lor.converged);
    Ok(res)
}

/// `S11` of a fitted result as a trace on `f`, for overlays.
pub fn fitted_trace(res: &FitResult, f: Vec<f64>) -> Result<SParamTrace> {
    let p = ResonatorParams {
        f0: res.get("f0"),
        kappa_int: res.get("kappa_int"),
        kappa_ext: res.get("kappa_ext"),
        crosstalk: Complex64::new(res.get("crosstalk_re"), res.get("crosstalk_im")),
    };
    SParamTrace::from_fn(f, TraceMeta::new("frequency", "Hz", "S11", ""), |v| s11_resonator(v, &p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::synth::{noise_scale_for_snr, synthesize_sparams, NoiseSpec};
    use crate::trace::linspace;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn trace(p: &ResonatorParams, half_span: f64, n: usize) -> SParamTrace {
        SParamTrace::from_fn(
            linspace(p.f0 - half_span, p.f0 + half_span, n),
            TraceMeta::new("frequency", "Hz", "S11", ""),
            |f| s11_resonator(f, p),
        )
        .unwrap()
    }

    #[test]
    fn complex_exact_recovery() {
        let p = ResonatorParams::new(3.5e9, 125e3, 110e3, Complex64::new(0.03, -0.02)).unwrap();
        let t = trace(&p, 2e6, 401);
        let r = fit_s11(S11Data::Complex(&t), None).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.get("f0"), 3.5e9, max_relative = 1e-12);
        assert_relative_eq!(r.get("kappa_int"), 125e3, max_relative = 1e-6);
        assert_relative_eq!(r.get("kappa_ext"), 110e3, max_relative = 1e-6);
        assert_relative_eq!(r.get("crosstalk_re"), 0.03, max_relative = 1e-6);
        assert_relative_eq!(r.get("q_int"), 28_000.0, max_relative = 1e-6);
        let fitted = fitted_trace(&r, t.freq().to_vec()).unwrap();
        for (a, b) in fitted.values().iter().zip(t.values()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn uncoupled_mode_has_no_resonance() {
        let p = ResonatorParams::new(3.5e9, 125e3, 0.0, Complex64::new(0.01, 0.0)).unwrap();
        let t = trace(&p, 2e6, 401);
        assert!(matches!(fit_s11(S11Data::Complex(&t), None), Err(Error::NoResonance)));
        assert!(matches!(fit_s11(S11Data::Power(&t.power()), None), Err(Error::NoResonance)));
    }

    #[test]
    fn noisy_fit_reports_uncertainty() {
        let p = ResonatorParams::new(3.5e9, 125e3, 120e3, Complex64::default()).unwrap();
        let t = trace(&p, 1.5e6, 601);
        let noisy = synthesize_sparams(&t, &NoiseSpec::gaussian(noise_scale_for_snr(1.0, 30.0), 5)).unwrap();
        let r = fit_s11(S11Data::Complex(&noisy), None).unwrap();
        let q = r.get("q_int");
        let s = r.sigma_of("q_int");
        assert!(s > 0.0 && s.is_finite());
        assert!((q - 28_000.0).abs() < 5.0 * s, "q = {q} ± {s}");
    }

    #[test]
    fn power_fit_reports_both_branches() {
        let p = ResonatorParams::new(3.5e9, 125e3, 60e3, Complex64::default()).unwrap();
        let t = trace(&p, 2e6, 401).power();
        let r = fit_s11(S11Data::Power(&t), None).unwrap();
        assert!(r.has_flag(COUPLING_AMBIGUOUS));
        assert_relative_eq!(r.get("kappa_int"), 125e3, max_relative = 1e-6);
        assert_relative_eq!(r.get("kappa_ext"), 60e3, max_relative = 1e-6);
        assert_relative_eq!(r.get("kappa_int_alt"), 60e3, max_relative = 1e-6);
        assert_relative_eq!(r.get("kappa_ext_alt"), 125e3, max_relative = 1e-6);
        assert_relative_eq!(r.get("q_int"), 28_000.0, max_relative = 1e-6);
    }

    #[test]
    fn too_narrow_span_is_rejected() {
        let p = ResonatorParams::new(3.5e9, 125e3, 125e3, Complex64::default()).unwrap();
        let t = trace(&p, 200e3, 101);
        assert!(matches!(fit_s11(S11Data::Complex(&t), Some(p)), Err(Error::InsufficientData(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn complex_round_trip(ki in 20e3f64..400e3, ratio in 0.2f64..3.0, xr in -0.05f64..0.05, xi in -0.05f64..0.05) {
            let ke = ki * ratio;
            let p = ResonatorParams::new(3.5e9, ki, ke, Complex64::new(xr, xi)).unwrap();
            let t = trace(&p, 4.0 * (ki + ke), 801);
            let r = fit_s11(S11Data::Complex(&t), None).unwrap();
            prop_assert!(((r.get("kappa_int") - ki) / ki).abs() < 1e-6);
            prop_assert!(((r.get("kappa_ext") - ke) / ke).abs() < 1e-6);
            prop_assert!((r.get("f0") - 3.5e9).abs() < 1e-6 * ki);
        }
    }
}
