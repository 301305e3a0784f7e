use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use sawlab_core::acoustic::{q_factors, s11_resonator, ResonatorParams};
use sawlab_core::config::Config;
use sawlab_core::estimate::{fit_lorentzian, fit_s11, lorentzian, S11Data};
use sawlab_core::io::{sparams_from_csv, sparams_to_csv};
use sawlab_core::layer::{
    attenuation_per_wavevector, attenuation_rate_hz, k2_effective, regime_classify, velocity_shift_fraction,
    K2Anchor, K2Calibration, Regime, RelaxationCoeffs,
};
use sawlab_core::qd::{sideband_spectrum, FilterSpec};
use sawlab_core::trace::{linspace, SParamTrace, Trace, TraceMeta};

fn meta() -> TraceMeta {
    TraceMeta::new("frequency", "Hz", "S11", "")
}

#[test]
fn reference_config_survives_toml_round_trip() {
    let c = Config::reference();
    assert_eq!(Config::parse(&c.to_toml()).unwrap(), c);
}

#[test]
fn reference_layer_loss() {
    let c = Config::reference();
    assert_relative_eq!(c.layer_loss_rate(3.5e9).unwrap(), 96.25, max_relative = 1e-7);
    assert_eq!(regime_classify(1e5, &c.relaxation().unwrap()).unwrap(), Regime::Metallic);
}

#[test]
fn s11_fit_through_csv_file_format() {
    let p = ResonatorParams::new(3.5e9, 125e3, 100e3, Complex64::new(0.02, -0.01)).unwrap();
    let t = SParamTrace::from_fn(linspace(3.499e9, 3.501e9, 801), meta(), |f| s11_resonator(f, &p)).unwrap();
    let back = sparams_from_csv(&sparams_to_csv(&t).unwrap(), meta()).unwrap();
    let r = fit_s11(S11Data::Complex(&back), None).unwrap();
    assert_relative_eq!(r.get("q_int"), q_factors(&p).q_int, max_relative = 1e-6);
    assert_relative_eq!(r.get("kappa_ext"), 100e3, max_relative = 1e-6);
}

#[test]
fn filtered_unmodulated_line_width() {
    let filt = FilterSpec::new(600e6, (-15e9, 15e9), 601).unwrap();
    let comb = sideband_spectrum(0.0, 643.6e6, 0.0, 3.5e9, 1).unwrap().filtered(filt.fwhm);
    let t = comb.to_trace(filt.grid(), 1.0).unwrap();
    let r = fit_lorentzian(&t, None).unwrap();
    assert_relative_eq!(r.get("fwhm"), 1243.6e6, max_relative = 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attenuation_bounded_by_half_shift(alpha2 in 1e-5f64..0.05, sm in 1e-2f64..1e4, s in 1e-4f64..1e9) {
        let c = RelaxationCoeffs::new(alpha2, sm).unwrap();
        let k = attenuation_per_wavevector(s, &c).unwrap();
        prop_assert!(k <= alpha2 / 4.0 * (1.0 + 1e-12));
        prop_assert!(velocity_shift_fraction(s, &c).unwrap() <= alpha2 / 2.0);
        let f = 3.5e9;
        prop_assert!((attenuation_rate_hz(s, &c, 2.0 * f).unwrap() - 2.0 * attenuation_rate_hz(s, &c, f).unwrap()).abs()
            <= 1e-12 * attenuation_rate_hz(s, &c, f).unwrap().max(1e-300));
    }

    #[test]
    fn velocity_shift_decreases_with_conductivity(sm in 1e-2f64..1e4, a in 1e-4f64..1e8, b in 1e-4f64..1e8) {
        let c = RelaxationCoeffs::new(5.5e-4, sm).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(velocity_shift_fraction(hi, &c).unwrap() <= velocity_shift_fraction(lo, &c).unwrap());
    }

    #[test]
    fn k2_curve_is_monotone_through_its_anchors(
        steps in prop::collection::vec((0.1f64..2.0, 0.0f64..1.0), 1..6),
        probe in prop::collection::vec(1e-9f64..1e-5, 50),
    ) {
        let bulk = 7e-4;
        let mut depth = 50e-9;
        let mut k2 = 1e-5;
        let mut anchors = Vec::new();
        for (dl, dk) in steps {
            depth *= 1.0 + dl;
            k2 = (k2 + dk * (bulk - k2) * 0.5).min(bulk);
            anchors.push(K2Anchor { depth, k2 });
        }
        let cal = K2Calibration::new(anchors.clone(), bulk).unwrap();
        for a in &anchors {
            prop_assert!((k2_effective(a.depth, &cal).unwrap() - a.k2).abs() <= 1e-15);
        }
        let mut probe = probe;
        probe.sort_by(f64::total_cmp);
        let v: Vec<f64> = probe.iter().map(|&d| k2_effective(d, &cal).unwrap()).collect();
        prop_assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-18));
        prop_assert!(v.iter().all(|&k| k > 0.0 && k <= bulk));
    }

    #[test]
    fn lorentzian_fit_recovers_parameters(
        center in -2.0f64..2.0,
        fwhm in 0.5f64..3.0,
        amp in 0.1f64..10.0,
        offset in -1.0f64..1.0,
    ) {
        let x = linspace(-20.0, 20.0, 401);
        let t = Trace::from_fn(x, TraceMeta::new("x", "", "y", ""), |u| lorentzian(u, center, fwhm, amp, offset)).unwrap();
        let r = fit_lorentzian(&t, None).unwrap();
        prop_assert!((r.get("center") - center).abs() < 1e-6);
        prop_assert!((r.get("fwhm") / fwhm - 1.0).abs() < 1e-6);
        prop_assert!((r.get("amplitude") / amp - 1.0).abs() < 1e-6);
    }

    #[test]
    fn comb_weight_is_conserved(delta in 0.0f64..8.0) {
        let comb = sideband_spectrum(0.0, 643.6e6, delta, 3.5e9, 3).unwrap();
        prop_assert!((comb.total_weight() - 1.0).abs() < 1e-6);
    }
}
