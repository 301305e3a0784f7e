//! Figure pipelines: deterministic functions from a config and a seed to data.

use num_complex::Complex64;
use rand::Rng;
use sawlab_core::acoustic::{idt_reflection, q_factors, s11_resonator, DelayLineSpec, QFactors};
use sawlab_core::config::Config;
use sawlab_core::estimate::{
    compare_slopes, extract_modulation_index, fit_lorentzian, fit_loss_per_length, fit_s11, fit_stark_slope,
    noise_scale_for_snr, run_trials, synthesize, synthesize_sparams, FitResult, NoiseSpec, S11Data, SlopeComparison,
    StarkFit,
};
use sawlab_core::io::LayerSweepRow;
use sawlab_core::layer::{
    attenuation_per_wavevector, attenuation_rate_hz, k2_effective, regime_classify, velocity_shift_fraction,
};
use sawlab_core::qd::{pl_bias_map, BiasMap, ModulationDrive};
use sawlab_core::trace::{linspace, logspace, SParamTrace, Trace, TraceMeta};
use sawlab_core::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Noise streams of independent synthetic measurements in one run.
pub mod stream {
    pub const RESONATOR: u64 = 1;
    pub const MAP: u64 = 2;
    pub const SPECTRUM: u64 = 3;
    /// Drive sweep point `k` uses `DRIVE_SWEEP + k`.
    pub const DRIVE_SWEEP: u64 = 1_000;
    /// Delay-line device `d`, gap `g` uses `DELAY_LINE + 1000·d + g`.
    pub const DELAY_LINE: u64 = 1_000_000;
}

/// Log-spaced conductivity sweep of the relaxation model.
pub fn layer_sweep(cfg: &Config, sigma_min: f64, sigma_max: f64, n: usize) -> Result<Vec<LayerSweepRow>> {
    if !(sigma_min > 0.0 && sigma_min < sigma_max && sigma_max.is_finite()) || n < 2 {
        return Err(Error::Domain(format!(
            "invalid conductivity range [{sigma_min}, {sigma_max}] with {n} points"
        )));
    }
    let c = cfg.relaxation()?;
    let f = cfg.sweeps.loss_frequency_hz;
    logspace(sigma_min, sigma_max, n)
        .into_iter()
        .map(|sigma| {
            Ok(LayerSweepRow {
                sigma,
                dv_over_v: velocity_shift_fraction(sigma, &c)?,
                kappa_over_q: attenuation_per_wavevector(sigma, &c)?,
                loss_hz: attenuation_rate_hz(sigma, &c, f)?,
                regime: regime_classify(sigma, &c)?,
            })
        })
        .collect()
}

/// `(depth m, k2)` on the configured linear depth grid.
pub fn depth_sweep(cfg: &Config) -> Result<Vec<(f64, f64)>> {
    let s = &cfg.sweeps;
    let cal = cfg.k2_calibration()?;
    linspace(s.depth_min_nm, s.depth_max_nm, s.depth_points)
        .into_iter()
        .map(|d| Ok((d * 1e-9, k2_effective(d * 1e-9, &cal)?)))
        .collect()
}

/// One delay line at one gap.
#[derive(Debug, Clone)]
pub struct DelayLineRun {
    pub gap: f64,
    pub spec: DelayLineSpec,
    /// Transmitted power at the transducer centre frequency (dB).
    pub peak_db: f64,
    /// Half the spread of the crosstalk beating envelope at the peak (dB).
    pub err_db: f64,
}

fn delay_line_spec(cfg: &Config, gap: f64, phase: f64) -> Result<DelayLineSpec> {
    let idt = cfg.delay_line_idt()?;
    DelayLineSpec::new(
        idt,
        idt,
        gap,
        cfg.delay_line_loss_per_length()?,
        Complex64::from_polar(cfg.delay_line_crosstalk(), phase),
        cfg.material.saw_velocity_m_per_s,
    )
}

/// Peak and error bar as read off a measured transmission spectrum: the value at
/// the centre frequency, with the crosstalk envelope `|A| ± |x|` as uncertainty.
fn delay_line_run(cfg: &Config, gap: f64, phase: f64) -> Result<DelayLineRun> {
    let spec = delay_line_spec(cfg, gap, phase)?;
    let f0 = spec.idt_a.center_frequency;
    let a = spec.acoustic_term(f0)?.norm();
    let x = spec.crosstalk.norm();
    let peak_db = 20.0 * (spec.acoustic_term(f0)? + spec.crosstalk).norm().log10();
    let err_db = if a > x {
        10.0 * ((a + x) / (a - x)).log10()
    } else {
        f64::INFINITY
    };
    Ok(DelayLineRun {
        gap,
        spec,
        peak_db,
        err_db,
    })
}

fn crosstalk_phases(seed: u64, stream: u64, n: usize) -> Vec<f64> {
    let mut rng = NoiseSpec::gaussian(0.0, seed).for_trial(stream).rng();
    (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect()
}

/// Delay lines at every gap (m) of device `device`; crosstalk phases are seeded.
pub fn delay_lines(cfg: &Config, gaps: &[f64], seed: u64, device: u64) -> Result<Vec<DelayLineRun>> {
    if gaps.is_empty() {
        return Err(Error::Domain("at least one gap is required".into()));
    }
    let phases = crosstalk_phases(seed, stream::DELAY_LINE + 1000 * device, gaps.len());
    gaps.iter().zip(phases).map(|(&g, p)| delay_line_run(cfg, g, p)).collect()
}

pub fn delay_line_grid(cfg: &Config) -> Vec<f64> {
    let d = &cfg.delay_line;
    linspace(d.center_frequency_hz - 0.5 * d.span_hz, d.center_frequency_hz + 0.5 * d.span_hz, d.n_points)
}

pub fn s21_trace(run: &DelayLineRun, grid: Vec<f64>) -> Result<SParamTrace> {
    let meta = TraceMeta::new("frequency", "Hz", "S21", "")
        .with_provenance(format!("delay line, gap {:.3} um", run.gap * 1e6));
    let spec = run.spec;
    let s = grid
        .iter()
        .map(|&f| Ok(spec.acoustic_term(f)? + spec.crosstalk))
        .collect::<Result<Vec<_>>>()?;
    SParamTrace::new(grid, s, meta)
}

/// Transducer reflection S11 of the configured delay line.
pub fn idt_s11_trace(cfg: &Config) -> Result<SParamTrace> {
    let idt = cfg.delay_line_idt()?;
    let grid = delay_line_grid(cfg);
    let s = grid.iter().map(|&f| idt_reflection(f, &idt)).collect::<Result<Vec<_>>>()?;
    let label = if cfg.delay_line.doped_layer { "doped substrate" } else { "reference substrate" };
    SParamTrace::new(grid, s, TraceMeta::new("frequency", "Hz", "S11", "").with_provenance(format!("transducer, {label}")))
}

pub fn fit_delay_lines(runs: &[DelayLineRun]) -> Result<FitResult> {
    let gaps: Vec<f64> = runs.iter().map(|r| r.gap).collect();
    let peaks: Vec<f64> = runs.iter().map(|r| r.peak_db).collect();
    let errs: Vec<f64> = runs.iter().map(|r| r.err_db).collect();
    fit_loss_per_length(&gaps, &peaks, &errs)
}

/// Copy of `cfg` describing the same delay line on the plain substrate.
pub fn reference_substrate(cfg: &Config) -> Config {
    let mut c = cfg.clone();
    c.delay_line.doped_layer = false;
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub agree: usize,
    pub pass_rate: f64,
    pub k: f64,
}

/// Repeats the two-substrate slope comparison with fresh crosstalk phases.
pub fn slope_agreement_monte_carlo(a: &Config, b: &Config, gaps: &[f64], trials: usize, seed: u64, k: f64) -> Result<MonteCarloSummary> {
    let outcomes = run_trials(trials, &NoiseSpec::gaussian(0.0, seed), |_, noise| -> Result<bool> {
        let mut rng = noise.rng();
        let mut fit = |cfg: &Config| -> Result<FitResult> {
            let runs = gaps
                .iter()
                .map(|&g| delay_line_run(cfg, g, rng.random_range(0.0..2.0 * PI)))
                .collect::<Result<Vec<_>>>()?;
            fit_delay_lines(&runs)
        };
        let fa = fit(a)?;
        let fb = fit(b)?;
        Ok(compare_slopes(&fa, &fb, k).agree)
    });
    let mut agree = 0;
    for o in outcomes {
        if o? {
            agree += 1;
        }
    }
    Ok(MonteCarloSummary {
        trials,
        agree,
        pass_rate: agree as f64 / trials as f64,
        k,
    })
}

#[derive(Debug, Clone)]
pub struct ResonatorRun {
    pub clean: SParamTrace,
    pub measured: SParamTrace,
    pub fit: FitResult,
    pub truth: QFactors,
}

/// Synthesizes S11 at the configured SNR and fits it. A non-converged fit is
/// returned, flagged, rather than turned into an error.
pub fn resonator(cfg: &Config, seed: u64) -> Result<ResonatorRun> {
    let p = cfg.resonator()?;
    let r = &cfg.resonator;
    let grid = linspace(r.f0_hz - 0.5 * r.span_hz, r.f0_hz + 0.5 * r.span_hz, r.n_points);
    let meta = TraceMeta::new("frequency", "Hz", "S11", "").with_provenance("one-port SAW resonator");
    let clean = SParamTrace::from_fn(grid, meta, |f| s11_resonator(f, &p))?;
    let amp = clean.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let noise = NoiseSpec::gaussian(noise_scale_for_snr(amp, cfg.noise.snr_db), seed).for_trial(stream::RESONATOR);
    let measured = synthesize_sparams(&clean, &noise)?;
    let fit = fit_s11(S11Data::Complex(&measured), None)?;
    Ok(ResonatorRun {
        clean,
        measured,
        fit,
        truth: q_factors(&p),
    })
}

fn add_noise(t: &Trace, peak: f64, snr_db: f64, seed: u64, stream: u64) -> Result<Trace> {
    let noise = NoiseSpec::gaussian(noise_scale_for_snr(peak, snr_db), seed).for_trial(stream);
    synthesize(t, &noise)
}

/// `Some(drive)` at `drive_hz`, or `None` with the drive off.
pub fn drive_at(cfg: &Config, drive_hz: Option<f64>) -> Result<Option<ModulationDrive>> {
    match drive_hz {
        None => Ok(None),
        Some(f) => Ok(Some(cfg.drive()?.at_frequency(f)?)),
    }
}

/// Band of drive frequencies the model is evaluated over: the configured sweep span
/// around the acoustic mode.
pub fn drive_band(cfg: &Config) -> (f64, f64) {
    let a = &cfg.acoustic_mode;
    let h = 0.5 * cfg.sweeps.drive_span_hz;
    (a.f0_hz - h, a.f0_hz + h)
}

/// Filtered spectrum at one bias, with noise at the configured SNR relative to the
/// peak. Dark biases give an all-zero spectrum and no noise.
pub fn spectrum_at(cfg: &Config, bias: f64, drive: Option<&ModulationDrive>, seed: u64, stream: u64) -> Result<Trace> {
    let map = pl_bias_map(&[bias], &cfg.emitter()?, drive, &cfg.filter()?)?;
    let clean = map.row_trace(0)?;
    let peak = clean.y().iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(clean);
    }
    add_noise(&clean, peak, cfg.noise.snr_db, seed, stream)
}

/// Bias map on the configured bias grid, noise relative to the map maximum.
pub fn bias_map(cfg: &Config, drive: Option<&ModulationDrive>, seed: u64) -> Result<BiasMap> {
    let s = &cfg.sweeps;
    let bias = linspace(s.bias_min_v, s.bias_max_v, s.bias_points);
    let mut map = pl_bias_map(&bias, &cfg.emitter()?, drive, &cfg.filter()?)?;
    let peak = map.counts.iter().flatten().cloned().fold(0.0, f64::max);
    let sigma = noise_scale_for_snr(peak, cfg.noise.snr_db);
    if sigma > 0.0 {
        let mut rng = NoiseSpec::gaussian(sigma, seed).for_trial(stream::MAP).rng();
        for row in &mut map.counts {
            for c in row.iter_mut() {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                *c += sigma * z;
            }
        }
    }
    Ok(map)
}

pub fn stark(map: &BiasMap) -> Result<StarkFit> {
    fit_stark_slope(map)
}

#[derive(Debug, Clone)]
pub struct DriveSweep {
    pub drive_hz: Vec<f64>,
    pub delta: Vec<f64>,
    pub delta_sigma: Vec<f64>,
    /// Lorentzian fit of δ² versus drive frequency.
    pub fit: FitResult,
    pub q: f64,
    pub q_sigma: f64,
}

/// Modulation index versus drive frequency at the configured bias, then a
/// Lorentzian fit of δ²; Q = centre / FWHM.
pub fn drive_sweep(cfg: &Config, seed: u64) -> Result<DriveSweep> {
    let (lo, hi) = drive_band(cfg);
    let drive_hz = linspace(lo, hi, cfg.sweeps.drive_points);
    let base = cfg.drive()?;
    let filt = cfg.filter()?;
    let bias = cfg.acoustic_mode.bias_v;
    let linewidth = cfg.emitter.linewidth_hz;
    let fits = drive_hz
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            let d = base.at_frequency(f)?;
            let spec = spectrum_at(cfg, bias, Some(&d), seed, stream::DRIVE_SWEEP + k as u64)?;
            extract_modulation_index(&spec, f, &filt, linewidth)
        })
        .collect::<Result<Vec<_>>>()?;
    let delta: Vec<f64> = fits.iter().map(|r| r.get("delta")).collect();
    let delta_sigma: Vec<f64> = fits.iter().map(|r| r.sigma_of("delta")).collect();
    let d2 = Trace::new(
        drive_hz.clone(),
        delta.iter().map(|d| d * d).collect(),
        TraceMeta::new("drive frequency", "Hz", "delta^2", ""),
    )?;
    let fit = fit_lorentzian(&d2, None)?;
    let q = fit.get("center") / fit.get("fwhm");
    let q_sigma = fit.propagate(|p| p["center"] / p["fwhm"]);
    Ok(DriveSweep {
        drive_hz,
        delta,
        delta_sigma,
        fit,
        q,
        q_sigma,
    })
}

/// Slope comparison of the configured substrate against `other`.
pub fn compare_configs(a: &[DelayLineRun], b: &[DelayLineRun], k: f64) -> Result<(FitResult, FitResult, SlopeComparison)> {
    let fa = fit_delay_lines(a)?;
    let fb = fit_delay_lines(b)?;
    let c = compare_slopes(&fa, &fb, k);
    Ok((fa, fb, c))
}
