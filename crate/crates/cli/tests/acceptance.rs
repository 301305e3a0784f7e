//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sawlab::commands::Figure;
use sawlab::pipelines;
use sawlab_core::config::Config;
use sawlab_core::estimate::fit_lorentzian;
use sawlab_core::layer::{
    attenuation_per_wavevector, attenuation_rate_hz, k2_effective, velocity_shift_fraction, RelaxationCoeffs,
};
use sawlab_core::qd::{bessel_j, bessel_j_signed, filtered_spectrum, lorentzian_density, FilterSpec};
use sawlab_core::trace::{linspace, logspace, Trace, TraceMeta};
use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn relaxation_analytics() -> Outcome {
    let c = Config::reference().relaxation().map_err(|e| e.to_string())?;
    let worst = [1e-4, 1e-3, 5.5e-4, 0.02]
        .iter()
        .flat_map(|&alpha2| [0.1, 10.0, 3.7e3].map(|sm| (alpha2, sm)))
        .map(|(alpha2, sm)| {
            let c = RelaxationCoeffs::new(alpha2, sm).unwrap();
            let peak = attenuation_per_wavevector(sm, &c).unwrap();
            let v0 = velocity_shift_fraction(0.0, &c).unwrap();
            let side = attenuation_per_wavevector(sm * (1.0 + 1e-4), &c).unwrap()
                .max(attenuation_per_wavevector(sm * (1.0 - 1e-4), &c).unwrap());
            let e = rel(peak, alpha2 / 4.0).max(rel(v0, alpha2 / 2.0));
            if side < peak { e } else { f64::INFINITY }
        })
        .fold(0.0, f64::max);
    let grid = logspace(c.sigma_m * 1e-3, c.sigma_m * 1e3, 2001);
    let arg = grid
        .iter()
        .map(|&s| attenuation_per_wavevector(s, &c).unwrap())
        .enumerate()
        .fold((0, 0.0), |m, (i, v)| if v > m.1 { (i, v) } else { m })
        .0;
    check(
        worst <= 1e-12 && rel(grid[arg], c.sigma_m) < 1e-9,
        format!("max rel err {worst:.1e} at sigma_m and sigma=0; grid argmax at {:.6} S/m", grid[arg]),
    )
}

fn loss_at_high_conductivity() -> Outcome {
    let c = RelaxationCoeffs::new(5.5e-4, 10.0).map_err(|e| e.to_string())?;
    let loss = attenuation_rate_hz(1e5, &c, 3.5e9).map_err(|e| e.to_string())?;
    check(
        (80.0..=120.0).contains(&loss) && loss <= 1e5 / 100.0,
        format!("{loss:.3} Hz at 1e5 S/m, 3.5 GHz"),
    )
}

fn k2_calibration() -> Outcome {
    let cal = Config::reference().k2_calibration().map_err(|e| e.to_string())?;
    let at = |nm: f64| k2_effective(nm * 1e-9, &cal).unwrap();
    let exact = at(360.0) == 5.5e-4 && [500.0, 650.0, 1000.0, 1e5].iter().all(|&d| at(d) == 7e-4);
    let grid = logspace(1.0, 2000.0, 1000);
    let values: Vec<f64> = grid.iter().map(|&d| at(d)).collect();
    let monotone = values.windows(2).all(|w| w[1] >= w[0]);
    check(
        exact && monotone,
        format!("k2(360 nm) = {:e}, k2(>=500 nm) = {:e}, monotone over 1000 depths: {monotone}", at(360.0), at(500.0)),
    )
}

fn resonator_q() -> Outcome {
    let cfg = Config::reference();
    let mut q: Vec<f64> = (0..100u64)
        .map(|seed| pipelines::resonator(&cfg, seed).map(|r| r.fit.get("q_int")))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    q.sort_by(f64::total_cmp);
    let median = 0.5 * (q[49] + q[50]);
    let mut clean = cfg.clone();
    clean.noise.snr_db = f64::INFINITY;
    let q0 = pipelines::resonator(&clean, 0).map_err(|e| e.to_string())?.fit.get("q_int");
    check(
        rel(median, 28_000.0) <= 0.05 && rel(q0, 28_000.0) <= 1e-6,
        format!("median Q_int {median:.0} over 100 seeds at 30 dB, noiseless {q0:.4}"),
    )
}

fn drive_sweep_q() -> Outcome {
    let cfg = Config::reference();
    let m = cfg.acoustic_mode.clone();
    let (fwhm_true, q_true) = (m.kappa_int_hz + m.kappa_ext_hz, m.f0_hz / (m.kappa_int_hz + m.kappa_ext_hz));
    let mut clean = cfg.clone();
    clean.noise.snr_db = f64::INFINITY;
    let s0 = pipelines::drive_sweep(&clean, 1).map_err(|e| e.to_string())?;
    let s = pipelines::drive_sweep(&cfg, cfg.noise.seed).map_err(|e| e.to_string())?;
    let e0 = rel(s0.fit.get("fwhm"), fwhm_true).max(rel(s0.q, q_true));
    let e = rel(s.fit.get("fwhm"), fwhm_true).max(rel(s.q, q_true));
    check(
        e0 <= 0.01 && e <= 0.05,
        format!("noiseless Q {:.1} (err {e0:.1e}), 30 dB Q {:.1} (err {e:.1e}), true {q_true:.1}", s0.q, s.q),
    )
}

/// Power series with compensated summation, for |x| <= 10 and n <= 20.
fn bessel_series(n: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut t = (1..=n).fold(1.0, |acc, k| acc * h / k as f64);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for k in 0..200u32 {
        let y = t - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
        t *= -h * h / ((k + 1) as f64 * (k + 1 + n) as f64);
        if t.abs() < 1e-30 {
            break;
        }
    }
    sum
}

fn bessel_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_sum = 0.0f64;
    for _ in 0..100 {
        let d: f64 = rng.random_range(0.0..5.0);
        let s: f64 = (-40..=40).map(|n| bessel_j_signed(n, d).unwrap().powi(2)).sum();
        worst_sum = worst_sum.max((s - 1.0).abs());
    }
    let mut worst_ref = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(0..=20u32);
        let x: f64 = rng.random_range(-10.0..10.0);
        worst_ref = worst_ref.max((bessel_j(n, x).unwrap() - bessel_series(n, x)).abs());
    }
    check(
        worst_sum <= 1e-9 && worst_ref <= 1e-10,
        format!("|sum J_n^2 - 1| <= {worst_sum:.1e}, |J_n - series| <= {worst_ref:.1e}"),
    )
}

fn filter_width_additivity() -> Outcome {
    let (gamma, filt_fwhm) = (643.6e6, 600e6);
    let x = linspace(-60e9, 60e9, 24_001);
    let ideal = Trace::from_fn(x, TraceMeta::new("detuning", "Hz", "PL", ""), |u| lorentzian_density(u, gamma))
        .map_err(|e| e.to_string())?;
    let filt = FilterSpec::new(filt_fwhm, (-15e9, 15e9), 601).map_err(|e| e.to_string())?;
    let out = filtered_spectrum(&ideal, &filt).map_err(|e| e.to_string())?;
    let w = fit_lorentzian(&out, None).map_err(|e| e.to_string())?.get("fwhm");
    check(rel(w, gamma + filt_fwhm) <= 0.01, format!("fitted FWHM {:.2} MHz vs {:.1} MHz", w / 1e6, (gamma + filt_fwhm) / 1e6))
}

fn stark_slope() -> Outcome {
    let cfg = Config::reference();
    let map = pipelines::bias_map(&cfg, None, cfg.noise.seed).map_err(|e| e.to_string())?;
    let fit = pipelines::stark(&map).map_err(|e| e.to_string())?;
    let truth = cfg.emitter.stark_slope_hz_per_v;
    let errs: Vec<f64> = fit.plateaus.iter().map(|p| rel(p.fit.get("slope_hz_per_v"), truth)).collect();
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    let mut edges: Vec<f64> = cfg.emitter.plateaus.iter().flat_map(|p| [p.v_min, p.v_max]).collect();
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let found = edges.iter().all(|&v| fit.discontinuities.iter().any(|d| d.contains(v)));
    check(
        fit.plateaus.len() == cfg.emitter.plateaus.len() && worst <= 0.02 && found && fit.discontinuities.len() == edges.len(),
        format!(
            "{} plateaus, worst slope err {:.2}%, {} discontinuities for edges {edges:?}",
            fit.plateaus.len(),
            worst * 100.0,
            fit.discontinuities.len()
        ),
    )
}

fn slope_agreement() -> Outcome {
    let doped = Config::reference();
    let mut plain = doped.clone();
    plain.layer.sigma_xx = 0.0;
    let rate = doped.layer_loss_rate(doped.sweeps.loss_frequency_hz).map_err(|e| e.to_string())?;
    let gaps: Vec<f64> = doped.delay_line.gaps_um.iter().map(|g| g * 1e-6).collect();
    let mc = pipelines::slope_agreement_monte_carlo(&doped, &plain, &gaps, 1000, doped.noise.seed, sawlab::commands::AGREEMENT_K)
        .map_err(|e| e.to_string())?;
    check(
        mc.pass_rate >= 0.95,
        format!("{}/{} trials agree within {} sigma (layer loss {rate:.2} Hz vs 0)", mc.agree, mc.trials, mc.k),
    )
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn reproduce_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |fig: &str, slot: &str| -> Result<BTreeMap<String, Vec<u8>>, String> {
        let out = tmp.path().join(slot).join(fig);
        let st = Command::new(env!("CARGO_BIN_EXE_sawlab"))
            .args(["reproduce", fig, "--out"])
            .arg(&out)
            .env("SOURCE_DATE_EPOCH", "1700000000")
            .output()
            .map_err(|e| e.to_string())?;
        if !st.status.success() {
            return Err(format!("{fig} exited with {:?}: {}", st.status.code(), String::from_utf8_lossy(&st.stderr)));
        }
        Ok(read_dir(&out))
    };
    let mut bad = Vec::new();
    let mut files = 0;
    for fig in Figure::ALL {
        let a = run(fig.name(), "a")?;
        let b = run(fig.name(), "b")?;
        files += a.len();
        if a != b || a.len() < 2 {
            bad.push(fig.name());
        }
    }
    check(
        bad.is_empty(),
        format!("{} targets, {files} files byte-identical across runs; differing: {bad:?}", Figure::ALL.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("relaxation peak and velocity shift analytics", relaxation_analytics),
        ("layer loss at 1e5 S/m in [80, 120] Hz", loss_at_high_conductivity),
        ("k2 calibration anchors and monotonicity", k2_calibration),
        ("resonator Q_int recovery", resonator_q),
        ("drive-sweep mode FWHM and Q recovery", drive_sweep_q),
        ("Bessel sum rule and reference values", bessel_identities),
        ("filter width additivity", filter_width_additivity),
        ("Stark slope and plateau discontinuities", stark_slope),
        ("delay-line slope agreement Monte Carlo", slope_agreement),
        ("reproduce targets byte-identical", reproduce_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("criterion {:>2} PASS  {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {d} [{secs:.1}s]", i + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
