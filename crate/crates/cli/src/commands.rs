use crate::manifest::{timestamp, Outputs, RunManifest};
use crate::pipelines::{self as pl, stream, DelayLineRun, MonteCarloSummary};
use crate::{CliError, CliResult};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sawlab_core::acoustic::QFactors;
use sawlab_core::config::Config;
use sawlab_core::estimate::{extract_modulation_index, fit_lorentzian, FitResult, SlopeComparison, StarkFit};
use sawlab_core::io::{
    depth_sweep_to_csv, fit_to_json, layer_sweep_to_csv, map_to_csv, plateaus_to_csv, sparams_to_csv, spectrum_to_csv,
    to_json, write_csv,
};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Default agreement threshold for slope comparisons, in combined standard deviations.
pub const AGREEMENT_K: f64 = 2.0;

#[derive(Debug, Parser)]
#[command(name = "sawlab", version, about = "Forward models and fits for gated quantum dot / SAW cavity devices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "SAWLAB_OUT", default_value = "sawlab-out")]
    pub out: PathBuf,
    /// Noise seed; defaults to `[noise] seed` of the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Device description (TOML).
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Conductivity sweep of the layer loss model and k² versus depth.
    LayerSweep {
        #[command(flatten)]
        common: Common,
        /// Lowest conductivity (S/m); defaults to the config sweep.
        #[arg(long)]
        sigma_min: Option<f64>,
        #[arg(long)]
        sigma_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Delay-line transmission per gap, peak table and loss-per-length fit.
    DelayLine {
        #[command(flatten)]
        common: Common,
        /// Gaps in micrometres; defaults to the config list.
        #[arg(long, value_delimiter = ',')]
        gaps: Option<Vec<f64>>,
        /// Fit peak power against gap.
        #[arg(long)]
        fit: bool,
        /// Second device description to compare slopes against.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Synthesized one-port resonator reflection and its Q-factor fit.
    Resonator {
        #[command(flatten)]
        common: Common,
    },
    /// Emitter spectra: one bias, a bias map, or a drive-frequency sweep.
    QdSpectrum {
        #[command(flatten)]
        common: Common,
        /// Gate bias (V); defaults to `[acoustic_mode] bias_v`.
        #[arg(long, allow_hyphen_values = true)]
        bias: Option<f64>,
        /// SAW drive frequency (Hz); defaults to `[acoustic_mode] drive_frequency_hz`.
        #[arg(long, conflicts_with = "drive_off")]
        drive_freq: Option<f64>,
        #[arg(long)]
        drive_off: bool,
        /// Sweep the drive across the mode, extract δ per point and fit δ².
        #[arg(long, conflicts_with_all = ["map", "drive_off", "drive_freq"])]
        sweep_drive: bool,
        /// Bias map over the configured bias grid, with Stark-slope fit.
        #[arg(long)]
        map: bool,
    },
    /// Regenerate the data behind one figure with the shipped reference config.
    Reproduce {
        figure: Figure,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    #[value(name = "fig2a")]
    Fig2a,
    #[value(name = "fig2b")]
    Fig2b,
    #[value(name = "fig2c")]
    Fig2c,
    #[value(name = "fig2d")]
    Fig2d,
    #[value(name = "fig3a")]
    Fig3a,
    #[value(name = "fig3c")]
    Fig3c,
    #[value(name = "fig3d")]
    Fig3d,
    #[value(name = "figS2a")]
    FigS2a,
    #[value(name = "figS2b")]
    FigS2b,
}

impl Figure {
    pub const ALL: [Figure; 9] = [
        Figure::Fig2a,
        Figure::Fig2b,
        Figure::Fig2c,
        Figure::Fig2d,
        Figure::Fig3a,
        Figure::Fig3c,
        Figure::Fig3d,
        Figure::FigS2a,
        Figure::FigS2b,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
            Figure::Fig2c => "fig2c",
            Figure::Fig2d => "fig2d",
            Figure::Fig3a => "fig3a",
            Figure::Fig3c => "fig3c",
            Figure::Fig3d => "fig3d",
            Figure::FigS2a => "figS2a",
            Figure::FigS2b => "figS2b",
        }
    }
}

fn load(path: &Path) -> CliResult<Config> {
    if !path.exists() {
        return Err(CliError::usage(format!("config file not found: {}", path.display())));
    }
    Config::load(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn manifest(command: String, config_path: String, seed: u64) -> RunManifest {
    RunManifest {
        command,
        config_path,
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: timestamp(),
        outputs: Vec::new(),
    }
}

/// Executes a parsed command; `Ok` carries the manifest written.
pub fn run(cli: Cli) -> CliResult<RunManifest> {
    match cli.command {
        Command::LayerSweep {
            common,
            sigma_min,
            sigma_max,
            points,
        } => {
            let cfg = load(&common.config)?;
            let s = &cfg.sweeps;
            let (lo, hi, n) = (
                sigma_min.unwrap_or(s.sigma_min),
                sigma_max.unwrap_or(s.sigma_max),
                points.unwrap_or(s.sigma_points),
            );
            let seed = common.out.seed.unwrap_or(cfg.noise.seed);
            let out = layer_outputs(&cfg, lo, hi, n)?;
            let cmd = format!("layer-sweep --sigma-min {lo} --sigma-max {hi} --points {n}");
            out.write(&common.out.out, manifest(cmd, common.config.display().to_string(), seed))
        }
        Command::DelayLine {
            common,
            gaps,
            fit,
            compare,
        } => {
            let cfg = load(&common.config)?;
            let other = compare.as_deref().map(load).transpose()?;
            let gaps_um = gaps.unwrap_or_else(|| cfg.delay_line.gaps_um.clone());
            let seed = common.out.seed.unwrap_or(cfg.noise.seed);
            let mut out = Outputs::default();
            let result = delay_line_outputs(&cfg, other.as_ref(), &gaps_um, fit, seed, &mut out);
            let mut cmd = format!(
                "delay-line --gaps {}",
                gaps_um.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(",")
            );
            if fit {
                cmd.push_str(" --fit");
            }
            if let Some(p) = &compare {
                cmd.push_str(&format!(" --compare {}", p.display()));
            }
            result?;
            out.write(&common.out.out, manifest(cmd, common.config.display().to_string(), seed))
        }
        Command::Resonator { common } => {
            let cfg = load(&common.config)?;
            let seed = common.out.seed.unwrap_or(cfg.noise.seed);
            let mut out = Outputs::default();
            let converged = resonator_outputs(&cfg, seed, &mut out)?;
            let m = out.write(
                &common.out.out,
                manifest("resonator".into(), common.config.display().to_string(), seed),
            )?;
            if !converged {
                return Err(CliError::failure("resonator fit did not converge; best-so-far result written"));
            }
            Ok(m)
        }
        Command::QdSpectrum {
            common,
            bias,
            drive_freq,
            drive_off,
            sweep_drive,
            map,
        } => {
            let cfg = load(&common.config)?;
            let seed = common.out.seed.unwrap_or(cfg.noise.seed);
            let bias = bias.unwrap_or(cfg.acoustic_mode.bias_v);
            let drive_hz = if drive_off {
                None
            } else {
                Some(drive_freq.unwrap_or(cfg.acoustic_mode.drive_frequency_hz))
            };
            if let Some(f) = drive_hz {
                let (lo, hi) = pl::drive_band(&cfg);
                if !(f >= lo && f <= hi) {
                    return Err(CliError::usage(format!(
                        "drive frequency {f} Hz is outside the simulated band [{lo}, {hi}] Hz"
                    )));
                }
            }
            let mut out = Outputs::default();
            let cmd = if sweep_drive {
                drive_sweep_outputs(&cfg, seed, &mut out)?;
                "qd-spectrum --sweep-drive".to_string()
            } else if map {
                map_outputs(&cfg, drive_hz, seed, &mut out)?;
                match drive_hz {
                    Some(f) => format!("qd-spectrum --map --drive-freq {f}"),
                    None => "qd-spectrum --map --drive-off".into(),
                }
            } else {
                single_spectrum_outputs(&cfg, bias, drive_hz, seed, &mut out)?;
                match drive_hz {
                    Some(f) => format!("qd-spectrum --bias {bias} --drive-freq {f}"),
                    None => format!("qd-spectrum --bias {bias} --drive-off"),
                }
            };
            out.write(&common.out.out, manifest(cmd, common.config.display().to_string(), seed))
        }
        Command::Reproduce { figure, out: o } => {
            let cfg = Config::reference();
            let seed = o.seed.unwrap_or(cfg.noise.seed);
            let out = reproduce_outputs(figure, &cfg, seed)?;
            out.write(
                &o.out,
                manifest(format!("reproduce {}", figure.name()), "<built-in reference.toml>".into(), seed),
            )
        }
    }
}

/// All files of one `reproduce` target, without writing them.
pub fn reproduce_outputs(figure: Figure, cfg: &Config, seed: u64) -> CliResult<Outputs> {
    let mut out = Outputs::default();
    match figure {
        Figure::FigS2a | Figure::FigS2b => {
            let s = &cfg.sweeps;
            let all = layer_outputs(cfg, s.sigma_min, s.sigma_max, s.sigma_points)?;
            let name = if figure == Figure::FigS2a { "layer_sweep.csv" } else { "depth_sweep.csv" };
            out.add(name, all.get(name).expect("produced above").to_string());
        }
        Figure::Fig2a => {
            let reference = pl::reference_substrate(cfg);
            out.add("s11_doped.csv", sparams_to_csv(&pl::idt_s11_trace(cfg)?)?);
            out.add("s11_reference.csv", sparams_to_csv(&pl::idt_s11_trace(&reference)?)?);
        }
        Figure::Fig2b => {
            let reference = pl::reference_substrate(cfg);
            for (label, c, device) in [("doped", cfg, 0), ("reference", &reference, 1)] {
                let run = &pl::delay_lines(c, &[400e-6], seed, device)?[0];
                out.add(format!("s21_{label}_gap400um.csv"), sparams_to_csv(&pl::s21_trace(run, pl::delay_line_grid(c))?)?);
            }
        }
        Figure::Fig2c => {
            let reference = pl::reference_substrate(cfg);
            let gaps: Vec<f64> = cfg.delay_line.gaps_um.iter().map(|g| g * 1e-6).collect();
            let a = pl::delay_lines(cfg, &gaps, seed, 0)?;
            let b = pl::delay_lines(&reference, &gaps, seed, 1)?;
            out.add("peaks_doped.csv", peak_table(&a)?);
            out.add("peaks_reference.csv", peak_table(&b)?);
            let (fa, fb, cmp) = pl::compare_configs(&a, &b, AGREEMENT_K)?;
            let mc = pl::slope_agreement_monte_carlo(cfg, &reference, &gaps, cfg.noise.monte_carlo_trials, seed, AGREEMENT_K)?;
            out.add("loss_fit_doped.json", fit_to_json(&fa)?);
            out.add("loss_fit_reference.json", fit_to_json(&fb)?);
            out.add("comparison.json", to_json(&ComparisonReport { comparison: cmp, monte_carlo: Some(mc) })?);
            println!("{}", comparison_line(&fa, &fb, &cmp));
            println!("monte carlo: agreement in {}/{} trials", mc.agree, mc.trials);
        }
        Figure::Fig2d => {
            resonator_outputs(cfg, seed, &mut out)?;
        }
        Figure::Fig3a => map_outputs(cfg, None, seed, &mut out)?,
        Figure::Fig3c => map_outputs(cfg, Some(cfg.acoustic_mode.drive_frequency_hz), seed, &mut out)?,
        Figure::Fig3d => drive_sweep_outputs(cfg, seed, &mut out)?,
    }
    Ok(out)
}

pub fn layer_outputs(cfg: &Config, lo: f64, hi: f64, n: usize) -> CliResult<Outputs> {
    if !(lo > 0.0 && lo < hi && hi.is_finite()) || n < 2 {
        return Err(CliError::usage(format!(
            "invalid conductivity range: need 0 < sigma-min < sigma-max and points >= 2, got [{lo}, {hi}], {n}"
        )));
    }
    let mut out = Outputs::default();
    out.add("layer_sweep.csv", layer_sweep_to_csv(&pl::layer_sweep(cfg, lo, hi, n)?)?);
    out.add("depth_sweep.csv", depth_sweep_to_csv(&pl::depth_sweep(cfg)?)?);
    Ok(out)
}

/// Gap in µm for display, rounded to the picometre to hide m → µm round-off.
fn gap_um(gap: f64) -> f64 {
    (gap * 1e12).round() / 1e6
}

fn peak_table(runs: &[DelayLineRun]) -> CliResult<String> {
    Ok(write_csv(
        &["gap_um", "peak_db", "err_db"],
        runs.iter()
            .map(|r| vec![format!("{}", gap_um(r.gap)), format!("{}", r.peak_db), format!("{}", r.err_db)]),
    )?)
}

#[derive(Debug, Serialize)]
struct ComparisonReport {
    comparison: SlopeComparison,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<MonteCarloSummary>,
}

fn comparison_line(a: &FitResult, b: &FitResult, c: &SlopeComparison) -> String {
    let s = "slope_db_per_mm";
    format!(
        "slopes {:.4} ± {:.4} vs {:.4} ± {:.4} dB/mm: difference {:.4} ± {:.4}, {} at {}σ",
        a.get(s),
        a.sigma_of(s),
        b.get(s),
        b.sigma_of(s),
        c.difference,
        c.sigma,
        if c.agree { "agree" } else { "disagree" },
        c.k
    )
}

fn delay_line_outputs(
    cfg: &Config,
    other: Option<&Config>,
    gaps_um: &[f64],
    fit: bool,
    seed: u64,
    out: &mut Outputs,
) -> CliResult<()> {
    if gaps_um.is_empty() {
        return Err(CliError::usage("at least one gap is required"));
    }
    if let Some(g) = gaps_um.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(CliError::usage(format!("gaps must be > 0, got {g}")));
    }
    let gaps: Vec<f64> = gaps_um.iter().map(|g| g * 1e-6).collect();
    let runs = pl::delay_lines(cfg, &gaps, seed, 0)?;
    let grid = pl::delay_line_grid(cfg);
    out.add("s11_idt.csv", sparams_to_csv(&pl::idt_s11_trace(cfg)?)?);
    for r in &runs {
        out.add(format!("s21_gap{}um.csv", gap_um(r.gap)), sparams_to_csv(&pl::s21_trace(r, grid.clone())?)?);
    }
    out.add("peaks.csv", peak_table(&runs)?);
    for r in &runs {
        println!("gap {:>8} um  peak {:>9.4} dB  ± {:.4} dB", gap_um(r.gap), r.peak_db, r.err_db);
    }
    if fit || other.is_some() {
        let f = pl::fit_delay_lines(&runs)?;
        println!(
            "loss per length: {:.4} ± {:.4} dB/mm",
            f.get("slope_db_per_mm"),
            f.sigma_of("slope_db_per_mm")
        );
        out.add("loss_fit.json", fit_to_json(&f)?);
    }
    if let Some(o) = other {
        let b = pl::delay_lines(o, &gaps, seed, 1)?;
        out.add("peaks_compare.csv", peak_table(&b)?);
        let (fa, fb, cmp) = pl::compare_configs(&runs, &b, AGREEMENT_K)?;
        out.add("loss_fit_compare.json", fit_to_json(&fb)?);
        out.add("comparison.json", to_json(&ComparisonReport { comparison: cmp, monte_carlo: None })?);
        println!("{}", comparison_line(&fa, &fb, &cmp));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ResonatorReport<'a> {
    fit: &'a FitResult,
    truth: QFactors,
}

/// Returns whether the fit converged.
fn resonator_outputs(cfg: &Config, seed: u64, out: &mut Outputs) -> CliResult<bool> {
    let r = pl::resonator(cfg, seed)?;
    out.add("s11.csv", sparams_to_csv(&r.measured)?);
    out.add("s11_fit.json", to_json(&ResonatorReport { fit: &r.fit, truth: r.truth })?);
    println!("{:<10} {:>14} {:>12} {:>14}", "", "fitted", "sigma", "configured");
    for (name, truth) in [("q_int", r.truth.q_int), ("q_ext", r.truth.q_ext), ("q_loaded", r.truth.q_loaded)] {
        println!(
            "{:<10} {:>14.1} {:>12.1} {:>14.1}",
            name,
            r.fit.get(name),
            r.fit.sigma_of(name),
            truth
        );
    }
    Ok(r.fit.converged)
}

fn single_spectrum_outputs(cfg: &Config, bias: f64, drive_hz: Option<f64>, seed: u64, out: &mut Outputs) -> CliResult<()> {
    let drive = pl::drive_at(cfg, drive_hz)?;
    let spec = pl::spectrum_at(cfg, bias, drive.as_ref(), seed, stream::SPECTRUM)?;
    out.add("spectrum.csv", spectrum_to_csv(&spec)?);
    if spec.y().iter().all(|&y| y == 0.0) {
        eprintln!("warning: bias {bias} V lies outside every charge plateau; the emitter is dark");
        return Ok(());
    }
    match (drive, drive_hz) {
        (Some(_), Some(f)) => {
            let fit = extract_modulation_index(&spec, f, &cfg.filter()?, cfg.emitter.linewidth_hz)?;
            println!("modulation index δ = {:.5} ± {:.5}", fit.get("delta"), fit.sigma_of("delta"));
            out.add("modulation_fit.json", fit_to_json(&fit)?);
        }
        _ => {
            let fit = fit_lorentzian(&spec, None)?;
            println!("observed linewidth = {:.4} ± {:.4} MHz", fit.get("fwhm") / 1e6, fit.sigma_of("fwhm") / 1e6);
            out.add("linewidth_fit.json", fit_to_json(&fit)?);
        }
    }
    Ok(())
}

fn map_outputs(cfg: &Config, drive_hz: Option<f64>, seed: u64, out: &mut Outputs) -> CliResult<()> {
    let drive = pl::drive_at(cfg, drive_hz)?;
    let map = pl::bias_map(cfg, drive.as_ref(), seed)?;
    out.add("map.csv", map_to_csv(&map)?);
    out.add("plateaus.csv", plateaus_to_csv(&map.plateaus)?);
    let fit: StarkFit = pl::stark(&map)?;
    for p in &fit.plateaus {
        println!(
            "plateau {}: Stark slope {:.5} ± {:.5} GHz/mV over {} rows",
            p.plateau,
            p.fit.get("slope_hz_per_v") * 1e-12,
            p.fit.sigma_of("slope_hz_per_v") * 1e-12,
            p.n_rows
        );
    }
    for s in &fit.skipped {
        eprintln!("notice: skipped {s}");
    }
    out.add("stark_fit.json", to_json(&fit)?);
    Ok(())
}

#[derive(Debug, Serialize)]
struct DriveSweepReport<'a> {
    fit: &'a FitResult,
    q: f64,
    q_sigma: f64,
}

fn drive_sweep_outputs(cfg: &Config, seed: u64, out: &mut Outputs) -> CliResult<()> {
    let s = pl::drive_sweep(cfg, seed)?;
    let rows = (0..s.drive_hz.len()).map(|k| {
        vec![
            format!("{}", s.drive_hz[k]),
            format!("{}", s.delta[k]),
            format!("{}", s.delta_sigma[k]),
            format!("{}", s.delta[k] * s.delta[k]),
        ]
    });
    out.add("delta_sweep.csv", write_csv(&["drive_hz", "delta", "delta_sigma", "delta2"], rows)?);
    out.add(
        "delta2_fit.json",
        to_json(&DriveSweepReport {
            fit: &s.fit,
            q: s.q,
            q_sigma: s.q_sigma,
        })?,
    );
    println!(
        "acoustic linewidth {:.3} ± {:.3} kHz, Q = {:.0} ± {:.0}",
        s.fit.get("fwhm") / 1e3,
        s.fit.sigma_of("fwhm") / 1e3,
        s.q,
        s.q_sigma
    );
    if !s.fit.converged {
        return Err(CliError::failure("δ² Lorentzian fit did not converge"));
    }
    Ok(())
}
