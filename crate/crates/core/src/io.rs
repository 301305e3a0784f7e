//! CSV and JSON export/import. Numbers are written with Rust's shortest round-trip
//! formatting, `.` as decimal separator and LF line endings, so reading a file
//! back and writing it again reproduces it byte for byte.

use crate::error::{Error, Result};
use crate::estimate::FitResult;
use crate::layer::Regime;
use crate::qd::{BiasMap, Plateau};
use crate::trace::{SParamTrace, Trace, TraceMeta};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SPARAM_HEADER: [&str; 4] = ["f_hz", "re", "im", "mag_db"];
pub const SPECTRUM_HEADER: [&str; 2] = ["x_hz", "counts"];
pub const MAP_HEADER: [&str; 3] = ["bias_v", "x_hz", "counts"];
pub const PLATEAU_HEADER: [&str; 4] = ["plateau", "v_min", "v_max", "frequency_offset_hz"];
pub const LAYER_SWEEP_HEADER: [&str; 5] = ["sigma_S_per_m", "dv_over_v", "kappa_over_q", "loss_hz", "regime"];
pub const DEPTH_SWEEP_HEADER: [&str; 2] = ["depth_nm", "k2"];

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Writes a header and rows of pre-formatted cells.
pub fn write_csv<S: AsRef<str>>(header: &[&str], rows: impl IntoIterator<Item = Vec<S>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|c| c.as_ref())).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Reads a CSV with exactly `header`, returning the raw cells of every row.
pub fn read_csv(text: &str, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let got: Vec<String> = r.headers().map_err(csv_err)?.iter().map(|s| s.trim().to_string()).collect();
    if got != header {
        return Err(Error::Parse(format!("expected columns {header:?}, found {got:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(rec.iter().map(|s| s.trim().to_string()).collect())
        })
        .collect()
}

fn num(cell: &str, row: usize, col: &str) -> Result<f64> {
    cell.parse::<f64>()
        .map_err(|_| Error::Parse(format!("row {}: column {col}: `{cell}` is not a number", row + 1)))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn mag_db(z: Complex64) -> f64 {
    10.0 * z.norm_sqr().log10()
}

pub fn sparams_to_csv(t: &SParamTrace) -> Result<String> {
    write_csv(
        &SPARAM_HEADER,
        t.freq()
            .iter()
            .zip(t.values())
            .map(|(&f, &z)| vec![fmt(f), fmt(z.re), fmt(z.im), fmt(mag_db(z))]),
    )
}

/// `mag_db` is derived and ignored on input.
pub fn sparams_from_csv(text: &str, meta: TraceMeta) -> Result<SParamTrace> {
    let rows = read_csv(text, &SPARAM_HEADER)?;
    let mut f = Vec::with_capacity(rows.len());
    let mut s = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        f.push(num(&r[0], i, "f_hz")?);
        s.push(Complex64::new(num(&r[1], i, "re")?, num(&r[2], i, "im")?));
    }
    SParamTrace::new(f, s, meta)
}

pub fn spectrum_to_csv(t: &Trace) -> Result<String> {
    write_csv(&SPECTRUM_HEADER, t.x().iter().zip(t.y()).map(|(&x, &y)| vec![fmt(x), fmt(y)]))
}

pub fn spectrum_from_csv(text: &str, meta: TraceMeta) -> Result<Trace> {
    let rows = read_csv(text, &SPECTRUM_HEADER)?;
    let mut x = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        x.push(num(&r[0], i, "x_hz")?);
        y.push(num(&r[1], i, "counts")?);
    }
    Trace::new(x, y, meta)
}

/// Long-format map, one row per (bias, detuning) sample.
pub fn map_to_csv(m: &BiasMap) -> Result<String> {
    let rows = m.bias.iter().zip(&m.counts).flat_map(|(&b, row)| {
        m.detuning
            .iter()
            .zip(row)
            .map(move |(&x, &c)| vec![fmt(b), fmt(x), fmt(c)])
    });
    write_csv(&MAP_HEADER, rows)
}

/// Plateau annotations accompanying a map.
pub fn plateaus_to_csv(plateaus: &[Plateau]) -> Result<String> {
    write_csv(
        &PLATEAU_HEADER,
        plateaus
            .iter()
            .enumerate()
            .map(|(i, p)| vec![i.to_string(), fmt(p.v_min), fmt(p.v_max), fmt(p.frequency_offset)]),
    )
}

/// Parses a long-format map back into `(bias, detuning, counts)`.
pub fn map_from_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let rows = read_csv(text, &MAP_HEADER)?;
    let mut bias: Vec<f64> = Vec::new();
    let mut detuning: Vec<f64> = Vec::new();
    let mut counts: Vec<Vec<f64>> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let (b, x, c) = (num(&r[0], i, "bias_v")?, num(&r[1], i, "x_hz")?, num(&r[2], i, "counts")?);
        if bias.last() != Some(&b) {
            bias.push(b);
            counts.push(Vec::new());
        }
        if bias.len() == 1 {
            detuning.push(x);
        } else if detuning.get(counts.last().map_or(0, |r| r.len())) != Some(&x) {
            return Err(Error::Parse(format!("row {}: detuning grid differs between bias rows", i + 1)));
        }
        counts.last_mut().expect("row pushed above").push(c);
    }
    if counts.iter().any(|r| r.len() != detuning.len()) {
        return Err(Error::Parse("bias rows have unequal lengths".into()));
    }
    Ok((bias, detuning, counts))
}

/// One row of a conductivity sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSweepRow {
    pub sigma: f64,
    pub dv_over_v: f64,
    pub kappa_over_q: f64,
    pub loss_hz: f64,
    pub regime: Regime,
}

pub fn layer_sweep_to_csv(rows: &[LayerSweepRow]) -> Result<String> {
    write_csv(
        &LAYER_SWEEP_HEADER,
        rows.iter().map(|r| {
            vec![
                fmt(r.sigma),
                fmt(r.dv_over_v),
                fmt(r.kappa_over_q),
                fmt(r.loss_hz),
                r.regime.to_string(),
            ]
        }),
    )
}

pub fn layer_sweep_from_csv(text: &str) -> Result<Vec<LayerSweepRow>> {
    read_csv(text, &LAYER_SWEEP_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(LayerSweepRow {
                sigma: num(&r[0], i, "sigma_S_per_m")?,
                dv_over_v: num(&r[1], i, "dv_over_v")?,
                kappa_over_q: num(&r[2], i, "kappa_over_q")?,
                loss_hz: num(&r[3], i, "loss_hz")?,
                regime: r[4].parse()?,
            })
        })
        .collect()
}

/// `(depth in m, k2)` pairs, written with depth in nm.
pub fn depth_sweep_to_csv(rows: &[(f64, f64)]) -> Result<String> {
    write_csv(&DEPTH_SWEEP_HEADER, rows.iter().map(|&(d, k)| vec![fmt(d * 1e9), fmt(k)]))
}

/// Returns `(depth_nm, k2)` pairs as written.
pub fn depth_sweep_from_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    read_csv(text, &DEPTH_SWEEP_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, r)| Ok((num(&r[0], i, "depth_nm")?, num(&r[1], i, "k2")?)))
        .collect()
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

/// JSON trace object: `{meta, x, y, y_err?}`.
pub fn trace_to_json(t: &Trace) -> Result<String> {
    to_json(t)
}

pub fn trace_from_json(text: &str) -> Result<Trace> {
    let t: Trace = from_json(text)?;
    t.validate()?;
    Ok(t)
}

#[derive(Serialize, Deserialize)]
struct SParamJson {
    meta: TraceMeta,
    f_hz: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// JSON S-parameter object: `{meta, f_hz, re, im}`.
pub fn sparams_to_json(t: &SParamTrace) -> Result<String> {
    to_json(&SParamJson {
        meta: t.meta().clone(),
        f_hz: t.freq().to_vec(),
        re: t.values().iter().map(|z| z.re).collect(),
        im: t.values().iter().map(|z| z.im).collect(),
    })
}

pub fn sparams_from_json(text: &str) -> Result<SParamTrace> {
    let j: SParamJson = from_json(text)?;
    if j.re.len() != j.im.len() {
        return Err(Error::LengthMismatch {
            what: "im",
            got: j.im.len(),
            expected: j.re.len(),
        });
    }
    let s = j.re.iter().zip(&j.im).map(|(&a, &b)| Complex64::new(a, b)).collect();
    SParamTrace::new(j.f_hz, s, j.meta)
}

pub fn fit_to_json(r: &FitResult) -> Result<String> {
    to_json(r)
}

pub fn fit_from_json(text: &str) -> Result<FitResult> {
    from_json(text)
}
