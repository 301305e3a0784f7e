//! Sampled data containers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis labels, units and provenance carried alongside every trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub x_label: String,
    pub x_unit: String,
    pub y_label: String,
    pub y_unit: String,
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TraceMeta {
    pub fn new(
        x_label: impl Into<String>,
        x_unit: impl Into<String>,
        y_label: impl Into<String>,
        y_unit: impl Into<String>,
    ) -> Self {
        Self {
            x_label: x_label.into(),
            x_unit: x_unit.into(),
            y_label: y_label.into(),
            y_unit: y_unit.into(),
            ..Default::default()
        }
    }

    pub fn with_provenance(mut self, p: impl Into<String>) -> Self {
        self.provenance = p.into();
        self
    }
}

pub(crate) fn check_increasing(x: &[f64]) -> Result<()> {
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonMonotone { index: i });
    }
    match x.windows(2).position(|w| w[1] <= w[0]) {
        Some(i) => Err(Error::NonMonotone { index: i + 1 }),
        None => Ok(()),
    }
}

/// Real-valued samples `(x, y[, σ_y])` with strictly increasing `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    meta: TraceMeta,
    x: Vec<f64>,
    y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y_err: Option<Vec<f64>>,
}

impl Trace {
    pub fn new(x: Vec<f64>, y: Vec<f64>, meta: TraceMeta) -> Result<Self> {
        let t = Self {
            meta,
            x,
            y,
            y_err: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_errors(x: Vec<f64>, y: Vec<f64>, y_err: Vec<f64>, meta: TraceMeta) -> Result<Self> {
        let t = Self {
            meta,
            x,
            y,
            y_err: Some(y_err),
        };
        t.validate()?;
        Ok(t)
    }

    /// Builds a trace by evaluating `f` on `x`.
    pub fn from_fn(x: Vec<f64>, meta: TraceMeta, f: impl Fn(f64) -> f64) -> Result<Self> {
        let y = x.iter().map(|&v| f(v)).collect();
        Self::new(x, y, meta)
    }

    /// Re-checks every invariant; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        check_increasing(&self.x)?;
        if self.y.len() != self.x.len() {
            return Err(Error::LengthMismatch {
                what: "y",
                got: self.y.len(),
                expected: self.x.len(),
            });
        }
        if let Some(e) = &self.y_err {
            if e.len() != self.x.len() {
                return Err(Error::LengthMismatch {
                    what: "y_err",
                    got: e.len(),
                    expected: self.x.len(),
                });
            }
            if let Some(i) = e.iter().position(|v| !(*v >= 0.0)) {
                return Err(Error::domain(format!(
                    "y_err[{i}] = {} is negative or NaN",
                    e[i]
                )));
            }
        }
        Ok(())
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn y_err(&self) -> Option<&[f64]> {
        self.y_err.as_deref()
    }

    pub fn meta(&self) -> &TraceMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut TraceMeta {
        &mut self.meta
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Same axis, new ordinate values.
    pub fn with_y(&self, y: Vec<f64>, y_err: Option<Vec<f64>>) -> Result<Self> {
        let t = Self {
            meta: self.meta.clone(),
            x: self.x.clone(),
            y,
            y_err,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn map_y(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            meta: self.meta.clone(),
            x: self.x.clone(),
            y: self.y.iter().map(|&v| f(v)).collect(),
            y_err: None,
        }
    }

    /// Trapezoidal integral of `y` over `x`.
    pub fn integral(&self) -> f64 {
        self.x
            .windows(2)
            .zip(self.y.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>, TraceMeta) {
        (self.x, self.y, self.y_err, self.meta)
    }
}

/// Complex S-parameter samples on a strictly increasing frequency axis (Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct SParamTrace {
    meta: TraceMeta,
    f: Vec<f64>,
    s: Vec<Complex64>,
}

impl SParamTrace {
    pub fn new(f: Vec<f64>, s: Vec<Complex64>, meta: TraceMeta) -> Result<Self> {
        check_increasing(&f)?;
        if s.len() != f.len() {
            return Err(Error::LengthMismatch {
                what: "s",
                got: s.len(),
                expected: f.len(),
            });
        }
        Ok(Self { meta, f, s })
    }

    pub fn from_fn(f: Vec<f64>, meta: TraceMeta, model: impl Fn(f64) -> Complex64) -> Result<Self> {
        let s = f.iter().map(|&v| model(v)).collect();
        Self::new(f, s, meta)
    }

    pub fn freq(&self) -> &[f64] {
        &self.f
    }

    pub fn values(&self) -> &[Complex64] {
        &self.s
    }

    pub fn meta(&self) -> &TraceMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    /// `|S|²` as a real trace.
    pub fn power(&self) -> Trace {
        let mut meta = self.meta.clone();
        meta.y_label = format!("|{}|^2", self.meta.y_label);
        meta.y_unit = String::new();
        Trace {
            meta,
            x: self.f.clone(),
            y: self.s.iter().map(|z| z.norm_sqr()).collect(),
            y_err: None,
        }
    }
}

/// Uniform grid of `n` points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// Logarithmic grid of `n` points from `lo` to `hi` inclusive (both > 0).
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    linspace(a, b, n)
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                10f64.powf(e)
            }
        })
        .collect()
}
