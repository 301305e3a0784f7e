//! Parameter recovery from traces, and seeded synthetic data.

pub mod lm;
mod lorentzian;
mod modulation;
mod regression;
mod s11;
mod stark;
mod synth;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub use lorentzian::{fit_lorentzian, lorentzian, LorentzianGuess};
pub use modulation::{extract_modulation_index, filtered_comb_model};
pub use regression::{compare_slopes, fit_line, fit_loss_per_length, SlopeComparison};
pub use s11::{fit_s11, fitted_trace as s11_fitted_trace, S11Data};
pub use stark::{fit_stark_slope, track_carrier, Discontinuity, DiscontinuityKind, PlateauSlope, StarkFit};
pub use synth::{noise_scale_for_snr, run_trials, synthesize, synthesize_sparams, NoiseKind, NoiseSpec};

/// Flag attached to results whose optimizer did not converge.
pub const NON_AUTHORITATIVE: &str = "non_authoritative";

/// Outcome of a fit. Serializes as
/// `{model, params:{...}, sigma:{...}, residual_norm, converged, n_iter}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub params: BTreeMap<String, f64>,
    /// One-sigma uncertainties from the linearized covariance.
    pub sigma: BTreeMap<String, f64>,
    pub residual_norm: f64,
    pub converged: bool,
    pub n_iter: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    /// Covariance of the free parameters, ordered as `free_params`.
    #[serde(skip)]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(skip)]
    pub free_params: Vec<String>,
}

impl FitResult {
    pub(crate) fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            params: BTreeMap::new(),
            sigma: BTreeMap::new(),
            residual_norm: 0.0,
            converged: true,
            n_iter: 0,
            flags: Vec::new(),
            covariance: None,
            free_params: Vec::new(),
        }
    }

    pub(crate) fn set(&mut self, name: &str, value: f64, sigma: f64) {
        self.params.insert(name.to_string(), value);
        self.sigma.insert(name.to_string(), sigma);
    }

    pub(crate) fn mark_convergence(&mut self, converged: bool) {
        self.converged = converged;
        if !converged && !self.flags.iter().any(|f| f == NON_AUTHORITATIVE) {
            self.flags.push(NON_AUTHORITATIVE.to_string());
        }
    }

    /// Parameter value; panics on an unknown name.
    pub fn get(&self, name: &str) -> f64 {
        *self
            .params
            .get(name)
            .unwrap_or_else(|| panic!("fit result has no parameter `{name}`"))
    }

    pub fn sigma_of(&self, name: &str) -> f64 {
        self.sigma.get(name).copied().unwrap_or(f64::NAN)
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    /// One-sigma uncertainty of a derived quantity by first-order propagation
    /// through the covariance of the free parameters.
    pub fn propagate(&self, f: impl Fn(&BTreeMap<String, f64>) -> f64) -> f64 {
        let Some(cov) = &self.covariance else {
            return f64::NAN;
        };
        let base = f(&self.params);
        let grad: Vec<f64> = self
            .free_params
            .iter()
            .map(|name| {
                let v = self.params[name];
                let h = 1e-6 * v.abs().max(self.sigma_of(name).abs()).max(1e-300);
                let mut p = self.params.clone();
                p.insert(name.clone(), v + h);
                (f(&p) - base) / h
            })
            .collect();
        let mut var = 0.0;
        for (i, gi) in grad.iter().enumerate() {
            for (j, gj) in grad.iter().enumerate() {
                var += gi * cov[i][j] * gj;
            }
        }
        var.max(0.0).sqrt()
    }
}

pub(crate) fn sigmas_from(cov: Option<&nalgebra::DMatrix<f64>>, n: usize) -> Vec<f64> {
    match cov {
        Some(c) => (0..n).map(|i| c[(i, i)].max(0.0).sqrt()).collect(),
        None => vec![f64::INFINITY; n],
    }
}

/// Mean of the outer `frac` of samples on each side.
pub(crate) fn edge_mean(y: &[f64], frac: f64) -> f64 {
    let k = ((y.len() as f64 * frac).ceil() as usize).clamp(1, y.len() / 2 + 1);
    let s: f64 = y[..k].iter().chain(&y[y.len() - k..]).sum();
    s / (2 * k) as f64
}
