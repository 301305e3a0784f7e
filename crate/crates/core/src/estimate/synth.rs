//! Seeded measurement noise.
//!
//! Streams come from ChaCha8 seeded with `seed` and selected by `stream`, so a
//! given `(seed, stream)` yields the same samples on every platform. Monte-Carlo
//! trials use `stream = trial index`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{SParamTrace, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Adds `N(0, scale²)` to every sample.
    GaussianAdditive,
    /// Replaces every sample with a Poisson count of mean `scale·y`.
    PoissonCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub scale: f64,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl NoiseSpec {
    pub fn gaussian(scale: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::GaussianAdditive,
            scale,
            seed,
            stream: 0,
        }
    }

    pub fn poisson(scale: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::PoissonCounts,
            scale,
            seed,
            stream: 0,
        }
    }

    /// Independent stream for Monte-Carlo trial `trial`.
    pub fn for_trial(&self, trial: u64) -> Self {
        Self {
            stream: trial,
            ..*self
        }
    }

    pub fn with_scale(&self, scale: f64) -> Self {
        Self { scale, ..*self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    fn check(&self) -> Result<()> {
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(Error::domain(format!("noise scale must be >= 0, got {}", self.scale)));
        }
        Ok(())
    }
}

/// Noise standard deviation giving `snr_db` relative to a feature of height
/// `amplitude` (amplitude ratio, 20·log10).
pub fn noise_scale_for_snr(amplitude: f64, snr_db: f64) -> f64 {
    amplitude.abs() * 10f64.powf(-snr_db / 20.0)
}

/// Adds noise to a model trace and fills `y_err` with the per-sample standard deviation.
pub fn synthesize(model: &Trace, noise: &NoiseSpec) -> Result<Trace> {
    noise.check()?;
    let mut rng = noise.rng();
    match noise.kind {
        NoiseKind::GaussianAdditive => {
            if noise.scale == 0.0 {
                return Ok(model.clone());
            }
            let y = model
                .y()
                .iter()
                .map(|&v| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v + noise.scale * z
                })
                .collect();
            model.with_y(y, Some(vec![noise.scale; model.len()]))
        }
        NoiseKind::PoissonCounts => {
            if let Some(i) = model.y().iter().position(|v| !(*v >= 0.0)) {
                return Err(Error::domain(format!(
                    "poisson noise needs y >= 0, y[{i}] = {}",
                    model.y()[i]
                )));
            }
            let mut y = Vec::with_capacity(model.len());
            for &v in model.y() {
                let mean = noise.scale * v;
                let count = if mean > 0.0 {
                    Poisson::new(mean)
                        .map_err(|e| Error::domain(format!("poisson mean {mean}: {e}")))?
                        .sample(&mut rng)
                } else {
                    0.0
                };
                y.push(count);
            }
            let err = y.iter().map(|c: &f64| c.max(1.0).sqrt()).collect();
            model.with_y(y, Some(err))
        }
    }
}

/// Complex Gaussian noise, `N(0, scale²)` on the real and imaginary parts.
pub fn synthesize_sparams(model: &SParamTrace, noise: &NoiseSpec) -> Result<SParamTrace> {
    noise.check()?;
    if noise.kind != NoiseKind::GaussianAdditive {
        return Err(Error::domain("S-parameter noise must be gaussian_additive"));
    }
    let mut rng = noise.rng();
    let s = model
        .values()
        .iter()
        .map(|z| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            z + Complex64::new(re, im) * noise.scale
        })
        .collect();
    SParamTrace::new(model.freq().to_vec(), s, model.meta().clone())
}

/// Runs `n` independent trials in parallel, each with its own noise stream.
/// Results come back in trial order.
pub fn run_trials<T, F>(n: usize, base: &NoiseSpec, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, NoiseSpec) -> T + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| f(i, base.for_trial(i as u64)))
        .collect()
}
