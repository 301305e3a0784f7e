//! Forward models and parameter estimation for gated InAs quantum dots embedded in
//! surface acoustic wave (SAW) cavities.
//!
//! The crate is split by physical subsystem:
//!
//! - [`device`]: substrate and layer descriptions plus SAW kinematics.
//! - [`trace`]: sampled data containers shared by every model and fitter.
//! - [`layer`]: buried conductive layer effects (relaxation loss, coupling versus depth,
//!   CPW mismatch).
//! - [`acoustic`]: IDT, mirror, delay-line and one-port resonator responses.
//! - [`qd`]: charge plateaus, Stark shift, phase-modulation sidebands and filtering.
//! - [`estimate`]: least-squares fitters and seeded synthetic data.
//! - [`io`]: CSV and JSON readers/writers for traces and fit reports.
//! - [`config`]: TOML device description with line-aware validation.

pub mod acoustic;
pub mod config;
pub mod device;
pub mod error;
pub mod estimate;
pub mod interp;
pub mod io;
pub mod layer;
pub mod qd;
pub mod trace;

pub use error::{Error, Result};
