//! Posterior-transition diffusion sampling for unsupervised signal denoising.
//!
//! The library models clean spectra with a score-based diffusion prior and
//! removes structured Gaussian noise by sampling the reverse process
//! conditioned on the observation. Three posterior samplers are provided --
//! a score-guidance baseline and two explicit posterior-transition methods
//! (one with an approximate likelihood window, one that rediffuses the
//! observation so the likelihood is exact) -- together with an NMF/EM noise
//! model, an STFT front end, analytic score models for oracle testing, a DSM
//! trainer for per-time linear scores, and a wire protocol for externally
//! served score networks.

pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod metrics;
pub mod nmf;
pub mod report;
pub mod sampler;
pub mod schedule;
pub mod score;
pub mod signal;
pub mod synth;

pub use error::{DepseError, Result};
pub use field::{Field, RealField};
pub use schedule::DiffusionSchedule;

/// Version stamp embedded in reports and the C ABI.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
