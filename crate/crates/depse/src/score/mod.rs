//! Score functions for the diffused state.
//!
//! A score model evaluates `grad_{s_t} log p_t(s_t)` for states of one fixed
//! shape. Gradients with respect to complex vectors follow the conjugate
//! (Wirtinger) convention, `0.5 * (d/dx + i d/dy)`, so the score of
//! `N_C(m, v)` is `-(z - m)/v`.

mod gaussian;
mod linear;
pub mod wire;

pub use gaussian::{GaussianPrior, GmmPrior};
pub use linear::{train_dsm, DsmConfig, DsmOutcome, DsmValidationSet, LinearScoreModel};
pub use wire::{ExternalScoreModel, ScoreEndpoint};

use crate::error::Result;
use crate::field::Field;
use crate::schedule::DiffusionSchedule;

pub trait ScoreModel {
    /// `(F, L)` of the fields this model accepts.
    fn shape(&self) -> (usize, usize);

    /// Score field at diffusion time `t`, same shape as `s_t`.
    fn score(&self, s_t: &Field, t: f64, schedule: &DiffusionSchedule) -> Result<Field>;
}
