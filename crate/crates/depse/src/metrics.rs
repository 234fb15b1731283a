//! Scale-invariant BSS-style evaluation metrics.
//!
//! The estimate is decomposed against an orthogonalized basis: the target
//! direction is the reference, the interference direction is the noise with
//! its projection on the reference removed (Gram-Schmidt), and the artifact
//! term is whatever remains. Orthogonalization is what makes the energies of
//! the three parts add up to the estimate's energy.

use serde::{Deserialize, Serialize};

use crate::error::{DepseError, Result};
use crate::signal::Waveform;

/// Scores are capped at +/- 60 dB so exact matches stay finite.
pub const SCORE_CAP_DB: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BssScores {
    pub si_sdr: f64,
    pub si_sir: f64,
    pub si_sar: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn cap_db(ratio_num: f64, ratio_den: f64) -> f64 {
    if ratio_num <= 0.0 {
        return -SCORE_CAP_DB;
    }
    if ratio_den <= 0.0 {
        return SCORE_CAP_DB;
    }
    (10.0 * (ratio_num / ratio_den).log10()).clamp(-SCORE_CAP_DB, SCORE_CAP_DB)
}

/// Scale-invariant signal-to-distortion ratio in dB.
pub fn si_sdr(reference: &Waveform, estimate: &Waveform) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(DepseError::LengthMismatch(reference.len(), estimate.len()));
    }
    let ref_energy = reference.energy();
    if ref_energy <= 0.0 {
        return Err(DepseError::SilentSignal);
    }
    let alpha = dot(&estimate.samples, &reference.samples) / ref_energy;
    let target_energy = alpha * alpha * ref_energy;
    let residual: f64 = estimate
        .samples
        .iter()
        .zip(reference.samples.iter())
        .map(|(e, r)| {
            let d = e - alpha * r;
            d * d
        })
        .sum();
    Ok(cap_db(target_energy, residual))
}

/// Full decomposition into target, interference, and artifact ratios.
pub fn bss_eval(
    reference: &Waveform,
    noise: &Waveform,
    estimate: &Waveform,
) -> Result<BssScores> {
    if reference.len() != noise.len() || reference.len() != estimate.len() {
        return Err(DepseError::LengthMismatch(reference.len(), estimate.len()));
    }
    let ref_energy = reference.energy();
    let noise_energy = noise.energy();
    if ref_energy <= 0.0 || noise_energy <= 0.0 {
        return Err(DepseError::SilentSignal);
    }
    // Gram-Schmidt: remove the reference component from the noise
    let proj = dot(&noise.samples, &reference.samples) / ref_energy;
    let noise_perp: Vec<f64> = noise
        .samples
        .iter()
        .zip(reference.samples.iter())
        .map(|(n, r)| n - proj * r)
        .collect();
    let perp_energy = dot(&noise_perp, &noise_perp);
    if perp_energy <= 1e-12 * noise_energy {
        return Err(DepseError::CollinearReferences);
    }

    let alpha = dot(&estimate.samples, &reference.samples) / ref_energy;
    let beta = dot(&estimate.samples, &noise_perp) / perp_energy;

    let e_target_energy = alpha * alpha * ref_energy;
    let e_interf_energy = beta * beta * perp_energy;
    let e_artif_energy: f64 = estimate
        .samples
        .iter()
        .zip(reference.samples.iter())
        .zip(noise_perp.iter())
        .map(|((e, r), p)| {
            let d = e - alpha * r - beta * p;
            d * d
        })
        .sum();

    Ok(BssScores {
        si_sdr: cap_db(e_target_energy, e_interf_energy + e_artif_energy),
        si_sir: cap_db(e_target_energy, e_interf_energy),
        si_sar: cap_db(e_target_energy, e_artif_energy),
    })
}
