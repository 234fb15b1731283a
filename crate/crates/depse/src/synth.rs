//! Synthetic priors and signals for simulation and verification runs.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::field::{Field, RealField};
use crate::score::{GaussianPrior, GmmPrior};

/// Moving-average smoothed standard normal vector.
fn smooth_noise<R: Rng + ?Sized>(len: usize, window: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..len)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let half = window / 2;
    (0..len)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(len);
            raw[lo..hi].iter().sum::<f64>() / window as f64
        })
        .collect()
}

/// Mixture of smooth random spectral patterns. `tightness` scales the
/// per-bin variance relative to the squared component magnitude; small
/// values make the prior strongly informative. `scale` multiplies the
/// component magnitudes.
pub fn smooth_gmm_prior<R: Rng + ?Sized>(
    shape: (usize, usize),
    components: usize,
    tightness: f64,
    scale: f64,
    rng: &mut R,
) -> GmmPrior {
    let (f, l) = shape;
    let mut comps = Vec::with_capacity(components);
    for _ in 0..components {
        let fvec = smooth_noise(f, 12, rng);
        let lvec = smooth_noise(l, 8, rng);
        let mut mean = Field::zeros(shape);
        let mut var = RealField::zeros(shape);
        for fi in 0..f {
            for li in 0..l {
                let mag = scale * (0.25 + (fvec[fi] * lvec[li]).abs());
                let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                mean[(fi, li)] = Complex64::from_polar(mag, phase);
                var[(fi, li)] = tightness * (mag * mag + 0.05 * scale * scale);
            }
        }
        comps.push(GaussianPrior::new(mean, var).expect("synthetic prior fields are valid"));
    }
    let w = 1.0 / components as f64;
    GmmPrior::new(vec![w; components], comps).expect("uniform weights")
}

/// Random per-bin Gaussian prior for conjugate-oracle scenarios: variances
/// uniform in `[p_lo, p_hi]`, means circular with matching scale.
pub fn random_gaussian_prior<R: Rng + ?Sized>(
    shape: (usize, usize),
    p_lo: f64,
    p_hi: f64,
    rng: &mut R,
) -> GaussianPrior {
    let var = Array2::from_shape_fn(shape, |_| rng.random_range(p_lo..p_hi));
    let mut mean = Field::zeros(shape);
    for (m, &p) in mean.iter_mut().zip(var.iter()) {
        *m = p.sqrt() * crate::field::standard_complex(rng);
    }
    GaussianPrior::new(mean, var).expect("synthetic prior fields are valid")
}
