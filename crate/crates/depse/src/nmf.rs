//! Low-rank nonnegative noise-variance model `v = W H`.
//!
//! The M-step of the noise EM fits the residual power spectrogram with
//! multiplicative Itakura-Saito updates,
//!
//! ```text
//! W <- W .* [((WH)^-2 .* V) H'] ./ [(WH)^-1 H'],
//! H <- H .* [W' ((WH)^-2 .* V)] ./ [W' (WH)^-1],
//! ```
//!
//! the minimizer family consistent with a complex Gaussian noise model:
//! maximizing its log-likelihood in (W, H) is exactly minimizing
//! `D_IS(V || WH)`. Entries are floored to keep the factors strictly
//! positive.

use ndarray::Array2;
use rand::Rng;

use crate::error::{DepseError, Result};
use crate::field::RealField;

/// Floor applied to every factor entry.
pub const NMF_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct NmfNoiseModel {
    w: Array2<f64>,
    h: Array2<f64>,
}

impl NmfNoiseModel {
    /// Random uniform(0.5, 1.5) factors scaled so that `mean(WH)` equals
    /// `target_mean` (half the mixture power is the usual choice), or 1 when
    /// no target is given.
    pub fn init<R: Rng + ?Sized>(
        f: usize,
        l: usize,
        k: usize,
        target_mean: Option<f64>,
        rng: &mut R,
    ) -> Self {
        assert!(f >= 1 && l >= 1 && k >= 1, "factor dimensions must be >= 1");
        let mut w = Array2::from_shape_fn((f, k), |_| rng.random_range(0.5..1.5));
        let mut h = Array2::from_shape_fn((k, l), |_| rng.random_range(0.5..1.5));
        let target = target_mean.unwrap_or(1.0).max(NMF_FLOOR);
        let mean = w.dot(&h).mean().unwrap();
        let scale = (target / mean).sqrt();
        w.mapv_inplace(|x| (x * scale).max(NMF_FLOOR));
        h.mapv_inplace(|x| (x * scale).max(NMF_FLOOR));
        NmfNoiseModel { w, h }
    }

    /// Wrap existing factors (warm starts, tests).
    pub fn from_factors(w: Array2<f64>, h: Array2<f64>) -> Result<Self> {
        if w.ncols() != h.nrows() {
            return Err(DepseError::ShapeMismatch {
                expected: (w.ncols(), w.ncols()),
                got: (h.nrows(), h.ncols()),
            });
        }
        if w.iter().chain(h.iter()).any(|x| !x.is_finite() || *x < 0.0) {
            return Err(DepseError::InvalidParameter(
                "factors must be finite and nonnegative".into(),
            ));
        }
        Ok(NmfNoiseModel {
            w: w.mapv(|x| x.max(NMF_FLOOR)),
            h: h.mapv(|x| x.max(NMF_FLOOR)),
        })
    }

    pub fn factors(&self) -> (&Array2<f64>, &Array2<f64>) {
        (&self.w, &self.h)
    }

    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.w.nrows(), self.h.ncols())
    }

    /// The modeled variance field `v = W H`.
    pub fn noise_variance(&self) -> RealField {
        self.w.dot(&self.h)
    }

    /// Run `n_iter` multiplicative update sweeps against the nonnegative
    /// power field `V`.
    pub fn update(&mut self, v: &RealField, n_iter: usize) -> Result<()> {
        if v.dim() != self.shape() {
            return Err(DepseError::ShapeMismatch {
                expected: self.shape(),
                got: v.dim(),
            });
        }
        if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(DepseError::NonFinite {
                context: "nmf residual power",
                step: None,
            });
        }
        for _ in 0..n_iter {
            let wh = self.w.dot(&self.h).mapv(|x| x.max(NMF_FLOOR));
            let ratio = v / &wh.mapv(|x| x * x); // (WH)^-2 .* V
            let num = ratio.dot(&self.h.t());
            let den = wh.mapv(|x| 1.0 / x).dot(&self.h.t());
            ndarray::Zip::from(&mut self.w)
                .and(&num)
                .and(&den)
                .for_each(|w, &n, &d| {
                    *w = (*w * n / d).max(NMF_FLOOR);
                });

            let wh = self.w.dot(&self.h).mapv(|x| x.max(NMF_FLOOR));
            let ratio = v / &wh.mapv(|x| x * x);
            let num = self.w.t().dot(&ratio);
            let den = self.w.t().dot(&wh.mapv(|x| 1.0 / x));
            ndarray::Zip::from(&mut self.h)
                .and(&num)
                .and(&den)
                .for_each(|h, &n, &d| {
                    *h = (*h * n / d).max(NMF_FLOOR);
                });
        }
        Ok(())
    }
}

/// Itakura-Saito divergence `sum(V/WH - log(V/WH) - 1)`, with both sides
/// floored for the logarithm.
pub fn is_divergence(v: &RealField, wh: &RealField) -> f64 {
    let mut total = 0.0;
    ndarray::Zip::from(v).and(wh).for_each(|&a, &b| {
        let p = a.max(NMF_FLOOR);
        let q = b.max(NMF_FLOOR);
        let r = p / q;
        total += r - r.ln() - 1.0;
    });
    total
}
