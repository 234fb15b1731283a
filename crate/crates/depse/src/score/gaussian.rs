//! Analytic score models with tractable marginals.
//!
//! Under the forward kernel `N_C(e^{-gamma t} s_0, sigma_t^2 I)`, a Gaussian
//! prior `s_0 ~ N_C(mu0, diag(p0))` diffuses to the marginal
//! `N_C(e^{-gamma t} mu0, sigma_t^2 + e^{-2 gamma t} p0)` per bin, whose score
//! is exact. Mixtures diffuse component-wise; their score is the
//! responsibility-weighted sum of component scores.

use ndarray::Zip;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{DepseError, Result};
use crate::field::{ensure_same_shape, standard_complex, Field, RealField};
use crate::schedule::DiffusionSchedule;
use crate::score::ScoreModel;

#[derive(Debug, Clone)]
pub struct GaussianPrior {
    pub mean: Field,
    pub variance: RealField,
}

impl GaussianPrior {
    pub fn new(mean: Field, variance: RealField) -> Result<Self> {
        if mean.dim() != variance.dim() {
            return Err(DepseError::ShapeMismatch {
                expected: mean.dim(),
                got: variance.dim(),
            });
        }
        if variance.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(DepseError::InvalidParameter(
                "prior variance must be finite and nonnegative".into(),
            ));
        }
        Ok(GaussianPrior { mean, variance })
    }

    /// Per-bin marginal `(mean, variance)` of the diffused state at time `t`.
    pub fn diffused_moments(&self, t: f64, schedule: &DiffusionSchedule) -> (Field, RealField) {
        let decay = schedule.decay_at(t);
        let sig2 = schedule.sigma_sq_at(t);
        let mean = self.mean.mapv(|m| m * decay);
        let var = self.variance.mapv(|p| sig2 + decay * decay * p);
        (mean, var)
    }

    /// Log density of the diffused marginal at `s_t` (sum over bins).
    pub fn diffused_log_density(&self, s_t: &Field, t: f64, schedule: &DiffusionSchedule) -> f64 {
        let (mean, var) = self.diffused_moments(t, schedule);
        let mut ll = 0.0;
        Zip::from(s_t).and(&mean).and(&var).for_each(|z, m, &v| {
            ll += -(std::f64::consts::PI * v).ln() - (z - m).norm_sqr() / v;
        });
        ll
    }

    /// Draw one field from the prior.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Field {
        let mut out = self.mean.clone();
        Zip::from(&mut out).and(&self.variance).for_each(|z, &p| {
            *z += p.sqrt() * standard_complex(rng);
        });
        out
    }

    /// Exact conditional mean `E[s_0 | s_t]` under this prior.
    pub fn conditional_mean(&self, s_t: &Field, t: f64, schedule: &DiffusionSchedule) -> Field {
        let decay = schedule.decay_at(t);
        let sig2 = schedule.sigma_sq_at(t);
        let mut out = Field::zeros(s_t.dim());
        Zip::from(&mut out)
            .and(s_t)
            .and(&self.mean)
            .and(&self.variance)
            .for_each(|o, z, m, &p| {
                let gain = decay * p / (sig2 + decay * decay * p);
                *o = m + gain * (z - m * decay);
            });
        out
    }
}

impl ScoreModel for GaussianPrior {
    fn shape(&self) -> (usize, usize) {
        self.mean.dim()
    }

    fn score(&self, s_t: &Field, t: f64, schedule: &DiffusionSchedule) -> Result<Field> {
        ensure_same_shape(s_t, &self.mean)?;
        let (mean, var) = self.diffused_moments(t, schedule);
        let mut out = Field::zeros(s_t.dim());
        Zip::from(&mut out)
            .and(s_t)
            .and(&mean)
            .and(&var)
            .for_each(|o, z, m, &v| {
                *o = -(z - m) / v;
            });
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct GmmPrior {
    pub weights: Vec<f64>,
    pub components: Vec<GaussianPrior>,
}

impl GmmPrior {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianPrior>) -> Result<Self> {
        if components.is_empty() {
            return Err(DepseError::EmptyMixture);
        }
        if weights.len() != components.len() {
            return Err(DepseError::InvalidParameter(
                "weights and components must have equal length".into(),
            ));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(DepseError::InvalidParameter(
                "mixture weights must be nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(DepseError::InvalidParameter(format!(
                "mixture weights sum to {sum}, expected 1"
            )));
        }
        let shape = components[0].mean.dim();
        if components.iter().any(|c| c.mean.dim() != shape) {
            return Err(DepseError::InvalidParameter(
                "mixture components must share one shape".into(),
            ));
        }
        Ok(GmmPrior {
            weights,
            components,
        })
    }

    /// Draw one field: pick a component by weight, then draw from it.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Field {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, c) in self.weights.iter().zip(&self.components) {
            acc += w;
            if u <= acc {
                return c.draw(rng);
            }
        }
        self.components.last().unwrap().draw(rng)
    }

    /// Log-sum-exp stabilized responsibilities of the diffused mixture.
    pub fn responsibilities(
        &self,
        s_t: &Field,
        t: f64,
        schedule: &DiffusionSchedule,
    ) -> Vec<f64> {
        let logs: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w.max(f64::MIN_POSITIVE).ln() + c.diffused_log_density(s_t, t, schedule))
            .collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut resp: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = resp.iter().sum();
        for r in resp.iter_mut() {
            *r /= z;
        }
        resp
    }

    pub fn diffused_log_density(&self, s_t: &Field, t: f64, schedule: &DiffusionSchedule) -> f64 {
        let logs: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w.max(f64::MIN_POSITIVE).ln() + c.diffused_log_density(s_t, t, schedule))
            .collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
    }
}

impl ScoreModel for GmmPrior {
    fn shape(&self) -> (usize, usize) {
        self.components[0].mean.dim()
    }

    fn score(&self, s_t: &Field, t: f64, schedule: &DiffusionSchedule) -> Result<Field> {
        ensure_same_shape(s_t, &self.components[0].mean)?;
        let resp = self.responsibilities(s_t, t, schedule);
        let mut out = Field::zeros(s_t.dim());
        for (r, c) in resp.iter().zip(&self.components) {
            if *r == 0.0 {
                continue;
            }
            let part = c.score(s_t, t, schedule)?;
            Zip::from(&mut out).and(&part).for_each(|o, p| {
                *o += Complex64::new(*r, 0.0) * p;
            });
        }
        Ok(out)
    }
}
