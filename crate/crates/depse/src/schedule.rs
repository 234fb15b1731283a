//! Forward SDE schedule and per-step coefficients.
//!
//! The corruption process is the Ornstein-Uhlenbeck variance-exploding SDE
//!
//! ```text
//! ds_t = -gamma * s_t dt + g(t) dw,
//! g(t) = sigma_min * (sigma_max/sigma_min)^t * sqrt(2 ln(sigma_max/sigma_min)),
//! ```
//!
//! whose perturbation kernel is `N_C(e^{-gamma t} s_0, sigma_t^2 I)` with
//!
//! ```text
//! sigma_t^2 = sigma_min^2 * ((sigma_max/sigma_min)^{2t} - e^{-2 gamma t})
//!             * ln(sigma_max/sigma_min) / (gamma + ln(sigma_max/sigma_min)),
//! ```
//!
//! the solution of `d(sigma^2)/dt = g(t)^2 - 2 gamma sigma^2(t)` with
//! `sigma^2(0) = 0`.
//!
//! The reverse solver runs on an equally spaced grid `tau_0 = t_eps, ...,
//! tau_N = T`. The grid starts at `t_eps > 0` rather than 0 so that trained
//! score models are never queried where the kernel degenerates; final states
//! are treated as t=0 quantities.

use rand::Rng;

use crate::error::{DepseError, Result};
use crate::field::{standard_complex, Field};

#[derive(Debug, Clone)]
pub struct DiffusionSchedule {
    pub gamma: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub t_eps: f64,
    pub t_max: f64,
    pub n_steps: usize,
    /// Grid times `tau_0..=tau_N`, strictly increasing.
    pub tau: Vec<f64>,
    pub delta_tau: f64,
    /// `sigma_{tau_i}` for each grid point.
    pub sigma: Vec<f64>,
    /// `g_{tau_i}` for each grid point.
    pub g: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn new(
        gamma: f64,
        sigma_min: f64,
        sigma_max: f64,
        t_eps: f64,
        t_max: f64,
        n_steps: usize,
    ) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(DepseError::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if !(sigma_min.is_finite() && sigma_min > 0.0 && sigma_max.is_finite() && sigma_max > sigma_min) {
            return Err(DepseError::InvalidParameter(format!(
                "need 0 < sigma_min < sigma_max, got ({sigma_min}, {sigma_max})"
            )));
        }
        if !(t_eps.is_finite() && t_eps > 0.0 && t_max.is_finite() && t_max > t_eps) {
            return Err(DepseError::InvalidParameter(format!(
                "need 0 < t_eps < T, got ({t_eps}, {t_max})"
            )));
        }
        if n_steps == 0 {
            return Err(DepseError::InvalidParameter("N must be >= 1".into()));
        }

        let delta_tau = (t_max - t_eps) / n_steps as f64;
        let mut schedule = DiffusionSchedule {
            gamma,
            sigma_min,
            sigma_max,
            t_eps,
            t_max,
            n_steps,
            tau: Vec::with_capacity(n_steps + 1),
            delta_tau,
            sigma: Vec::with_capacity(n_steps + 1),
            g: Vec::with_capacity(n_steps + 1),
        };
        for i in 0..=n_steps {
            let t = t_eps + i as f64 * delta_tau;
            schedule.tau.push(t);
            schedule.sigma.push(schedule.sigma_sq_at(t).sqrt());
            schedule.g.push(schedule.g_at(t));
        }
        Ok(schedule)
    }

    /// Defaults used throughout: gamma 1.5, sigma in [0.05, 0.5], grid
    /// [0.03, 1] with 30 reverse steps.
    pub fn default_params() -> Self {
        Self::new(1.5, 0.05, 0.5, 0.03, 1.0, 30).expect("default schedule parameters are valid")
    }

    fn log_ratio(&self) -> f64 {
        (self.sigma_max / self.sigma_min).ln()
    }

    /// Kernel variance `sigma_t^2` at an arbitrary time.
    pub fn sigma_sq_at(&self, t: f64) -> f64 {
        let k = self.log_ratio();
        self.sigma_min.powi(2) * ((2.0 * k * t).exp() - (-2.0 * self.gamma * t).exp()) * k
            / (self.gamma + k)
    }

    /// Diffusion coefficient `g(t)` at an arbitrary time.
    pub fn g_at(&self, t: f64) -> f64 {
        let k = self.log_ratio();
        self.sigma_min * (k * t).exp() * (2.0 * k).sqrt()
    }

    /// Kernel mean decay `e^{-gamma t}`.
    pub fn decay_at(&self, t: f64) -> f64 {
        (-self.gamma * t).exp()
    }

    /// `(e^{-gamma tau_i}, sigma_{tau_i})` for grid index `i`.
    pub fn kernel_params(&self, i: usize) -> Result<(f64, f64)> {
        if i > self.n_steps {
            return Err(DepseError::IndexOutOfRange {
                index: i,
                max: self.n_steps,
            });
        }
        Ok((self.decay_at(self.tau[i]), self.sigma[i]))
    }

    /// Draw `s_t ~ N_C(e^{-gamma t} s_0, sigma_t^2 I)`.
    pub fn perturb<R: Rng + ?Sized>(&self, s0: &Field, t: f64, rng: &mut R) -> Result<Field> {
        if !(0.0..=self.t_max).contains(&t) {
            return Err(DepseError::TimeOutOfRange {
                t,
                lo: 0.0,
                hi: self.t_max,
            });
        }
        let decay = self.decay_at(t);
        let sigma = self.sigma_sq_at(t).max(0.0).sqrt();
        let mut out = s0.mapv(|z| z * decay);
        for v in out.iter_mut() {
            *v += sigma * standard_complex(rng);
        }
        Ok(out)
    }

    /// Worst absolute residual of the variance ODE over the tabulated
    /// `sigma^2` values, evaluated with a fourth-order finite-difference
    /// stencil at every interior grid point.
    ///
    /// Consumes the stored table (not the closed form), so a corrupted
    /// sigma array is detected.
    pub fn variance_ode_residual(&self) -> f64 {
        variance_ode_residual_of(&self.tau, &self.sigma, &self.g, self.gamma)
    }

    /// Residual tolerance used by the verification suite: `1e-3 * max(sigma^2)`.
    pub fn variance_ode_tolerance(&self) -> f64 {
        let max_s2 = self
            .sigma
            .iter()
            .fold(0.0_f64, |acc, s| acc.max(s * s));
        1e-3 * max_s2
    }
}

/// Fourth-order finite-difference residual of
/// `d(sigma^2)/dt = g^2 - 2 gamma sigma^2` on a tabulated schedule.
pub fn variance_ode_residual_of(tau: &[f64], sigma: &[f64], g: &[f64], gamma: f64) -> f64 {
    let n = tau.len() - 1;
    assert!(n >= 4, "residual stencil needs at least 5 grid points");
    let h = tau[1] - tau[0];
    let s2: Vec<f64> = sigma.iter().map(|s| s * s).collect();
    let mut worst = 0.0_f64;
    for i in 1..n {
        let deriv = if i >= 2 && i + 2 <= n {
            (-s2[i + 2] + 8.0 * s2[i + 1] - 8.0 * s2[i - 1] + s2[i - 2]) / (12.0 * h)
        } else if i == 1 {
            (-3.0 * s2[0] - 10.0 * s2[1] + 18.0 * s2[2] - 6.0 * s2[3] + s2[4]) / (12.0 * h)
        } else {
            // i == n-1: mirrored one-sided stencil
            (3.0 * s2[n] + 10.0 * s2[n - 1] - 18.0 * s2[n - 2] + 6.0 * s2[n - 3] - s2[n - 4])
                / (12.0 * h)
        };
        let rhs = g[i] * g[i] - 2.0 * gamma * s2[i];
        worst = worst.max((deriv - rhs).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::standard_complex_field;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn default_grid_has_31_points() {
        let s = DiffusionSchedule::default_params();
        assert_eq!(s.tau.len(), 31);
        assert!((s.delta_tau - 0.97 / 30.0).abs() < 1e-15);
        assert!((s.tau[0] - 0.03).abs() < 1e-15);
        assert!((s.tau[30] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DiffusionSchedule::new(0.0, 0.05, 0.5, 0.03, 1.0, 30).is_err());
        assert!(DiffusionSchedule::new(1.5, 0.5, 0.05, 0.03, 1.0, 30).is_err());
        assert!(DiffusionSchedule::new(1.5, 0.05, 0.5, 1.0, 0.03, 30).is_err());
        assert!(DiffusionSchedule::new(1.5, 0.05, 0.5, 0.03, 1.0, 0).is_err());
    }

    #[test]
    fn sigma_vanishes_at_zero_time() {
        let s = DiffusionSchedule::default_params();
        assert!(s.sigma_sq_at(0.0).abs() < 1e-18);
        assert!(s.sigma_sq_at(1e-9) < 1e-9);
    }

    /// Independent oracle: integrate d(sigma^2)/dt = g^2 - 2 gamma sigma^2
    /// with explicit Euler at step 1e-5 and compare at t = 0.5.
    #[test]
    fn sigma_matches_euler_integration_oracle() {
        let s = DiffusionSchedule::default_params();
        let dt = 1e-5;
        let mut t = 0.0;
        let mut v = 0.0;
        while t < 0.5 - dt / 2.0 {
            let g = s.g_at(t);
            v += dt * (g * g - 2.0 * s.gamma * v);
            t += dt;
        }
        let closed = s.sigma_sq_at(0.5);
        assert!(
            (v - closed).abs() / closed < 1e-4,
            "euler {v} vs closed form {closed}"
        );
    }

    #[test]
    fn kernel_params_match_table_and_closed_form() {
        let s = DiffusionSchedule::default_params();
        let (d, sg) = s.kernel_params(30).unwrap();
        assert!((d - (-1.5_f64).exp()).abs() < 1e-15); // e^{-1.5} ~= 0.2231
        assert!((sg - s.sigma[30]).abs() < 1e-15);
        assert!(s.kernel_params(31).is_err());
    }

    #[test]
    fn decay_is_strictly_decreasing() {
        let s = DiffusionSchedule::default_params();
        for i in 1..=s.n_steps {
            assert!(s.decay_at(s.tau[i]) < s.decay_at(s.tau[i - 1]));
        }
    }

    #[test]
    fn perturb_at_zero_time_is_identity() {
        let s = DiffusionSchedule::default_params();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let s0 = standard_complex_field((3, 3), &mut rng);
        let out = s.perturb(&s0, 0.0, &mut rng).unwrap();
        for (a, b) in out.iter().zip(s0.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(s.perturb(&s0, 1.5, &mut rng).is_err());
        assert!(s.perturb(&s0, -0.1, &mut rng).is_err());
    }

    /// Monte-Carlo moment oracle: mean and per-bin complex variance of the
    /// kernel at t = 0.5 over 10_000 draws.
    #[test]
    fn perturb_moments_match_kernel() {
        let s = DiffusionSchedule::default_params();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let shape = (2, 2);
        let s0 = Field::from_shape_fn(shape, |(i, j)| {
            Complex64::new(1.0 + i as f64, -0.5 + j as f64)
        });
        let t = 0.5;
        let n = 10_000;
        let mut mean = Field::zeros(shape);
        let mut pow = RealFieldLocal::zeros(shape);
        for _ in 0..n {
            let draw = s.perturb(&s0, t, &mut rng).unwrap();
            mean += &draw;
            for (p, z) in pow.iter_mut().zip(draw.iter()) {
                *p += z.norm_sqr();
            }
        }
        mean.mapv_inplace(|z| z / n as f64);
        let decay = s.decay_at(t);
        let sig2 = s.sigma_sq_at(t);
        // standard error of the complex mean per bin: sqrt(sig2 / n)
        let se = (sig2 / n as f64).sqrt();
        for (m, z0) in mean.iter().zip(s0.iter()) {
            assert!(
                (m - decay * z0).norm() < 4.0 * se,
                "mean {m} vs {} (4se = {})",
                decay * z0,
                4.0 * se
            );
        }
        for ((p, m), _) in pow.iter().zip(mean.iter()).zip(s0.iter()) {
            let var = p / n as f64 - m.norm_sqr();
            assert!(
                (var - sig2).abs() / sig2 < 0.05,
                "variance {var} vs {sig2}"
            );
        }
    }

    /// Two-stage perturbation composes with the exact OU algebra:
    /// diffusing to t1 and then conditionally to t2 matches the one-shot
    /// kernel moments at t2.
    #[test]
    fn perturb_composes_in_two_stages() {
        let s = DiffusionSchedule::default_params();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let shape = (2, 4); // 8 bins
        let s0 = standard_complex_field(shape, &mut rng);
        let (t1, t2) = (0.3, 0.8);
        // conditional stage kernel: decay e^{-gamma (t2-t1)}, variance
        // sigma^2(t2) - e^{-2 gamma (t2-t1)} sigma^2(t1)
        let d12 = (-s.gamma * (t2 - t1)).exp();
        let v12 = s.sigma_sq_at(t2) - d12 * d12 * s.sigma_sq_at(t1);
        assert!(v12 > 0.0);
        let n = 10_000;
        let mut mean = Field::zeros(shape);
        let mut pow = RealFieldLocal::zeros(shape);
        for _ in 0..n {
            let stage1 = s.perturb(&s0, t1, &mut rng).unwrap();
            let mut stage2 = stage1.mapv(|z| z * d12);
            for v in stage2.iter_mut() {
                *v += v12.sqrt() * standard_complex(&mut rng);
            }
            mean += &stage2;
            for (p, z) in pow.iter_mut().zip(stage2.iter()) {
                *p += z.norm_sqr();
            }
        }
        mean.mapv_inplace(|z| z / n as f64);
        let dk = s.decay_at(t2);
        let vk = s.sigma_sq_at(t2);
        for (m, z0) in mean.iter().zip(s0.iter()) {
            assert!((m - dk * z0).norm() < 5.0 * (vk / n as f64).sqrt());
        }
        for (p, m) in pow.iter().zip(mean.iter()) {
            let var = p / n as f64 - m.norm_sqr();
            assert!((var - vk).abs() / vk < 0.05, "var {var} vs {vk}");
        }
    }

    #[test]
    fn ode_residual_below_tolerance_for_default_and_random_configs() {
        let s = DiffusionSchedule::default_params();
        assert!(s.variance_ode_residual() < s.variance_ode_tolerance());

        let mut rng = ChaCha12Rng::seed_from_u64(5);
        use rand::Rng as _;
        for _ in 0..50 {
            let gamma = rng.random_range(0.5..3.0);
            let smin = rng.random_range(0.01..0.1);
            let smax = smin * rng.random_range(2.0..12.0);
            let t_eps = rng.random_range(0.01..0.1);
            let t_max = rng.random_range(0.5..1.5);
            let n = rng.random_range(30..80);
            let sc = DiffusionSchedule::new(gamma, smin, smax, t_eps, t_max, n).unwrap();
            assert!(
                sc.variance_ode_residual() < sc.variance_ode_tolerance(),
                "residual {} over tolerance {} for gamma={gamma} smin={smin} smax={smax}",
                sc.variance_ode_residual(),
                sc.variance_ode_tolerance()
            );
        }
    }

    #[test]
    fn ode_residual_detects_corrupted_table() {
        let mut s = DiffusionSchedule::default_params();
        s.sigma[15] *= 1.05;
        assert!(s.variance_ode_residual() > s.variance_ode_tolerance());
    }

    type RealFieldLocal = ndarray::Array2<f64>;
}
