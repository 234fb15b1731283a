//! Reverse-diffusion samplers: unconditional prior sampling, score-guided
//! baseline, and the two posterior-transition methods.
//!
//! One reverse step from grid index `i` to `i-1` always starts with a
//! Langevin-corrected state
//!
//! ```text
//! h = s_i + eps * score(s_i, tau_i) + sqrt(2 eps) zeta,   eps = (sigma_i r)^2,
//! ```
//!
//! and the Euler-Maruyama backward transition
//!
//! ```text
//! mu_back  = h + gamma h dtau + g_i^2 score(h, tau_i) dtau,
//! var_back = g_i^2 dtau.
//! ```
//!
//! The posterior methods fuse this transition with a per-bin Gaussian view of
//! the observation (product of Gaussians, diagonal covariances throughout):
//! the intractable-likelihood variant reads the raw observation through the
//! uninformative-prior approximation, the tractable-likelihood variant
//! rediffuses the observation to the step's time so the likelihood is exact.

use ndarray::Zip;
use rand::Rng;

use crate::error::{DepseError, Result};
use crate::field::{ensure_same_shape, standard_complex_field, Field, RealField};
use crate::nmf::NmfNoiseModel;
use crate::schedule::DiffusionSchedule;
use crate::score::ScoreModel;

/// Variance floor applied before divisions in the Gaussian fusion.
pub const VAR_FLOOR: f64 = 1e-12;

/// Backward transition `N_C(mean, variance * I)`.
#[derive(Debug, Clone)]
pub struct TransitionParams {
    pub mean: Field,
    pub variance: f64,
}

/// Fused posterior transition `N_C(mean, diag(variance))`.
#[derive(Debug, Clone)]
pub struct PosteriorParams {
    pub mean: Field,
    pub variance: RealField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Prior,
    Guided,
    DepseIl,
    DepseTl,
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub method: Method,
    /// Langevin step ratio `r`; the corrector step size is `(sigma_i r)^2`.
    pub langevin_ratio: f64,
    /// Corrector applications per reverse step.
    pub corrector_steps: usize,
    /// Guidance weights `lambda_i`, indexed `i = 1..=N` as `lambda[i-1]`.
    /// Used by the guided method only.
    pub lambda: Vec<f64>,
}

impl SamplerConfig {
    pub fn new(method: Method) -> Self {
        SamplerConfig {
            method,
            langevin_ratio: 0.5,
            corrector_steps: 1,
            lambda: Vec::new(),
        }
    }

    /// The guided default: `lambda_even` on even step indices, 0 on odd.
    pub fn alternating_lambda(n_steps: usize, lambda_even: f64) -> Vec<f64> {
        (1..=n_steps)
            .map(|i| if i % 2 == 0 { lambda_even } else { 0.0 })
            .collect()
    }

    pub fn validate(&self, n_steps: usize) -> Result<()> {
        if !(self.langevin_ratio.is_finite() && self.langevin_ratio > 0.0) {
            return Err(DepseError::InvalidParameter(format!(
                "langevin ratio must be positive, got {}",
                self.langevin_ratio
            )));
        }
        if self.method == Method::Guided {
            if self.lambda.len() != n_steps {
                return Err(DepseError::InvalidParameter(format!(
                    "lambda schedule has {} entries, expected {n_steps}",
                    self.lambda.len()
                )));
            }
            if self.lambda.iter().any(|&l| !l.is_finite() || l < 0.0) {
                return Err(DepseError::InvalidParameter(
                    "lambda entries must be nonnegative".into(),
                ));
            }
        }
        Ok(())
    }
}

fn check_step_index(i: usize, schedule: &DiffusionSchedule) -> Result<()> {
    if i == 0 || i > schedule.n_steps {
        return Err(DepseError::IndexOutOfRange {
            index: i,
            max: schedule.n_steps,
        });
    }
    Ok(())
}

/// One-step Langevin corrector at grid time `tau_i`.
pub fn langevin_correct<R: Rng + ?Sized>(
    s_i: &Field,
    i: usize,
    score_model: &dyn ScoreModel,
    schedule: &DiffusionSchedule,
    r: f64,
    rng: &mut R,
) -> Result<Field> {
    check_step_index(i, schedule)?;
    let eps = (schedule.sigma[i] * r).powi(2);
    let score = score_model.score(s_i, schedule.tau[i], schedule)?;
    crate::field::ensure_finite(&score, "langevin score")?;
    let noise = standard_complex_field(s_i.dim(), rng);
    let amp = (2.0 * eps).sqrt();
    let mut out = Field::zeros(s_i.dim());
    Zip::from(&mut out)
        .and(s_i)
        .and(&score)
        .and(&noise)
        .for_each(|o, s, sc, z| {
            *o = s + eps * sc + amp * z;
        });
    Ok(out)
}

/// Backward transition parameters, with the corrected state it was built at.
fn prior_transition_inner<R: Rng + ?Sized>(
    s_i: &Field,
    i: usize,
    score_model: &dyn ScoreModel,
    schedule: &DiffusionSchedule,
    r: f64,
    corrector_steps: usize,
    rng: &mut R,
) -> Result<(TransitionParams, Field)> {
    check_step_index(i, schedule)?;
    let mut h = s_i.clone();
    for _ in 0..corrector_steps {
        h = langevin_correct(&h, i, score_model, schedule, r, rng)?;
    }
    let g2 = schedule.g[i] * schedule.g[i];
    let dtau = schedule.delta_tau;
    let score_h = score_model.score(&h, schedule.tau[i], schedule)?;
    let gamma = schedule.gamma;
    let mut mean = Field::zeros(s_i.dim());
    Zip::from(&mut mean).and(&h).and(&score_h).for_each(|m, hv, sc| {
        *m = hv + gamma * hv * dtau + g2 * sc * dtau;
    });
    Ok((
        TransitionParams {
            mean,
            variance: g2 * dtau,
        },
        h,
    ))
}

/// Backward transition distribution of the prior chain at step `i`.
pub fn prior_transition<R: Rng + ?Sized>(
    s_i: &Field,
    i: usize,
    score_model: &dyn ScoreModel,
    schedule: &DiffusionSchedule,
    r: f64,
    corrector_steps: usize,
    rng: &mut R,
) -> Result<TransitionParams> {
    prior_transition_inner(s_i, i, score_model, schedule, r, corrector_steps, rng)
        .map(|(tp, _)| tp)
}

fn draw_isotropic<R: Rng + ?Sized>(mean: &Field, variance: f64, rng: &mut R) -> Field {
    let noise = standard_complex_field(mean.dim(), rng);
    let amp = variance.max(0.0).sqrt();
    let mut out = Field::zeros(mean.dim());
    Zip::from(&mut out).and(mean).and(&noise).for_each(|o, m, z| {
        *o = m + amp * z;
    });
    out
}

fn draw_diagonal<R: Rng + ?Sized>(mean: &Field, variance: &RealField, rng: &mut R) -> Field {
    let noise = standard_complex_field(mean.dim(), rng);
    let mut out = Field::zeros(mean.dim());
    Zip::from(&mut out)
        .and(mean)
        .and(variance)
        .and(&noise)
        .for_each(|o, m, &v, z| {
            *o = m + v.max(0.0).sqrt() * z;
        });
    out
}

/// One unconditional reverse step: transition parameters, then a draw.
pub fn prior_step<R: Rng + ?Sized>(
    s_i: &Field,
    i: usize,
    score_model: &dyn ScoreModel,
    schedule: &DiffusionSchedule,
    r: f64,
    corrector_steps: usize,
    rng: &mut R,
) -> Result<Field> {
    let (tp, _) = prior_transition_inner(s_i, i, score_model, schedule, r, corrector_steps, rng)?;
    Ok(draw_isotropic(&tp.mean, tp.variance, rng))
}

/// Run the full reverse chain from `s_N ~ N_C(0, I)` down to the final state.
pub fn sample_prior<R: Rng + ?Sized>(
    score_model: &dyn ScoreModel,
    schedule: &DiffusionSchedule,
    r: f64,
    corrector_steps: usize,
    rng: &mut R,
) -> Result<Field> {
    let mut s = standard_complex_field(score_model.shape(), rng);
    for i in (1..=schedule.n_steps).rev() {
        s = prior_step(&s, i, score_model, schedule, r, corrector_steps, rng)?;
        if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(DepseError::NonFinite {
                context: "prior chain state",
                step: Some(i),
            });
        }
    }
    Ok(s)
}

/// Posterior-mean estimate of the clean state from `s_i`.
pub fn tweedie_denoise(
    s_i: &Field,
    i: usize,
    score_model: &dyn ScoreModel,
    schedule: &DiffusionSchedule,
) -> Result<Field> {
    check_step_index(i, schedule)?;
    let sig2 = schedule.sigma[i] * schedule.sigma[i];
    let decay = schedule.decay_at(schedule.tau[i]);
    let score = score_model.score(s_i, schedule.tau[i], schedule)?;
    let mut out = Field::zeros(s_i.dim());
    Zip::from(&mut out).and(s_i).and(&score).for_each(|o, s, sc| {
        *o = (s + sig2 * sc) / decay;
    });
    Ok(out)
}

/// Score of the noise-perturbed likelihood under the uninformative-prior
/// approximation, evaluated at `h`:
/// `e^{gamma tau_i} (x - e^{gamma tau_i} h) / (sigma_i^2 e^{2 gamma tau_i} + v)`.
pub fn likelihood_score_uninformative(
    h: &Field,
    x: &Field,
    i: usize,
    noise_var: &RealField,
    schedule: &DiffusionSchedule,
) -> Result<Field> {
    check_step_index(i, schedule)?;
    ensure_same_shape(h, x)?;
    let growth = 1.0 / schedule.decay_at(schedule.tau[i]); // e^{gamma tau_i}
    let sig2 = schedule.sigma[i] * schedule.sigma[i];
    let mut out = Field::zeros(h.dim());
    Zip::from(&mut out)
        .and(h)
        .and(x)
        .and(noise_var)
        .for_each(|o, hv, xv, &v| {
            *o = growth * (xv - growth * hv) / (sig2 * growth * growth + v);
        });
    Ok(out)
}

/// One guided reverse step: the backward transition with the weighted
/// likelihood score added to its drift. `lambda_i = 0` reproduces the
/// unconditional step bit-for-bit under a shared RNG stream.
#[allow(clippy::too_many_arguments)]
pub fn guided_step<R: Rng + ?Sized>(
    s_i: &Field,
    x: &Field,
    i: usize,
    score_model: &dyn ScoreModel,
    noise_var: &RealField,
    lambda_i: f64,
    schedule: &DiffusionSchedule,
    r: f64,
    corrector_steps: usize,
    rng: &mut R,
) -> Result<Field> {
    if lambda_i < 0.0 || !lambda_i.is_finite() {
        return Err(DepseError::InvalidParameter(format!(
            "lambda must be nonnegative, got {lambda_i}"
        )));
    }
    let (mut tp, h) =
        prior_transition_inner(s_i, i, score_model, schedule, r, corrector_steps, rng)?;
    if lambda_i > 0.0 {
        let like = likelihood_score_uninformative(&h, x, i, noise_var, schedule)?;
        let g2dt = schedule.g[i] * schedule.g[i] * schedule.delta_tau;
        Zip::from(&mut tp.mean).and(&like).for_each(|m, l| {
            *m += g2dt * lambda_i * l;
        });
    }
    Ok(draw_isotropic(&tp.mean, tp.variance, rng))
}

/// Product of the backward transition with a per-bin Gaussian observation
/// view. Bins where `obs_var == 0` collapse exactly onto the observation.
pub fn fuse_gaussian(
    transition: &TransitionParams,
    obs_mean: &Field,
    obs_var: &RealField,
) -> Result<PosteriorParams> {
    ensure_same_shape(&transition.mean, obs_mean)?;
    if transition.variance <= 0.0 {
        return Err(DepseError::InvalidParameter(format!(
            "backward variance must be positive, got {}",
            transition.variance
        )));
    }
    if obs_var.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(DepseError::InvalidParameter(
            "observation variance must be finite and nonnegative".into(),
        ));
    }
    let vb = transition.variance.max(VAR_FLOOR);
    let mut mean = Field::zeros(obs_mean.dim());
    let mut var = RealField::zeros(obs_var.dim());
    Zip::from(&mut mean)
        .and(&mut var)
        .and(&transition.mean)
        .and(obs_mean)
        .and(obs_var)
        .for_each(|m, vp, mb, mo, &vo| {
            if vo == 0.0 {
                *m = *mo;
                *vp = 0.0;
            } else {
                let vo = vo.max(VAR_FLOOR);
                let v = vo * vb / (vo + vb);
                *vp = v;
                *m = v * (mb / vb + mo / vo);
            }
        });
    Ok(PosteriorParams { mean, variance: var })
}

/// Posterior transition of the intractable-likelihood method. The raw
/// observation enters through the uninformative-prior window
/// `Sigma_x = sigma_{i-1}^2 / d_{i-1}^2 + v`, which in state space is the
/// Gaussian `N_C(d_{i-1} x, sigma_{i-1}^2 + d_{i-1}^2 v)` per bin.
#[allow(clippy::too_many_arguments)]
pub fn depse_il_params<R: Rng + ?Sized>(
    s_i: &Field,
    x: &Field,
    i: usize,
    score_model: &dyn ScoreModel,
    noise_var: &RealField,
    schedule: &DiffusionSchedule,
    r: f64,
    corrector_steps: usize,
    rng: &mut R,
) -> Result<PosteriorParams> {
    ensure_same_shape(s_i, x)?;
    let (tp, _) = prior_transition_inner(s_i, i, score_model, schedule, r, corrector_steps, rng)?;
    let (d_prev, sigma_prev) = schedule.kernel_params(i - 1)?;
    let sp2 = sigma_prev * sigma_prev;
    let obs_mean = x.mapv(|z| z * d_prev);
    let obs_var = noise_var.mapv(|v| sp2 + d_prev * d_prev * v);
    fuse_gaussian(&tp, &obs_mean, &obs_var)
}

#[allow(clippy::too_many_arguments)]
pub fn depse_il_step<R: Rng + ?Sized>(
    s_i: &Field,
    x: &Field,
    i: usize,
    score_model: &dyn ScoreModel,
    noise_var: &RealField,
    schedule: &DiffusionSchedule,
    r: f64,
    corrector_steps: usize,
    rng: &mut R,
) -> Result<Field> {
    let post = depse_il_params(
        s_i,
        x,
        i,
        score_model,
        noise_var,
        schedule,
        r,
        corrector_steps,
        rng,
    )?;
    Ok(draw_diagonal(&post.mean, &post.variance, rng))
}

/// Fusion of a backward transition with an already-rediffused observation
/// `x_{i-1}`, whose likelihood is exactly `N_C(s_{i-1}, d_{i-1}^2 v)`.
pub fn depse_tl_params(
    transition: &TransitionParams,
    x_prev: &Field,
    i: usize,
    noise_var: &RealField,
    schedule: &DiffusionSchedule,
) -> Result<PosteriorParams> {
    check_step_index(i, schedule)?;
    let (d_prev, _) = schedule.kernel_params(i - 1)?;
    let obs_var = noise_var.mapv(|v| d_prev * d_prev * v);
    fuse_gaussian(transition, x_prev, &obs_var)
}

/// Posterior transition of the tractable-likelihood method: rediffuse the
/// observation to the step's time, `x_{i-1} = d_{i-1} x + sigma_{i-1} zeta`,
/// where the likelihood is exactly `N_C(s_{i-1}, d_{i-1}^2 v)`.
#[allow(clippy::too_many_arguments)]
pub fn depse_tl_step<R: Rng + ?Sized>(
    s_i: &Field,
    x: &Field,
    i: usize,
    score_model: &dyn ScoreModel,
    noise_var: &RealField,
    schedule: &DiffusionSchedule,
    r: f64,
    corrector_steps: usize,
    rng: &mut R,
) -> Result<Field> {
    ensure_same_shape(s_i, x)?;
    let (tp, _) = prior_transition_inner(s_i, i, score_model, schedule, r, corrector_steps, rng)?;
    let (d_prev, sigma_prev) = schedule.kernel_params(i - 1)?;
    let noise = standard_complex_field(x.dim(), rng);
    let mut x_prev = Field::zeros(x.dim());
    Zip::from(&mut x_prev).and(x).and(&noise).for_each(|o, xv, z| {
        *o = d_prev * xv + sigma_prev * z;
    });
    let post = depse_tl_params(&tp, &x_prev, i, noise_var, schedule)?;
    Ok(draw_diagonal(&post.mean, &post.variance, rng))
}

/// How the per-bin noise variance is obtained during enhancement.
#[derive(Debug, Clone)]
pub enum NoiseSpec {
    /// Keep the given field fixed for the whole run.
    Fixed(RealField),
    /// Re-estimate by warm-started factorization of the residual power after
    /// every reverse step.
    Nmf { rank: usize, iters_per_step: usize },
}

/// Full EM-in-the-loop reverse pass.
pub fn enhance<R: Rng + ?Sized>(
    x: &Field,
    schedule: &DiffusionSchedule,
    config: &SamplerConfig,
    score_model: &dyn ScoreModel,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<Field> {
    crate::field::ensure_finite(x, "observation")?;
    if score_model.shape() != x.dim() {
        return Err(DepseError::ShapeMismatch {
            expected: score_model.shape(),
            got: x.dim(),
        });
    }
    config.validate(schedule.n_steps)?;

    let mut nmf_state: Option<NmfNoiseModel> = None;
    let mut noise_var = match noise {
        NoiseSpec::Fixed(v) => {
            if v.dim() != x.dim() {
                return Err(DepseError::ShapeMismatch {
                    expected: x.dim(),
                    got: v.dim(),
                });
            }
            v.clone()
        }
        NoiseSpec::Nmf {
            rank,
            iters_per_step,
        } => {
            if *rank == 0 || *iters_per_step == 0 {
                return Err(DepseError::Config(
                    "nmf rank and iterations must be >= 1".into(),
                ));
            }
            let target = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / (2.0 * x.len() as f64);
            let model = NmfNoiseModel::init(x.dim().0, x.dim().1, *rank, Some(target), rng);
            let v = model.noise_variance();
            nmf_state = Some(model);
            v
        }
    };

    let n = schedule.n_steps;
    let r = config.langevin_ratio;
    let corr = config.corrector_steps;
    let sigma_n = schedule.sigma[n];

    let mut s = match config.method {
        Method::Prior => standard_complex_field(x.dim(), rng),
        Method::Guided | Method::DepseIl => {
            // start at the observation's noise level
            let z = standard_complex_field(x.dim(), rng);
            let mut s = Field::zeros(x.dim());
            Zip::from(&mut s).and(x).and(&z).for_each(|o, xv, zv| {
                *o = xv + sigma_n * zv;
            });
            s
        }
        Method::DepseTl => {
            let d_n = schedule.decay_at(schedule.tau[n]);
            let z1 = standard_complex_field(x.dim(), rng);
            let z2 = standard_complex_field(x.dim(), rng);
            let mut s = Field::zeros(x.dim());
            Zip::from(&mut s).and(x).and(&z1).and(&z2).for_each(|o, xv, a, b| {
                let x_n = d_n * xv + sigma_n * a;
                *o = x_n + sigma_n * b;
            });
            s
        }
    };

    for i in (1..=n).rev() {
        let next = match config.method {
            Method::Prior => prior_step(&s, i, score_model, schedule, r, corr, rng)?,
            Method::Guided => guided_step(
                &s,
                x,
                i,
                score_model,
                &noise_var,
                config.lambda[i - 1],
                schedule,
                r,
                corr,
                rng,
            )?,
            Method::DepseIl => depse_il_step(
                &s, x, i, score_model, &noise_var, schedule, r, corr, rng,
            )?,
            Method::DepseTl => depse_tl_step(
                &s, x, i, score_model, &noise_var, schedule, r, corr, rng,
            )?,
        };
        if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(DepseError::NonFinite {
                context: "posterior chain state",
                step: Some(i),
            });
        }
        if let Some(model) = nmf_state.as_mut() {
            // M-step on the residual of the pre-draw state's clean estimate
            let clean = tweedie_denoise(&s, i, score_model, schedule)?;
            let mut residual = RealField::zeros(x.dim());
            Zip::from(&mut residual).and(x).and(&clean).for_each(|rp, xv, cv| {
                *rp = (xv - cv).norm_sqr();
            });
            let iters = match noise {
                NoiseSpec::Nmf { iters_per_step, .. } => *iters_per_step,
                NoiseSpec::Fixed(_) => unreachable!(),
            };
            model.update(&residual, iters)?;
            noise_var = model.noise_variance();
        }
        s = next;
    }
    Ok(s)
}
