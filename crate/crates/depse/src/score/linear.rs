//! Per-time linear score model and its denoising-score-matching trainer.
//!
//! The model is `S_i(s) = a_i .* s + b_i` per grid time, with a real
//! coefficient field and a complex offset field. For Gaussian data the
//! minimizer of the DSM objective
//!
//! ```text
//! E[ || sigma_t * S(s_t, t) + zeta ||^2 ],   s_t = e^{-gamma t} s_0 + sigma_t zeta,
//! ```
//!
//! is linear, so the trained model can be checked against the closed form
//! `a_i = -1 / (sigma_i^2 + e^{-2 gamma tau_i} p0)`,
//! `b_i = e^{-gamma tau_i} mu0 / (sigma_i^2 + e^{-2 gamma tau_i} p0)`.
//!
//! Training is plain SGD with step decay on a recentred parameterisation
//! `S = a (s_t - e^{-gamma t} s0_bar) + b~` (s0_bar the empirical sample
//! mean), which decorrelates the slope from the intercept; the returned
//! offsets are mapped back to `b = b~ - a e^{-gamma t} s0_bar`. Iterates are
//! tail-averaged, the standard way to reach the noise floor of a stochastic
//! quadratic.

use ndarray::Zip;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{DepseError, Result};
use crate::field::{standard_complex_field, Field, RealField};
use crate::schedule::DiffusionSchedule;
use crate::score::ScoreModel;

#[derive(Debug, Clone)]
pub struct LinearScoreModel {
    /// Grid times, one per (coeff, offset) pair.
    pub taus: Vec<f64>,
    /// Multiplicative coefficient per grid time, real per bin.
    pub coeff: Vec<RealField>,
    /// Additive offset per grid time, complex per bin.
    pub offset: Vec<Field>,
}

impl LinearScoreModel {
    /// Zero-initialized model over the schedule's grid.
    pub fn zeros(shape: (usize, usize), schedule: &DiffusionSchedule) -> Self {
        let n = schedule.n_steps;
        LinearScoreModel {
            taus: schedule.tau.clone(),
            coeff: vec![RealField::zeros(shape); n + 1],
            offset: vec![Field::zeros(shape); n + 1],
        }
    }

    fn time_index(&self, t: f64) -> Result<usize> {
        self.taus
            .iter()
            .position(|&tau| (tau - t).abs() < 1e-9)
            .ok_or(DepseError::TimeOutOfRange {
                t,
                lo: self.taus[0],
                hi: *self.taus.last().unwrap(),
            })
    }
}

impl ScoreModel for LinearScoreModel {
    fn shape(&self) -> (usize, usize) {
        self.coeff[0].dim()
    }

    fn score(&self, s_t: &Field, t: f64, _schedule: &DiffusionSchedule) -> Result<Field> {
        if s_t.dim() != self.shape() {
            return Err(DepseError::ShapeMismatch {
                expected: self.shape(),
                got: s_t.dim(),
            });
        }
        let i = self.time_index(t)?;
        let mut out = Field::zeros(s_t.dim());
        Zip::from(&mut out)
            .and(s_t)
            .and(&self.coeff[i])
            .and(&self.offset[i])
            .for_each(|o, z, &a, b| {
                *o = a * z + b;
            });
        Ok(out)
    }
}

/// Optimizer settings for [`train_dsm`].
#[derive(Debug, Clone)]
pub struct DsmConfig {
    /// Total minibatch updates across all grid times.
    pub updates: usize,
    /// Minibatch size (samples are drawn with replacement).
    pub batch: usize,
    /// Initial learning rate.
    pub lr0: f64,
    /// Updates after which the rate has roughly halved.
    pub lr_decay_updates: f64,
    /// Decay exponent of the `lr0 / (1 + u / decay)^alpha` schedule.
    pub lr_alpha: f64,
    /// Fraction of final updates whose iterates are averaged.
    pub tail_fraction: f64,
    /// Evaluate the held-out validation loss every this many updates.
    pub validation_every: usize,
}

impl Default for DsmConfig {
    fn default() -> Self {
        DsmConfig {
            updates: 80_000,
            batch: 400,
            lr0: 0.3,
            lr_decay_updates: 6_000.0,
            lr_alpha: 0.65,
            tail_fraction: 0.5,
            validation_every: 4_000,
        }
    }
}

/// Frozen evaluation set: (time index, state, noise) triples.
pub struct DsmValidationSet {
    entries: Vec<(usize, Field, Field)>,
}

impl DsmValidationSet {
    pub fn generate<R: Rng + ?Sized>(
        samples: &[Field],
        schedule: &DiffusionSchedule,
        size: usize,
        rng: &mut R,
    ) -> Self {
        let mut entries = Vec::with_capacity(size);
        for _ in 0..size {
            let i = rng.random_range(1..=schedule.n_steps);
            let s0 = &samples[rng.random_range(0..samples.len())];
            let zeta = standard_complex_field(s0.dim(), rng);
            let decay = schedule.decay_at(schedule.tau[i]);
            let sigma = schedule.sigma[i];
            let mut s_t = s0.mapv(|z| z * decay);
            Zip::from(&mut s_t).and(&zeta).for_each(|s, z| {
                *s += sigma * z;
            });
            entries.push((i, s_t, zeta));
        }
        DsmValidationSet { entries }
    }

    /// Mean DSM loss of `model` over the frozen set.
    pub fn loss(&self, model: &LinearScoreModel, schedule: &DiffusionSchedule) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for (i, s_t, zeta) in &self.entries {
            let sigma = schedule.sigma[*i];
            Zip::from(s_t)
                .and(zeta)
                .and(&model.coeff[*i])
                .and(&model.offset[*i])
                .for_each(|s, z, &a, b| {
                    let r = sigma * (a * s + b) + z;
                    total += r.norm_sqr();
                });
            count += s_t.len();
        }
        total / count as f64
    }
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct DsmOutcome {
    pub model: LinearScoreModel,
    pub final_loss: f64,
    /// Validation losses sampled during training, oldest first.
    pub validation_trace: Vec<f64>,
}

/// Fit the per-time linear model by stochastic gradient descent on the DSM
/// objective, drawing the time index uniformly from the grid for every
/// minibatch.
pub fn train_dsm<R: Rng + ?Sized>(
    samples: &[Field],
    schedule: &DiffusionSchedule,
    init: LinearScoreModel,
    config: &DsmConfig,
    rng: &mut R,
) -> Result<DsmOutcome> {
    if samples.len() < 100 {
        return Err(DepseError::InvalidParameter(format!(
            "train_dsm needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    let shape = samples[0].dim();
    if init.shape() != shape {
        return Err(DepseError::ShapeMismatch {
            expected: shape,
            got: init.shape(),
        });
    }
    let n = schedule.n_steps;

    // Empirical mean and variance of the clean samples, for recentring and
    // for learning-rate scaling.
    let mut s0_bar = Field::zeros(shape);
    for s in samples {
        s0_bar += s;
    }
    s0_bar.mapv_inplace(|z| z / samples.len() as f64);
    let mut var0 = RealField::zeros(shape);
    for s in samples {
        Zip::from(&mut var0).and(s).and(&s0_bar).for_each(|v, z, m| {
            *v += (z - m).norm_sqr();
        });
    }
    var0.mapv_inplace(|v| v / samples.len() as f64);

    let mut coeff = init.coeff;
    let mut offset_c: Vec<Field> = vec![Field::zeros(shape); n + 1]; // recentred intercept
    let mut coeff_sum = vec![RealField::zeros(shape); n + 1];
    let mut offset_sum = vec![Field::zeros(shape); n + 1];
    let mut tail_count = vec![0usize; n + 1];
    let tail_start = ((1.0 - config.tail_fraction) * config.updates as f64) as usize;

    let hold_out = DsmValidationSet::generate(samples, schedule, 256, rng);
    let mut validation_trace = Vec::new();

    let mut grad_a = RealField::zeros(shape);
    let mut grad_b = Field::zeros(shape);

    for update in 0..config.updates {
        let i = rng.random_range(1..=n);
        let lr = config.lr0 / (1.0 + update as f64 / config.lr_decay_updates).powf(config.lr_alpha);
        let sigma = schedule.sigma[i];
        let sig2 = sigma * sigma;
        let decay = schedule.decay_at(schedule.tau[i]);

        grad_a.fill(0.0);
        grad_b.fill(Complex64::new(0.0, 0.0));
        for _ in 0..config.batch {
            let s0 = &samples[rng.random_range(0..samples.len())];
            Zip::from(&mut grad_a)
                .and(&mut grad_b)
                .and(s0)
                .and(&s0_bar)
                .and(&coeff[i])
                .and(&offset_c[i])
                .for_each(|ga, gb, z0, m0, &a, b| {
                    let zeta = crate::field::standard_complex(rng);
                    let s_t = decay * z0 + sigma * zeta;
                    let centred = s_t - decay * m0;
                    let r = sigma * (a * centred + b) + zeta;
                    *ga += 2.0 * sigma * (r.conj() * centred).re;
                    *gb += 2.0 * sigma * r;
                });
        }
        let scale = 1.0 / config.batch as f64;
        let mut bad = false;
        Zip::from(&mut coeff[i])
            .and(&mut offset_c[i])
            .and(&grad_a)
            .and(&grad_b)
            .and(&var0)
            .for_each(|a, b, ga, gb, &v0| {
                let second_moment = sig2 + decay * decay * v0;
                *a -= lr * ga * scale / (sig2 * second_moment);
                *b -= lr * gb * scale / sig2;
                if !a.is_finite() || !b.re.is_finite() || !b.im.is_finite() {
                    bad = true;
                }
            });
        if bad {
            return Err(DepseError::DivergentLoss {
                update,
                time_index: i,
                loss: f64::NAN,
            });
        }
        if update >= tail_start {
            coeff_sum[i] = &coeff_sum[i] + &coeff[i];
            offset_sum[i] = &offset_sum[i] + &offset_c[i];
            tail_count[i] += 1;
        }
        if config.validation_every > 0 && update % config.validation_every == 0 {
            let snapshot = finalize(
                &coeff, &offset_c, &coeff_sum, &offset_sum, &tail_count, &s0_bar, schedule,
            );
            validation_trace.push(hold_out.loss(&snapshot, schedule));
        }
    }

    let model = finalize(
        &coeff, &offset_c, &coeff_sum, &offset_sum, &tail_count, &s0_bar, schedule,
    );
    let final_loss = hold_out.loss(&model, schedule);
    if !final_loss.is_finite() {
        return Err(DepseError::DivergentLoss {
            update: config.updates,
            time_index: 0,
            loss: final_loss,
        });
    }
    validation_trace.push(final_loss);
    Ok(DsmOutcome {
        model,
        final_loss,
        validation_trace,
    })
}

/// Average the tail iterates (falling back to the last iterate where no tail
/// samples exist yet) and undo the recentring.
fn finalize(
    coeff: &[RealField],
    offset_c: &[Field],
    coeff_sum: &[RealField],
    offset_sum: &[Field],
    tail_count: &[usize],
    s0_bar: &Field,
    schedule: &DiffusionSchedule,
) -> LinearScoreModel {
    let shape = coeff[0].dim();
    let n = coeff.len() - 1;
    let mut out = LinearScoreModel {
        taus: schedule.tau.clone(),
        coeff: vec![RealField::zeros(shape); n + 1],
        offset: vec![Field::zeros(shape); n + 1],
    };
    for i in 1..=n {
        let (a, b) = if tail_count[i] > 0 {
            let c = tail_count[i] as f64;
            (coeff_sum[i].mapv(|v| v / c), offset_sum[i].mapv(|v| v / c))
        } else {
            (coeff[i].clone(), offset_c[i].clone())
        };
        let decay = schedule.decay_at(schedule.tau[i]);
        let mut b_full = Field::zeros(shape);
        Zip::from(&mut b_full).and(&b).and(&a).and(s0_bar).for_each(|o, bc, &ac, m| {
            *o = bc - ac * decay * m;
        });
        out.coeff[i] = a;
        out.offset[i] = b_full;
    }
    out
}
