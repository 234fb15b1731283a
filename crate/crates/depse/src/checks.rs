//! Self-verification suite behind the `oracle-check` command.
//!
//! Each check measures a residual against an independent route (finite
//! differences, quadrature, closed forms) and passes when it stays under its
//! tolerance.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::field::{standard_complex, standard_complex_field, Field, RealField};
use crate::nmf::{is_divergence, NmfNoiseModel};
use crate::sampler::{fuse_gaussian, tweedie_denoise, TransitionParams};
use crate::schedule::DiffusionSchedule;
use crate::score::{GaussianPrior, GmmPrior, ScoreModel};
use crate::signal::{istft, stft, StftParams, Waveform};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn pass(&self) -> bool {
        self.residual < self.tolerance
    }
}

/// Run the whole suite. All randomness is derived from `seed`.
pub fn run_all(schedule: &DiffusionSchedule, seed: u64) -> Vec<CheckOutcome> {
    vec![
        check_ode_residual(schedule),
        check_ode_residual_random_configs(seed),
        check_gaussian_score_fd(schedule, seed),
        check_gmm_score_fd(schedule, seed),
        check_fusion_identities(seed),
        check_tweedie_exactness(schedule, seed),
        check_stft_round_trip(seed),
        check_nmf_monotonicity(seed),
    ]
}

pub fn check_ode_residual(schedule: &DiffusionSchedule) -> CheckOutcome {
    CheckOutcome {
        name: "schedule-ode-residual".into(),
        residual: schedule.variance_ode_residual(),
        tolerance: schedule.variance_ode_tolerance(),
    }
}

pub fn check_ode_residual_random_configs(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xA4);
    let mut worst_ratio = 0.0_f64;
    for _ in 0..5 {
        let gamma = rng.random_range(0.5..3.0);
        let smin = rng.random_range(0.01..0.1);
        let smax = smin * rng.random_range(2.0..12.0);
        let t_eps = rng.random_range(0.01..0.1);
        let t_max = rng.random_range(0.5..1.5);
        let n = rng.random_range(30..80);
        let sc = DiffusionSchedule::new(gamma, smin, smax, t_eps, t_max, n)
            .expect("randomly drawn schedule parameters are valid");
        worst_ratio = worst_ratio.max(sc.variance_ode_residual() / sc.variance_ode_tolerance());
    }
    CheckOutcome {
        name: "schedule-ode-residual-random".into(),
        residual: worst_ratio,
        tolerance: 1.0,
    }
}

/// Conjugate-convention central differences of a log density.
fn fd_score<F: Fn(&Field) -> f64>(log_density: F, s: &Field, h: f64) -> Field {
    let mut out = Field::zeros(s.dim());
    let (_, cols) = s.dim();
    for idx in 0..s.len() {
        let pos = (idx / cols, idx % cols);
        let mut plus = s.clone();
        let mut minus = s.clone();
        plus[pos] += Complex64::new(h, 0.0);
        minus[pos] -= Complex64::new(h, 0.0);
        let dx = (log_density(&plus) - log_density(&minus)) / (2.0 * h);
        let mut plus = s.clone();
        let mut minus = s.clone();
        plus[pos] += Complex64::new(0.0, h);
        minus[pos] -= Complex64::new(0.0, h);
        let dy = (log_density(&plus) - log_density(&minus)) / (2.0 * h);
        out[pos] = Complex64::new(dx / 2.0, dy / 2.0);
    }
    out
}

fn max_rel_err(a: &Field, b: &Field) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm() / x.norm().max(1e-9))
        .fold(0.0, f64::max)
}

pub fn check_gaussian_score_fd(schedule: &DiffusionSchedule, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xB7);
    let mut worst = 0.0_f64;
    for _ in 0..4 {
        let mean = standard_complex_field((2, 2), &mut rng);
        let var = Array2::from_shape_fn((2, 2), |_| rng.random_range(0.3..1.5));
        let prior = GaussianPrior::new(mean, var).unwrap();
        let i = rng.random_range(1..=schedule.n_steps);
        let t = schedule.tau[i];
        let s_t = standard_complex_field((2, 2), &mut rng);
        let score = prior.score(&s_t, t, schedule).unwrap();
        let fd = fd_score(|s| prior.diffused_log_density(s, t, schedule), &s_t, 1e-4);
        worst = worst.max(max_rel_err(&score, &fd));
    }
    CheckOutcome {
        name: "gaussian-score-finite-difference".into(),
        residual: worst,
        tolerance: 1e-4,
    }
}

pub fn check_gmm_score_fd(schedule: &DiffusionSchedule, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xC1);
    let mut worst = 0.0_f64;
    for _ in 0..3 {
        let comps: Vec<GaussianPrior> = (0..3)
            .map(|_| {
                GaussianPrior::new(
                    standard_complex_field((2, 2), &mut rng),
                    Array2::from_shape_fn((2, 2), |_| rng.random_range(0.2..1.2)),
                )
                .unwrap()
            })
            .collect();
        let gmm = GmmPrior::new(vec![0.5, 0.3, 0.2], comps).unwrap();
        let i = rng.random_range(1..=schedule.n_steps);
        let t = schedule.tau[i];
        let s_t = standard_complex_field((2, 2), &mut rng);
        let score = gmm.score(&s_t, t, schedule).unwrap();
        let fd = fd_score(|s| gmm.diffused_log_density(s, t, schedule), &s_t, 1e-4);
        worst = worst.max(max_rel_err(&score, &fd));
    }
    CheckOutcome {
        name: "gmm-score-finite-difference".into(),
        residual: worst,
        tolerance: 1e-4,
    }
}

pub fn check_fusion_identities(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xD9);
    let mut worst = 0.0_f64;
    // precision additivity, exact
    for _ in 0..1_000 {
        let vb: f64 = rng.random_range(1e-6..10.0);
        let vo: f64 = rng.random_range(1e-6..10.0);
        let tp = TransitionParams {
            mean: Field::from_elem((1, 1), standard_complex(&mut rng)),
            variance: vb,
        };
        let post = fuse_gaussian(
            &tp,
            &Field::from_elem((1, 1), standard_complex(&mut rng)),
            &RealField::from_elem((1, 1), vo),
        )
        .unwrap();
        let lhs = 1.0 / post.variance[(0, 0)];
        let rhs = 1.0 / vb + 1.0 / vo;
        worst = worst.max(((lhs - rhs) / rhs).abs() / 1e-12);
    }
    // density-product quadrature, 1e-8
    for _ in 0..20 {
        let m1 = standard_complex(&mut rng) * 2.0;
        let v1: f64 = rng.random_range(0.2..2.0);
        let m2 = standard_complex(&mut rng) * 2.0;
        let v2: f64 = rng.random_range(0.2..2.0);
        let tp = TransitionParams {
            mean: Field::from_elem((1, 1), m1),
            variance: v1,
        };
        let post = fuse_gaussian(
            &tp,
            &Field::from_elem((1, 1), m2),
            &RealField::from_elem((1, 1), v2),
        )
        .unwrap();
        let centre = (m1 + m2) / 2.0;
        let span = 8.0 * v1.min(v2).sqrt() + (m1 - m2).norm();
        let steps = 200;
        let h = 2.0 * span / steps as f64;
        let mut w_sum = 0.0;
        let mut mean_acc = Complex64::default();
        for a in 0..=steps {
            for b in 0..=steps {
                let z = centre + Complex64::new(-span + a as f64 * h, -span + b as f64 * h);
                let w = (-(z - m1).norm_sqr() / v1 - (z - m2).norm_sqr() / v2).exp();
                w_sum += w;
                mean_acc += w * z;
            }
        }
        let mean = mean_acc / w_sum;
        worst = worst.max((post.mean[(0, 0)] - mean).norm() / 1e-8);
    }
    CheckOutcome {
        name: "gaussian-fusion-identities".into(),
        residual: worst,
        tolerance: 1.0,
    }
}

pub fn check_tweedie_exactness(schedule: &DiffusionSchedule, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xE3);
    let mean = standard_complex_field((2, 2), &mut rng);
    let var = Array2::from_shape_fn((2, 2), |_| rng.random_range(0.2..1.5));
    let prior = GaussianPrior::new(mean, var).unwrap();
    let mut worst = 0.0_f64;
    for i in 1..=schedule.n_steps {
        let s_t = standard_complex_field((2, 2), &mut rng);
        let tw = tweedie_denoise(&s_t, i, &prior, schedule).unwrap();
        let exact = prior.conditional_mean(&s_t, schedule.tau[i], schedule);
        for (a, b) in tw.iter().zip(exact.iter()) {
            worst = worst.max((a - b).norm() / (1.0 + b.norm()));
        }
    }
    CheckOutcome {
        name: "tweedie-conditional-mean".into(),
        residual: worst,
        tolerance: 1e-10,
    }
}

pub fn check_stft_round_trip(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xF1);
    let params = StftParams::default();
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let w = Waveform::new(
            (0..16_000)
                .map(|_| rng.random_range(-0.8..0.8))
                .collect::<Vec<f64>>(),
        )
        .unwrap();
        let spec = stft(&w, &params).unwrap();
        let back = istft(&spec, w.len()).unwrap();
        let err: f64 = w
            .samples
            .iter()
            .zip(back.samples.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(err / w.energy().sqrt());
    }
    CheckOutcome {
        name: "stft-round-trip".into(),
        residual: worst,
        tolerance: 1e-6,
    }
}

pub fn check_nmf_monotonicity(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xF7);
    let mut worst_increase = 0.0_f64;
    for _ in 0..20 {
        let f = rng.random_range(6..16);
        let l = rng.random_range(6..16);
        let k = rng.random_range(1..5);
        let v = RealField::from_shape_fn((f, l), |_| rng.random_range(0.0..4.0) + 1e-6);
        let mut model = NmfNoiseModel::init(f, l, k, Some(v.mean().unwrap()), &mut rng);
        let mut prev = is_divergence(&v, &model.noise_variance());
        for _ in 0..100 {
            model.update(&v, 1).unwrap();
            let cur = is_divergence(&v, &model.noise_variance());
            worst_increase = worst_increase.max(cur - prev);
            prev = cur;
        }
    }
    CheckOutcome {
        name: "nmf-is-divergence-monotone".into(),
        residual: worst_increase.max(0.0),
        tolerance: 1e-10,
    }
}
