//! Property tests for the algebraic invariants.


use num_complex::Complex64;
use proptest::prelude::*;

use depse::field::{Field, RealField};
use depse::metrics::{bss_eval, si_sdr};
use depse::nmf::NmfNoiseModel;
use depse::sampler::{fuse_gaussian, TransitionParams};
use depse::signal::{istft, stft, StftParams, Waveform};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// 1/var_post = 1/var_back + 1/obs_var, and the posterior variance never
    /// exceeds either input variance.
    #[test]
    fn fusion_precision_additivity(
        vb in 1e-6f64..10.0,
        vo in 1e-6f64..10.0,
        mb_re in -5.0f64..5.0, mb_im in -5.0f64..5.0,
        mo_re in -5.0f64..5.0, mo_im in -5.0f64..5.0,
    ) {
        let tp = TransitionParams {
            mean: Field::from_elem((1, 1), Complex64::new(mb_re, mb_im)),
            variance: vb,
        };
        let post = fuse_gaussian(
            &tp,
            &Field::from_elem((1, 1), Complex64::new(mo_re, mo_im)),
            &RealField::from_elem((1, 1), vo),
        ).unwrap();
        let vp = post.variance[(0, 0)];
        let lhs = 1.0 / vp;
        let rhs = 1.0 / vb + 1.0 / vo;
        prop_assert!(((lhs - rhs) / rhs).abs() < 1e-12);
        prop_assert!(vp <= vb.min(vo) * (1.0 + 1e-15));
        // the fused mean lies between the two input means
        let m = post.mean[(0, 0)];
        let d_backward = (m - tp.mean[(0, 0)]).norm();
        let d_total = (Complex64::new(mb_re, mb_im) - Complex64::new(mo_re, mo_im)).norm();
        prop_assert!(d_backward <= d_total * (1.0 + 1e-9));
    }

    /// Inflating the observation variance moves the fused mean toward the
    /// backward-transition mean.
    #[test]
    fn fusion_trust_is_monotone(
        vb in 1e-3f64..5.0,
        vo in 1e-3f64..5.0,
        inflation in 1.5f64..100.0,
        mo_re in -5.0f64..5.0,
    ) {
        let mb = Complex64::new(1.0, -0.5);
        let mo = Complex64::new(mo_re, 2.0);
        let tp = TransitionParams { mean: Field::from_elem((1, 1), mb), variance: vb };
        let tight = fuse_gaussian(&tp, &Field::from_elem((1, 1), mo),
            &RealField::from_elem((1, 1), vo)).unwrap();
        let loose = fuse_gaussian(&tp, &Field::from_elem((1, 1), mo),
            &RealField::from_elem((1, 1), vo * inflation)).unwrap();
        prop_assert!(
            (loose.mean[(0, 0)] - mb).norm() <= (tight.mean[(0, 0)] - mb).norm() * (1.0 + 1e-12)
        );
    }

    /// Rescaling the NMF factors in opposite directions leaves the variance
    /// field unchanged.
    #[test]
    fn nmf_scale_ambiguity(seed in 0u64..1000, c in 0.01f64..100.0) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let model = NmfNoiseModel::init(6, 5, 2, Some(1.0), &mut rng);
        let (w, h) = model.factors();
        let rescaled = NmfNoiseModel::from_factors(
            w.mapv(|x| x * c),
            h.mapv(|x| x / c),
        ).unwrap();
        let a = model.noise_variance();
        let b = rescaled.noise_variance();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0), "{x} vs {y}");
        }
    }

    /// All three scores are invariant under positive rescaling of the
    /// estimate.
    #[test]
    fn metrics_scale_invariance(seed in 0u64..1000, c in 1e-3f64..1e3) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let len = 400;
        let reference = Waveform::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let noise = Waveform::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let est = Waveform::new(
            reference.samples.iter().zip(noise.samples.iter())
                .map(|(a, b)| a + 0.5 * b).collect::<Vec<f64>>()
        ).unwrap();
        let scaled = Waveform::new(est.samples.iter().map(|x| c * x).collect::<Vec<f64>>()).unwrap();
        let a = bss_eval(&reference, &noise, &est).unwrap();
        let b = bss_eval(&reference, &noise, &scaled).unwrap();
        prop_assert!((a.si_sdr - b.si_sdr).abs() < 1e-9);
        prop_assert!((a.si_sir - b.si_sir).abs() < 1e-9);
        prop_assert!((a.si_sar - b.si_sar).abs() < 1e-9);
        prop_assert!((si_sdr(&reference, &est).unwrap() - si_sdr(&reference, &scaled).unwrap()).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Analysis followed by synthesis reconstructs arbitrary signals of at
    /// least two windows.
    #[test]
    fn stft_round_trip_identity(seed in 0u64..1000, len in 1020usize..6000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let params = StftParams::default();
        let w = Waveform::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let spec = stft(&w, &params).unwrap();
        let back = istft(&spec, w.len()).unwrap();
        let err: f64 = w.samples.iter().zip(back.samples.iter())
            .map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!(err / w.energy().sqrt() < 1e-6);
    }
}
