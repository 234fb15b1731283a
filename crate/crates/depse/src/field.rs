//! Complex-valued time-frequency fields and circularly symmetric noise.
//!
//! A field is an `F x L` array of complex bins. Complex Gaussians follow the
//! circular convention: a draw with complex variance `v` has independent real
//! and imaginary parts of variance `v/2`, so `E|z|^2 = v`.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{DepseError, Result};

/// Complex spectrogram data, frequency bins by time frames.
pub type Field = Array2<Complex64>;

/// Nonnegative per-bin field (variances, powers).
pub type RealField = Array2<f64>;

/// One draw from the standard circular complex Gaussian, `E|z|^2 = 1`.
///
/// Real part first, then imaginary, so a seeded stream is reproducible.
pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re / std::f64::consts::SQRT_2, im / std::f64::consts::SQRT_2)
}

/// An `F x L` field of i.i.d. standard circular complex Gaussians,
/// drawn in row-major order.
pub fn standard_complex_field<R: Rng + ?Sized>(shape: (usize, usize), rng: &mut R) -> Field {
    let mut out = Field::zeros(shape);
    for v in out.iter_mut() {
        *v = standard_complex(rng);
    }
    out
}

pub fn ensure_same_shape(a: &Field, b: &Field) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(DepseError::ShapeMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

pub fn ensure_finite(field: &Field, context: &'static str) -> Result<()> {
    if field.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(DepseError::NonFinite {
            context,
            step: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn standard_complex_has_unit_complex_variance() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let n = 200_000;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut pow = 0.0;
        for _ in 0..n {
            let z = standard_complex(&mut rng);
            sum += z;
            pow += z.norm_sqr();
        }
        let mean = sum / n as f64;
        assert!(mean.norm() < 0.01, "mean = {mean}");
        let var = pow / n as f64;
        assert!((var - 1.0).abs() < 0.01, "var = {var}");
    }

    #[test]
    fn field_draw_is_reproducible() {
        let a = standard_complex_field((3, 4), &mut ChaCha12Rng::seed_from_u64(7));
        let b = standard_complex_field((3, 4), &mut ChaCha12Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }
}
