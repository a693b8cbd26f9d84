use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::group::{OrthogonalMatrix, RotationMatrix};

/// Uniform direction on `S^{d-1}` (normalized Gaussian).
pub fn unit_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    assert!(d >= 1);
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Haar-distributed element of `O(d)`: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal moved into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> OrthogonalMatrix {
    assert!(d >= 1);
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..d {
        if r[(k, k)] < 0.0 {
            let col = -q.column(k);
            q.set_column(k, &col);
        }
    }
    OrthogonalMatrix::new_unchecked(q)
}

/// Haar-distributed rotation. A reflected draw is mapped to `SO(d)` by
/// negating its first column, which preserves the Haar measure.
pub fn haar_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> RotationMatrix {
    let mut q = haar_orthogonal(d, rng).matrix().clone();
    if q.determinant() < 0.0 {
        let col = -q.column(0);
        q.set_column(0, &col);
    }
    RotationMatrix::new_unchecked(q)
}
