use std::sync::Once;

use faer::prelude::*;
use faer::Mat;
use nalgebra::DMatrix;
use num_complex::Complex64;

static PIN_SERIAL: Once = Once::new();

/// Parallelism is managed at the replicate level by rayon; the dense kernels
/// stay single-threaded so nested pools cannot oversubscribe.
pub(crate) fn pin_serial_backend() {
    PIN_SERIAL.call_once(|| {
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

fn to_faer(m: &DMatrix<Complex64>) -> Mat<faer::c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Inverse of a square complex matrix via partial-pivot LU. Returns None when
/// the factorization produced non-finite entries, which is how a numerically
/// singular input surfaces.
pub(crate) fn invert(m: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    pin_serial_backend();
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let lu = to_faer(m).partial_piv_lu();
    let inv = lu.solve(&Mat::<faer::c64>::identity(n, n));
    let out = DMatrix::from_fn(n, n, |i, j| inv[(i, j)]);
    if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return None;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_small_complex_matrix() {
        let m = DMatrix::from_fn(3, 3, |i, j| {
            Complex64::new(if i == j { 2.0 } else { 0.3 }, 0.1 * (i + j) as f64)
        });
        let inv = invert(&m).unwrap();
        let prod = &m * &inv;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_reports_none() {
        let m = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(invert(&m).is_none());
    }
}
