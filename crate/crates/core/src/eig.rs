//! Closed-form eigenvalues of small symmetric matrices.

use nalgebra::Matrix2;
use std::f64::consts::PI;

use crate::geom::Mat3;

pub type Mat2 = Matrix2<f64>;

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym2_eigenvalues(m: &Mat2) -> [f64; 2] {
    let a = m[(0, 0)];
    let d = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let mean = 0.5 * (a + d);
    let radius = (0.5 * (a - d)).hypot(b);
    [mean - radius, mean + radius]
}

/// Eigenvalues of a symmetric 3×3 matrix, ascending (trigonometric method).
pub fn sym3_eigenvalues(m: &Mat3) -> [f64; 3] {
    let s = 0.5 * (m + m.transpose());
    let p1 = s[(0, 1)].powi(2) + s[(0, 2)].powi(2) + s[(1, 2)].powi(2);
    let q = s.trace() / 3.0;
    if p1 == 0.0 {
        let mut d = [s[(0, 0)], s[(1, 1)], s[(2, 2)]];
        d.sort_by(f64::total_cmp);
        return d;
    }
    let p2 = (s[(0, 0)] - q).powi(2) + (s[(1, 1)] - q).powi(2) + (s[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (s - q * Mat3::identity()) / p;
    let r = (0.5 * b.determinant()).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let mid = 3.0 * q - hi - lo;
    [lo, mid, hi]
}

pub fn sym2_min(m: &Mat2) -> f64 {
    sym2_eigenvalues(m)[0]
}

pub fn sym3_min(m: &Mat3) -> f64 {
    sym3_eigenvalues(m)[0]
}

pub fn sym3_max(m: &Mat3) -> f64 {
    sym3_eigenvalues(m)[2]
}

/// Spectral norm of an arbitrary 2×2 matrix, via the eigenvalues of `AᵀA`.
pub fn spectral_norm2(m: &Mat2) -> f64 {
    sym2_eigenvalues(&(m.transpose() * m))[1].max(0.0).sqrt()
}

/// Spectral norm of an arbitrary 3×3 matrix.
pub fn spectral_norm3(m: &Mat3) -> f64 {
    sym3_max(&(m.transpose() * m)).max(0.0).sqrt()
}
