//! SO(3) kernel: hat/vee isomorphisms, exponential and logarithm maps,
//! the navigation error function on attitude errors and the quantities
//! derived from it.
//!
//! Attitude errors use the left representation `R_e = R * R_refᵀ`.
//! Gains on the navigation function are diagonal (`NavGains`).

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance on `RᵀR = I` and `det R = 1` when validating rotations.
pub const ROTATION_TOL: f64 = 1e-9;
/// Tolerance on skew-symmetry accepted by [`vee`].
pub const SKEW_TOL: f64 = 1e-9;

const SMALL_ANGLE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("matrix is not skew-symmetric (|M + Mᵀ|_F = {0:.3e})")]
    NotSkew(f64),
    #[error("matrix is not a rotation (orthonormality residual {orth:.3e}, det {det:.12})")]
    NotRotation { orth: f64, det: f64 },
    #[error("cannot project onto SO(3): det = {0:.6e} is not positive")]
    NonPositiveDeterminant(f64),
    #[error("gain k_R{index} = {value} must be strictly positive")]
    NonPositiveGain { index: usize, value: f64 },
    #[error("sublevel psi = {psi} must lie in (0, c1 = {c1})")]
    SublevelOutOfRange { psi: f64, c1: f64 },
}

pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects inputs whose symmetric part exceeds [`SKEW_TOL`].
pub fn vee(m: &Mat3) -> Result<Vec3, GeomError> {
    let asym = (m + m.transpose()).norm();
    if asym > SKEW_TOL {
        return Err(GeomError::NotSkew(asym));
    }
    Ok(vee_unchecked(m))
}

/// Reads the axial vector of the skew part without validation.
pub(crate) fn vee_unchecked(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Skew-symmetric part `(A - Aᵀ)/2`.
pub fn skew(a: &Mat3) -> Mat3 {
    0.5 * (a - a.transpose())
}

/// An element of SO(3), stored as its 3×3 matrix.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Validates orthonormality and orientation within [`ROTATION_TOL`].
    pub fn new(m: Mat3) -> Result<Self, GeomError> {
        let orth = (m.transpose() * m - Mat3::identity()).norm();
        let det = m.determinant();
        if !orth.is_finite() || orth > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(GeomError::NotRotation { orth, det });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix the caller knows to be a rotation (e.g. built from
    /// orthonormal columns). Debug builds still check it.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        debug_assert!(Self::new(m).is_ok(), "not a rotation: {m}");
        Self(m)
    }

    pub fn from_columns(c1: &Vec3, c2: &Vec3, c3: &Vec3) -> Result<Self, GeomError> {
        Self::new(Mat3::from_columns(&[*c1, *c2, *c3]))
    }

    /// Row-major entries.
    pub fn from_row_slice(rows: &[f64; 9]) -> Result<Self, GeomError> {
        Self::new(Mat3::from_row_slice(rows))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn column(&self, i: usize) -> Vec3 {
        self.0.column(i).into_owned()
    }

    pub fn orthonormality_residual(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).norm()
    }

    /// Row-major entries, the ordering used by telemetry and CSV tables.
    pub fn to_row_array(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }
}

impl fmt::Debug for RotationMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RotationMatrix{:?}", self.to_row_array())
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl Mul<&RotationMatrix> for &RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: &RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for RotationMatrix {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for &RotationMatrix {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl TryFrom<[[f64; 3]; 3]> for RotationMatrix {
    type Error = GeomError;
    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self, Self::Error> {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(Mat3::from_row_slice(&flat))
    }
}

impl From<RotationMatrix> for [[f64; 3]; 3] {
    fn from(r: RotationMatrix) -> Self {
        let a = r.to_row_array();
        [[a[0], a[1], a[2]], [a[3], a[4], a[5]], [a[6], a[7], a[8]]]
    }
}

/// Rodrigues formula; Taylor series below 1e-6 rad.
pub fn exp_so3(v: &Vec3) -> RotationMatrix {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let k = hat(v);
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    RotationMatrix(Mat3::identity() + a * k + b * (k * k))
}

/// Principal logarithm; the returned rotation vector has norm in `[0, π]`.
pub fn log_so3(r: &RotationMatrix) -> Vec3 {
    let m = r.matrix();
    let axial = vee_unchecked(m); // = sin(θ)·axis
    let s = axial.norm();
    let c = 0.5 * (m.trace() - 1.0);
    let theta = s.atan2(c);

    if theta < SMALL_ANGLE {
        // θ/sinθ ≈ 1 + θ²/6
        return axial * (1.0 + theta * theta / 6.0);
    }
    if theta < PI - 1e-2 {
        return axial * (theta / s);
    }

    // Near a half turn: (R + Rᵀ)/2 - cosθ·I = (1 - cosθ)·a·aᵀ.
    let sym = 0.5 * (m + m.transpose()) - c * Mat3::identity();
    let scale = 1.0 - c;
    let diag = Vec3::new(sym[(0, 0)], sym[(1, 1)], sym[(2, 2)]);
    let i = diag.imax();
    let mut axis = sym.column(i).into_owned() / scale;
    axis /= axis.norm();
    if axis.dot(&axial) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Orthonormal polar factor of `m`, the rotation nearest to `m` in the
/// Frobenius sense. Computed with the scaled Newton iteration
/// `X ← (ζX + X⁻ᵀ/ζ)/2`.
pub fn project_to_so3(m: &Mat3) -> Result<RotationMatrix, GeomError> {
    let det = m.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(GeomError::NonPositiveDeterminant(det));
    }
    let mut x = *m;
    for _ in 0..100 {
        let inv_t = match x.try_inverse() {
            Some(inv) => inv.transpose(),
            None => return Err(GeomError::NonPositiveDeterminant(x.determinant())),
        };
        // Higham's determinant scaling accelerates the early iterations.
        let zeta = x.determinant().abs().powf(-1.0 / 3.0);
        let next = 0.5 * (zeta * x + inv_t / zeta);
        let delta = (next - x).norm();
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    // One unscaled step polishes the last ulps of orthonormality.
    let inv_t = x.try_inverse().map(|i| i.transpose()).unwrap_or(x);
    x = 0.5 * (x + inv_t);
    Ok(RotationMatrix(x))
}

/// Diagonal gain matrix `diag(k1, k2, k3)` of a navigation function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct NavGains([f64; 3]);

impl NavGains {
    pub fn new(k1: f64, k2: f64, k3: f64) -> Result<Self, GeomError> {
        for (index, value) in [k1, k2, k3].into_iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GeomError::NonPositiveGain { index: index + 1, value });
            }
        }
        Ok(Self([k1, k2, k3]))
    }

    pub fn isotropic(k: f64) -> Result<Self, GeomError> {
        Self::new(k, k, k)
    }

    pub fn diagonal(&self) -> [f64; 3] {
        self.0
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::from(self.0))
    }

    pub fn trace(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, GeomError> {
        Self::new(self.0[0] * factor, self.0[1] * factor, self.0[2] * factor)
    }
}

impl TryFrom<[f64; 3]> for NavGains {
    type Error = GeomError;
    fn try_from(k: [f64; 3]) -> Result<Self, GeomError> {
        Self::new(k[0], k[1], k[2])
    }
}

impl From<NavGains> for [f64; 3] {
    fn from(k: NavGains) -> Self {
        k.0
    }
}

/// `Ψ = ½ tr(K_R (I − R_e))`.
pub fn nav_error(k: &NavGains, r_e: &RotationMatrix) -> f64 {
    let m = r_e.matrix();
    let [k1, k2, k3] = k.0;
    0.5 * (k1 * (1.0 - m[(0, 0)]) + k2 * (1.0 - m[(1, 1)]) + k3 * (1.0 - m[(2, 2)]))
}

/// `e_R = skew(K_R R_e)^∨`.
pub fn attitude_error_vector(k: &NavGains, r_e: &RotationMatrix) -> Vec3 {
    vee_unchecked(&(k.matrix() * r_e.matrix()))
}

/// `E = ½(tr(K_R R_e) I − R_eᵀ K_R) R_d`, so that `ė_R = E e_ω`.
pub fn error_transport_matrix(k: &NavGains, r_e: &RotationMatrix, r_d: &RotationMatrix) -> Mat3 {
    let kr = k.matrix();
    let kre = kr * r_e.matrix();
    0.5 * (kre.trace() * Mat3::identity() - r_e.matrix().transpose() * kr) * r_d.matrix()
}

/// Constants bounding the navigation function on a sublevel set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub h1: f64,
    pub h2: f64,
    pub psi: f64,
}

/// `c1`/`c3` are the min/max over the pairwise sums `{k1+k2, k2+k3, k3+k1}`,
/// `c2` the max squared pairwise difference; `h1 = c1/(c2 + c3²)`,
/// `h2 = c3/(c1(c1 − ψ))`, so that `h1‖e_R‖² ≤ Ψ ≤ h2‖e_R‖²` while `Ψ < ψ`.
pub fn psi_constants(k: &NavGains, psi: f64) -> Result<PsiConstants, GeomError> {
    let [k1, k2, k3] = k.0;
    let sums = [k1 + k2, k2 + k3, k3 + k1];
    let c1 = sums.iter().copied().fold(f64::INFINITY, f64::min);
    let c3 = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let c2 = [(k1 - k2).powi(2), (k2 - k3).powi(2), (k3 - k1).powi(2)]
        .into_iter()
        .fold(0.0, f64::max);
    if !(psi > 0.0 && psi < c1) {
        return Err(GeomError::SublevelOutOfRange { psi, c1 });
    }
    Ok(PsiConstants {
        c1,
        c2,
        c3,
        h1: c1 / (c2 + c3 * c3),
        h2: c3 / (c1 * (c1 - psi)),
        psi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn e(i: usize) -> Vec3 {
        let mut v = Vec3::zeros();
        v[i] = 1.0;
        v
    }

    #[test]
    fn hat_matches_cross_product_matrix() {
        let m = hat(&Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(m, Mat3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0));
        assert_eq!(hat(&Vec3::zeros()), Mat3::zeros());
        let v = Vec3::new(0.4, -1.1, 2.0);
        assert_eq!(vee(&hat(&v)).unwrap(), v);
    }

    #[test]
    fn vee_rejects_symmetric_input() {
        assert_eq!(vee(&hat(&e(2))).unwrap(), e(2));
        assert_eq!(vee(&Mat3::zeros()).unwrap(), Vec3::zeros());
        let sym = Mat3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(matches!(vee(&sym), Err(GeomError::NotSkew(_))));
    }

    #[test]
    fn exp_reference_values() {
        assert_eq!(*exp_so3(&Vec3::zeros()).matrix(), Mat3::identity());
        let half = exp_so3(&Vec3::new(PI, 0.0, 0.0));
        let expected = Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0));
        assert!((half.matrix() - expected).norm() < 1e-15);
        let quarter = exp_so3(&(0.5 * PI * e(2)));
        assert!((quarter * e(0) - e(1)).norm() < 1e-15);
    }

    #[test]
    fn exp_small_angle_branch_is_continuous() {
        let axis = Vec3::new(0.3, -0.5, 0.8).normalize();
        let below = exp_so3(&(axis * 0.999e-6));
        let above = exp_so3(&(axis * 1.001e-6));
        // The inputs differ by 2e-9 rad, so the outputs may differ by no more.
        assert!((below.matrix() - above.matrix()).norm() < 2e-9 * 2f64.sqrt() * 1.0001);
        assert!(below.orthonormality_residual() < 1e-15);
    }

    #[test]
    fn log_reference_values() {
        assert_eq!(log_so3(&RotationMatrix::identity()), Vec3::zeros());
        let v = log_so3(&exp_so3(&Vec3::new(0.0, 0.3, 0.0)));
        assert!((v - Vec3::new(0.0, 0.3, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn log_near_half_turn_recovers_axis() {
        let angle = PI - 1e-6;
        let r = exp_so3(&(angle * e(0)));
        let v = log_so3(&r);
        assert!((v.normalize() - e(0)).norm() < 1e-4);
        assert!((v.norm() - angle).abs() < 1e-8);
        assert!((exp_so3(&v).matrix() - r.matrix()).norm() < 1e-9);

        let axis = Vec3::new(1.0, -2.0, 0.5).normalize();
        let r = exp_so3(&(PI * axis));
        let back = exp_so3(&log_so3(&r));
        assert!((back.matrix() - r.matrix()).norm() < 1e-9);
    }

    #[test]
    fn projection_fixed_point_and_reflection() {
        let r = exp_so3(&Vec3::new(0.2, -0.4, 1.1));
        let p = project_to_so3(r.matrix()).unwrap();
        assert!((p.matrix() - r.matrix()).norm() < 1e-14);
        let reflect = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            project_to_so3(&reflect),
            Err(GeomError::NonPositiveDeterminant(_))
        ));
    }

    #[test]
    fn projection_matches_svd_polar_factor() {
        // Independent route: orthogonal Procrustes via SVD, U Vᵀ.
        let r = exp_so3(&Vec3::new(-0.7, 0.1, 2.3));
        let noise = Mat3::new(1.0, -2.0, 0.5, 0.3, 0.9, -1.2, 2.0, 0.1, -0.4) * 1e-6;
        let m = r.matrix() + noise;
        let svd = m.svd(true, true);
        let oracle = svd.u.unwrap() * svd.v_t.unwrap();
        let p = project_to_so3(&m).unwrap();
        assert!(p.orthonormality_residual() <= 1e-12);
        assert!((p.matrix() - oracle).norm() < 1e-12);

        let far = Mat3::new(2.0, 0.3, -0.1, 0.2, 0.5, 0.4, -0.3, 0.1, 1.5);
        let svd = far.svd(true, true);
        let oracle = svd.u.unwrap() * svd.v_t.unwrap();
        let p = project_to_so3(&far).unwrap();
        assert!((p.matrix() - oracle).norm() < 1e-12);
    }

    #[test]
    fn nav_error_reference_values() {
        let k = NavGains::isotropic(10.0).unwrap();
        assert_eq!(nav_error(&k, &RotationMatrix::identity()), 0.0);
        let roll = exp_so3(&(-100f64.to_radians() * e(0)));
        // 10 (1 − cos 100°)
        assert_relative_eq!(nav_error(&k, &roll), 11.736481776669304, epsilon = 1e-12);
        let flip = exp_so3(&(PI * e(0)));
        assert_relative_eq!(nav_error(&k, &flip), 20.0, epsilon = 1e-12);
    }

    #[test]
    fn attitude_error_vector_reference_values() {
        let k = NavGains::isotropic(10.0).unwrap();
        assert_eq!(attitude_error_vector(&k, &RotationMatrix::identity()), Vec3::zeros());
        for theta in [0.3, -1.2, 2.5] {
            let er = attitude_error_vector(&k, &exp_so3(&(theta * e(0))));
            assert!((er - Vec3::new(10.0 * f64::sin(theta), 0.0, 0.0)).norm() < 1e-13);
        }
        let k = NavGains::new(1.0, 2.0, 3.0).unwrap();
        for i in 0..3 {
            let er = attitude_error_vector(&k, &exp_so3(&(PI * e(i))));
            assert!(er.norm() < 1e-15, "critical point {i}: {er}");
        }
    }

    #[test]
    fn transport_matrix_at_identity() {
        let k = NavGains::isotropic(4.0).unwrap();
        let id = RotationMatrix::identity();
        let m = error_transport_matrix(&k, &id, &id);
        assert!((m - 4.0 * Mat3::identity()).norm() < 1e-15);
    }

    #[test]
    fn transport_matrix_finite_difference() {
        let k = NavGains::new(3.0, 5.0, 8.0).unwrap();
        let r_d = exp_so3(&Vec3::new(0.4, -0.9, 0.2));
        let r = exp_so3(&Vec3::new(0.1, 0.3, -0.5)) * r_d;
        let w = Vec3::new(0.7, -0.2, 1.3);
        let w_d = Vec3::new(-0.4, 0.5, 0.1);
        let h = 1e-6;
        let er = |s: f64| {
            let rs = r * exp_so3(&(w * s));
            let rds = r_d * exp_so3(&(w_d * s));
            attitude_error_vector(&k, &(rs * rds.transpose()))
        };
        let fd = (er(h) - er(-h)) / (2.0 * h);
        let analytic = error_transport_matrix(&k, &(r * r_d.transpose()), &r_d) * (w - w_d);
        assert!((fd - analytic).norm() / analytic.norm() < 1e-6);
    }

    #[test]
    fn psi_constants_reference_values() {
        let k = NavGains::isotropic(10.0).unwrap();
        let c = psi_constants(&k, 12.0).unwrap();
        assert_eq!((c.c1, c.c2, c.c3), (20.0, 0.0, 20.0));
        assert_relative_eq!(c.h1, 0.05, epsilon = 1e-15);
        assert_relative_eq!(c.h2, 0.125, epsilon = 1e-15);

        let k = NavGains::new(1.0, 2.0, 3.0).unwrap();
        let c = psi_constants(&k, 2.0).unwrap();
        assert_eq!((c.c1, c.c2, c.c3), (3.0, 4.0, 5.0));

        let k = NavGains::isotropic(10.0).unwrap();
        assert!(matches!(
            psi_constants(&k, 25.0),
            Err(GeomError::SublevelOutOfRange { .. })
        ));
    }

    #[test]
    fn gains_must_be_positive() {
        assert!(NavGains::new(1.0, 0.0, 1.0).is_err());
        assert!(NavGains::new(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn rotation_validation() {
        assert!(RotationMatrix::new(Mat3::identity() * 1.001).is_err());
        let r = RotationMatrix::from_row_slice(&[-1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert!(r.is_ok());
    }
}
