//! Rotation-group helpers: hat map, exponential and logarithm.

use nalgebra::{Matrix3, Vector3};

/// `hat(u) w = u x w`.
pub fn hat(u: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -u.z, u.y, u.z, 0.0, -u.x, -u.y, u.x, 0.0)
}

/// Inverse of [`hat`] on the skew part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rodrigues formula for `exp(hat(w))`.
pub fn exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let k = hat(w);
    let (a, b) = if theta2 < 1e-8 {
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Principal logarithm, valid for rotation angles below pi. The angle comes
/// from `atan2(|sin|, cos)`, which stays accurate for small rotations.
pub fn log(r: &Matrix3<f64>) -> Vector3<f64> {
    let s = vee(r);
    let sin_theta = s.norm();
    let theta = sin_theta.atan2((r.trace() - 1.0) * 0.5);
    if theta < 1e-6 {
        // theta / sin(theta) ~ 1 + theta^2 / 6
        s * (1.0 + theta * theta / 6.0)
    } else {
        s * (theta / sin_theta)
    }
}

pub fn rotation_z(angle: f64) -> Matrix3<f64> {
    exp(&Vector3::new(0.0, 0.0, angle))
}

/// Orthogonality and orientation residual `max(|R^T R - I|, |det R - 1|)`.
pub fn orthogonality_defect(r: &Matrix3<f64>) -> f64 {
    let e = r.transpose() * r - Matrix3::identity();
    e.amax().max((r.determinant() - 1.0).abs())
}
