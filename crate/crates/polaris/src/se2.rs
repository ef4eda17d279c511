//! Planar rigid-body poses and SE(2) group operations.
//!
//! Poses are stored as `(x, y, yaw)` with the yaw normalized to
//! `(-pi, pi]`. The exp/log maps and their closed-form Jacobian helpers
//! are shared by the odometry integration, the factor graph, and the
//! evaluation metrics.

use nalgebra::{Matrix2, Vector2, Vector3};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r -= std::f64::consts::TAU;
    }
    // rem_euclid maps -pi exactly to +pi already; keep (-pi, pi].
    r
}

/// Vehicle pose in the plane: position in meters, heading in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw: wrap_angle(yaw) }
    }

    pub fn identity() -> Self {
        Self { x: 0.0, y: 0.0, yaw: 0.0 }
    }

    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.yaw.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    /// Applies the pose to a point given in its local frame.
    pub fn transform(&self, p: Vector2<f64>) -> Vector2<f64> {
        self.rotation() * p + self.translation()
    }

    /// Group composition `self ∘ other`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let t = self.transform(other.translation());
        Pose2::new(t.x, t.y, self.yaw + other.yaw)
    }

    pub fn inverse(&self) -> Pose2 {
        let r = self.rotation().transpose();
        let t = -(r * self.translation());
        Pose2::new(t.x, t.y, -self.yaw)
    }

    /// Relative pose `self⁻¹ ∘ other`.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose(other)
    }

    /// SE(2) exponential map of a tangent vector `(rho_x, rho_y, theta)`.
    pub fn exp(xi: Vector3<f64>) -> Pose2 {
        let theta = xi.z;
        let v = left_jacobian_v(theta);
        let t = v * Vector2::new(xi.x, xi.y);
        Pose2::new(t.x, t.y, theta)
    }

    /// SE(2) logarithmic map, inverse of [`Pose2::exp`].
    pub fn log(&self) -> Vector3<f64> {
        let theta = self.yaw;
        let rho = v_inverse(theta) * self.translation();
        Vector3::new(rho.x, rho.y, theta)
    }

    /// Unicycle increment over `dt` as an SE(2) element: arc of constant
    /// forward speed `v` and yaw rate `omega`.
    pub fn from_twist(v: f64, omega: f64, dt: f64) -> Pose2 {
        Pose2::exp(Vector3::new(v * dt, 0.0, omega * dt))
    }
}

/// The SE(2) left Jacobian `V(theta)` with `t = V rho`.
pub fn left_jacobian_v(theta: f64) -> Matrix2<f64> {
    let (a, b) = if theta.abs() < 1e-7 {
        (1.0 - theta * theta / 6.0, theta / 2.0 - theta.powi(3) / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta)
    };
    Matrix2::new(a, -b, b, a)
}

/// Closed form of `V(theta)⁻¹`, see [`left_jacobian_v`].
pub fn v_inverse(theta: f64) -> Matrix2<f64> {
    let g = v_inv_diag(theta);
    Matrix2::new(g, theta / 2.0, -theta / 2.0, g)
}

/// Diagonal entry `g(theta) = theta sin(theta) / (2 (1 - cos(theta)))` of `V⁻¹`.
pub fn v_inv_diag(theta: f64) -> f64 {
    if theta.abs() < 1e-5 {
        1.0 - theta * theta / 12.0
    } else {
        theta * theta.sin() / (2.0 * (1.0 - theta.cos()))
    }
}

/// Derivative `g'(theta)` of [`v_inv_diag`], used in analytic factor Jacobians.
pub fn v_inv_diag_deriv(theta: f64) -> f64 {
    if theta.abs() < 1e-4 {
        -theta / 6.0
    } else {
        let (s, c) = theta.sin_cos();
        let one_c = 1.0 - c;
        (s + theta * c) / (2.0 * one_c) - theta * s * s / (2.0 * one_c * one_c)
    }
}
