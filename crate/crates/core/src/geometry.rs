//! Small 3-vector helpers and the joint-angle primitives.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Rays shorter than this are treated as degenerate.
pub const MIN_RAY_LENGTH: f64 = 1e-9;

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

pub fn normalize(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    (n >= MIN_RAY_LENGTH).then(|| scale(a, 1.0 / n))
}

pub fn lerp(a: Vec3, b: Vec3, s: f64) -> Vec3 {
    add(a, scale(sub(b, a), s))
}

/// Angle in degrees between two non-degenerate vectors.
///
/// Uses `atan2(|u×v|, u·v)`, which stays accurate near 0° and 180°.
pub fn angle_between(u: Vec3, v: Vec3) -> Option<f64> {
    if norm(u) < MIN_RAY_LENGTH || norm(v) < MIN_RAY_LENGTH {
        return None;
    }
    Some(norm(cross(u, v)).atan2(dot(u, v)).to_degrees())
}

/// Angle at vertex `b` between the rays b→a and b→c, in degrees.
pub fn joint_angle(a: Vec3, b: Vec3, c: Vec3) -> Result<f64> {
    angle_between(sub(a, b), sub(c, b))
        .ok_or_else(|| Error::DegenerateGeometry { frame: 0, reason: "joint angle ray shorter than 1e-9 m".into() })
}

/// Angle in degrees between the segment bottom→top and `up_axis`.
pub fn tilt_angle(top: Vec3, bottom: Vec3, up_axis: Vec3) -> Result<f64> {
    angle_between(sub(top, bottom), up_axis)
        .ok_or_else(|| Error::DegenerateGeometry { frame: 0, reason: "tilt segment shorter than 1e-9 m".into() })
}

/// Row-major 3×3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(pub [[f64; 3]; 3]);

impl Rotation {
    pub fn identity() -> Self {
        Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Rotation by `angle_rad` about the unit vector `axis` (Rodrigues).
    pub fn about_axis(axis: Vec3, angle_rad: f64) -> Self {
        let [x, y, z] = normalize(axis).unwrap_or([0.0, 1.0, 0.0]);
        let (s, c) = angle_rad.sin_cos();
        let t = 1.0 - c;
        Rotation([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ])
    }

    /// Rotation from a (not necessarily normalized) quaternion `(w, x, y, z)`.
    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        let [w, x, y, z] = q.map(|v| v / n);
        Rotation([
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ])
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
    }
}
