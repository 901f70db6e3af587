//! Small geometric helpers over `nalgebra` types.

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Quat = UnitQuaternion<f64>;

/// Rigid transform of a link or object: world position plus orientation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: Quat,
}

impl Pose {
    pub fn new(position: Vec3, rotation: Quat) -> Self {
        Self { position, rotation }
    }

    pub fn identity() -> Self {
        Self::new(Vec3::zeros(), Quat::identity())
    }

    /// Maps a point from the local frame into the world frame.
    #[inline]
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.position + self.rotation * p
    }

    /// Maps a world point into the local frame.
    #[inline]
    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse() * (p - self.position)
    }
}

pub fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

/// Builds a unit quaternion from `[w, x, y, z]`, normalizing the input.
/// Returns `None` for zero-norm or non-finite input.
pub fn quat_wxyz(q: [f64; 4]) -> Option<Quat> {
    if q.iter().any(|c| !c.is_finite()) {
        return None;
    }
    let raw = nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]);
    if raw.norm() < 1e-12 {
        return None;
    }
    Some(UnitQuaternion::from_quaternion(raw))
}

pub fn quat_to_wxyz(q: &Quat) -> [f64; 4] {
    let c = q.quaternion();
    [c.w, c.i, c.j, c.k]
}

/// Rotation by `angle` radians about a (not necessarily normalized) axis.
pub fn axis_angle(axis: &Vec3, angle: f64) -> Quat {
    UnitQuaternion::from_axis_angle(&Unit::new_normalize(*axis), angle)
}

/// Integrates an orientation under constant world-frame angular velocity for `dt`
/// using the exponential map, then renormalizes.
pub fn integrate_rotation(q: &Quat, omega: &Vec3, dt: f64) -> Quat {
    let angle = omega.norm() * dt;
    let rotated = if angle > 0.0 {
        UnitQuaternion::from_axis_angle(&Unit::new_normalize(*omega), angle) * q
    } else {
        *q
    };
    UnitQuaternion::new_normalize(rotated.into_inner())
}

pub fn is_finite3(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Closest point to `p` on segment `[a, b]`.
pub fn closest_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Any unit vector perpendicular to `n`.
pub fn any_perpendicular(n: &Vec3) -> Vec3 {
    let h = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    n.cross(&h).normalize()
}
