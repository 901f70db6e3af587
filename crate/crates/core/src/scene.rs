//! Scene file schema and rigid scene primitives.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{closest_on_segment, quat_wxyz, vec3, Mat3, Pose, Quat, Vec3};

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub scene_id: String,
    pub gravity: [f64; 3],
    /// Fraction of gravity cancelled for the agent body and dynamic objects.
    #[serde(default)]
    pub buoyancy: f64,
    /// Energy is continuously replenished (no feeding required).
    #[serde(default)]
    pub umbilical: bool,
    pub agent: AgentSpec,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    pub body_spec_ref: String,
    #[serde(default)]
    pub caregiver_script_ref: Option<String>,
    #[serde(default)]
    pub caregiver_home: Option<[f64; 3]>,
    #[serde(default)]
    pub physics: PhysicsParams,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct AgentSpec {
    pub position: [f64; 3],
    /// `[w, x, y, z]`.
    pub orientation: [f64; 4],
    #[serde(default)]
    pub joint_angles: BTreeMap<String, f64>,
    #[serde(default = "full_energy")]
    pub energy: f64,
}

fn full_energy() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct ObjectSpec {
    pub id: u32,
    pub shape: Shape,
    pub position: [f64; 3],
    #[serde(default = "identity_wxyz")]
    pub orientation: [f64; 4],
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default)]
    pub angular_velocity: [f64; 3],
    /// kg; 0 marks a static object.
    #[serde(default)]
    pub mass: f64,
    #[serde(default)]
    pub material: Material,
    #[serde(default = "grey")]
    pub color: [u8; 3],
    #[serde(default)]
    pub tags: Vec<String>,
    /// Solid outside, empty inside (enclosures). Spheres only.
    #[serde(default)]
    pub hollow: bool,
    #[serde(default)]
    pub motion: Option<OscillationSpec>,
}

impl ObjectSpec {
    /// A static grey object with default material and no tags.
    pub fn new(id: u32, shape: Shape, position: [f64; 3]) -> Self {
        Self {
            id,
            shape,
            position,
            orientation: identity_wxyz(),
            velocity: [0.0; 3],
            angular_velocity: [0.0; 3],
            mass: 0.0,
            material: Material::default(),
            color: grey(),
            tags: Vec::new(),
            hollow: false,
            motion: None,
        }
    }
}

fn identity_wxyz() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

fn grey() -> [u8; 3] {
    [128, 128, 128]
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Sphere { radius: f64 },
    /// Segment along local z from `-half_length` to `+half_length`.
    Capsule { radius: f64, half_length: f64 },
    Box { half_extents: [f64; 3] },
}

impl Shape {
    pub fn tag(&self) -> u8 {
        match self {
            Shape::Sphere { .. } => 0,
            Shape::Capsule { .. } => 1,
            Shape::Box { .. } => 2,
        }
    }

    pub fn params(&self) -> [f64; 3] {
        match *self {
            Shape::Sphere { radius } => [radius, 0.0, 0.0],
            Shape::Capsule { radius, half_length } => [radius, half_length, 0.0],
            Shape::Box { half_extents } => half_extents,
        }
    }

    pub fn from_parts(tag: u8, p: [f64; 3]) -> Option<Self> {
        match tag {
            0 => Some(Shape::Sphere { radius: p[0] }),
            1 => Some(Shape::Capsule { radius: p[0], half_length: p[1] }),
            2 => Some(Shape::Box { half_extents: p }),
            _ => None,
        }
    }

    fn valid(&self) -> bool {
        match *self {
            Shape::Sphere { radius } => radius.is_finite() && radius > 0.0,
            Shape::Capsule { radius, half_length } => {
                radius.is_finite() && radius > 0.0 && half_length.is_finite() && half_length >= 0.0
            }
            Shape::Box { half_extents } => half_extents.iter().all(|h| h.is_finite() && *h > 0.0),
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Sphere { radius } => radius,
            Shape::Capsule { radius, half_length } => radius + half_length,
            Shape::Box { half_extents } => vec3(half_extents).norm(),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub friction: f64,
    pub restitution: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self { friction: 0.6, restitution: 0.1 }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct OscillationSpec {
    pub axis: [f64; 3],
    pub amplitude: f64,
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(default)]
pub struct PhysicsParams {
    /// Penalty contact stiffness, N/m.
    pub contact_stiffness: f64,
    /// Penalty contact damping, N·s/m.
    pub contact_damping: f64,
    /// Overrides the body spec's joint damping, N·m·s/rad.
    pub joint_damping: Option<f64>,
    /// Generalized speed below which the body counts as resting.
    pub sleep_speed: f64,
    /// Consecutive resting ticks before the body sleeps.
    pub sleep_ticks: u32,
    /// Velocity-proportional drag on every link, per kilogram (1/s).
    pub drag: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self { contact_stiffness: 5000.0, contact_damping: 50.0, joint_damping: None, sleep_speed: 1e-3, sleep_ticks: 25, drag: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("objects[{index}].id: duplicate object id {id}")]
    DuplicateId { index: usize, id: u32 },
}

pub(crate) fn scene_invalid(field: impl Into<String>, reason: impl Into<String>) -> SceneError {
    SceneError::Invalid { field: field.into(), reason: reason.into() }
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Scripted sinusoidal translation: `base + axis × amplitude × sin(2π f t + phase)`
/// with `t` measured from `start_tick`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Oscillation {
    pub base: Vec3,
    pub axis: Vec3,
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub phase: f64,
    pub start_tick: u64,
}

impl Oscillation {
    fn angle(&self, tick: u64) -> f64 {
        let t = crate::sim_time(tick.saturating_sub(self.start_tick));
        2.0 * core::f64::consts::PI * self.frequency_hz * t + self.phase
    }

    pub fn position_at(&self, tick: u64) -> Vec3 {
        self.base + self.axis * (self.amplitude * libm::sin(self.angle(tick)))
    }

    pub fn velocity_at(&self, tick: u64) -> Vec3 {
        let w = 2.0 * core::f64::consts::PI * self.frequency_hz;
        self.axis * (self.amplitude * w * libm::cos(self.angle(tick)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    pub id: u32,
    pub shape: Shape,
    pub pose: Pose,
    pub linear_velocity: Vec3,
    pub angular_velocity: Vec3,
    pub mass: f64,
    pub material: Material,
    pub color: [u8; 3],
    /// Sorted and de-duplicated.
    pub tags: Vec<String>,
    pub hollow: bool,
    pub motion: Option<Oscillation>,
}

impl SceneObject {
    pub fn from_spec(spec: &ObjectSpec, index: usize, tick: u64) -> Result<Self, SceneError> {
        let field = |f: &str| alloc::format!("objects[{index}].{f}");
        if !spec.shape.valid() {
            return Err(scene_invalid(field("shape"), "dimensions must be finite and positive"));
        }
        if !finite(&spec.position) {
            return Err(scene_invalid(field("position"), "non-finite coordinate"));
        }
        let rotation = quat_wxyz(spec.orientation)
            .ok_or_else(|| scene_invalid(field("orientation"), "must be a finite non-zero quaternion"))?;
        if !finite(&spec.velocity) || !finite(&spec.angular_velocity) {
            return Err(scene_invalid(field("velocity"), "non-finite component"));
        }
        if !(spec.mass.is_finite() && spec.mass >= 0.0) {
            return Err(scene_invalid(field("mass"), "must be finite and non-negative"));
        }
        let m = &spec.material;
        if !(m.friction.is_finite() && m.friction >= 0.0 && (0.0..=1.0).contains(&m.restitution)) {
            return Err(scene_invalid(field("material"), "friction must be >= 0, restitution in [0, 1]"));
        }
        if spec.hollow && !matches!(spec.shape, Shape::Sphere { .. }) {
            return Err(scene_invalid(field("hollow"), "only spheres can be hollow"));
        }
        let position = vec3(spec.position);
        let motion = match &spec.motion {
            None => None,
            Some(o) => {
                let axis = vec3(o.axis);
                if !(finite(&o.axis) && axis.norm() > 1e-9 && o.amplitude.is_finite() && o.frequency_hz.is_finite())
                    || !o.phase.is_finite()
                {
                    return Err(scene_invalid(field("motion"), "axis must be non-zero, parameters finite"));
                }
                if spec.mass != 0.0 {
                    return Err(scene_invalid(field("motion"), "scripted objects must have mass 0"));
                }
                Some(Oscillation {
                    base: position,
                    axis: axis.normalize(),
                    amplitude: o.amplitude,
                    frequency_hz: o.frequency_hz,
                    phase: o.phase,
                    start_tick: tick,
                })
            }
        };
        let tags: BTreeSet<String> = spec.tags.iter().cloned().collect();
        let mut obj = Self {
            id: spec.id,
            shape: spec.shape,
            pose: Pose::new(position, rotation),
            linear_velocity: vec3(spec.velocity),
            angular_velocity: vec3(spec.angular_velocity),
            mass: spec.mass,
            material: spec.material,
            color: spec.color,
            tags: tags.into_iter().collect(),
            hollow: spec.hollow,
            motion,
        };
        if obj.mass == 0.0 {
            obj.linear_velocity = Vec3::zeros();
            obj.angular_velocity = Vec3::zeros();
        }
        if let Some(m) = obj.motion {
            obj.pose.position = m.position_at(tick);
            obj.linear_velocity = m.velocity_at(tick);
        }
        Ok(obj)
    }

    /// Mass 0 and no scripted motion: never moves.
    pub fn is_static(&self) -> bool {
        self.mass == 0.0 && self.motion.is_none()
    }

    pub fn is_dynamic(&self) -> bool {
        self.mass > 0.0
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.binary_search_by(|t| t.as_str().cmp(tag)).is_ok()
    }

    pub fn has_any_tag<S: AsRef<str>>(&self, tags: &[S]) -> bool {
        tags.iter().any(|t| self.has_tag(t.as_ref()))
    }

    pub fn bounding_radius(&self) -> f64 {
        self.shape.bounding_radius()
    }

    /// Signed distance from world point `p` to the surface (negative inside the
    /// material) and the outward surface normal at the closest point.
    pub fn signed_distance(&self, p: &Vec3) -> (f64, Vec3) {
        let local = self.pose.inverse_transform_point(p);
        let (d, n) = local_sdf(&self.shape, self.hollow, &local);
        (d, self.pose.rotation * n)
    }

    /// Nearest non-negative ray parameter and world normal, or `None`. Rays
    /// starting inside solid material report no hit.
    pub fn ray_intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, Vec3)> {
        let oc = self.pose.position - origin;
        let r = self.bounding_radius();
        if !self.hollow {
            let along = oc.dot(dir);
            if along < -r || oc.norm_squared() - along * along > r * r * (1.0 + 1e-9) + 1e-12 {
                return None;
            }
        }
        let inv = self.pose.rotation.inverse();
        let o = inv * (origin - self.pose.position);
        let d = inv * dir;
        let (t, n) = local_ray(&self.shape, self.hollow, &o, &d)?;
        Some((t, self.pose.rotation * n))
    }

    /// Contact proxy spheres `(local center, radius)` for dynamic objects.
    pub fn proxies(&self) -> Vec<(Vec3, f64)> {
        match self.shape {
            Shape::Sphere { radius } => alloc::vec![(Vec3::zeros(), radius)],
            Shape::Capsule { radius, half_length } => {
                let n = (libm::ceil(2.0 * half_length / radius) as usize + 1).max(2);
                (0..n)
                    .map(|i| {
                        let z = -half_length + 2.0 * half_length * (i as f64 / (n - 1) as f64);
                        (Vec3::new(0.0, 0.0, z), radius)
                    })
                    .collect()
            }
            Shape::Box { half_extents: h } => {
                let mut out = Vec::with_capacity(8);
                for sx in [-1.0, 1.0] {
                    for sy in [-1.0, 1.0] {
                        for sz in [-1.0, 1.0] {
                            out.push((Vec3::new(sx * h[0], sy * h[1], sz * h[2]), 0.0));
                        }
                    }
                }
                out
            }
        }
    }

    /// Inertia about the center of mass in the local frame.
    pub fn local_inertia(&self) -> Mat3 {
        let m = self.mass;
        match self.shape {
            Shape::Sphere { radius } => Mat3::identity() * (0.4 * m * radius * radius),
            Shape::Capsule { radius, half_length } => {
                let l = 2.0 * (half_length + radius);
                let perp = m * (3.0 * radius * radius + l * l) / 12.0;
                Mat3::from_diagonal(&Vec3::new(perp, perp, 0.5 * m * radius * radius))
            }
            Shape::Box { half_extents: h } => {
                let (x, y, z) = (2.0 * h[0], 2.0 * h[1], 2.0 * h[2]);
                Mat3::from_diagonal(&Vec3::new(y * y + z * z, x * x + z * z, x * x + y * y)) * (m / 12.0)
            }
        }
    }

    pub fn rotation(&self) -> Quat {
        self.pose.rotation
    }
}

fn local_sdf(shape: &Shape, hollow: bool, p: &Vec3) -> (f64, Vec3) {
    match *shape {
        Shape::Sphere { radius } => {
            let len = p.norm();
            let n = if len > 1e-12 { p / len } else { Vec3::z() };
            if hollow {
                (radius - len, -n)
            } else {
                (len - radius, n)
            }
        }
        Shape::Capsule { radius, half_length } => {
            let c = closest_on_segment(p, &Vec3::new(0.0, 0.0, -half_length), &Vec3::new(0.0, 0.0, half_length));
            let v = p - c;
            let len = v.norm();
            let n = if len > 1e-12 { v / len } else { crate::math::any_perpendicular(&Vec3::z()) };
            (len - radius, n)
        }
        Shape::Box { half_extents } => {
            let h = vec3(half_extents);
            let q = p.abs() - h;
            let outside = q.map(|c| c.max(0.0));
            let out_len = outside.norm();
            if out_len > 0.0 {
                let clamped = Vec3::new(p.x.clamp(-h.x, h.x), p.y.clamp(-h.y, h.y), p.z.clamp(-h.z, h.z));
                ((out_len), (p - clamped) / out_len)
            } else {
                let axis = if q.x >= q.y && q.x >= q.z {
                    0
                } else if q.y >= q.z {
                    1
                } else {
                    2
                };
                let mut n = Vec3::zeros();
                n[axis] = if p[axis] >= 0.0 { 1.0 } else { -1.0 };
                (q[axis], n)
            }
        }
    }
}

/// Roots of `|o + t d|² = r²` for unit `d`, tolerant of exact tangency.
fn sphere_roots(o: &Vec3, d: &Vec3, r: f64) -> Option<(f64, f64)> {
    let b = o.dot(d);
    let c = o.norm_squared() - r * r;
    let mut disc = b * b - c;
    if disc < 0.0 {
        if disc > -1e-12 * (1.0 + r * r) {
            disc = 0.0;
        } else {
            return None;
        }
    }
    let s = libm::sqrt(disc);
    Some((-b - s, -b + s))
}

pub(crate) fn local_ray(shape: &Shape, hollow: bool, o: &Vec3, d: &Vec3) -> Option<(f64, Vec3)> {
    match *shape {
        Shape::Sphere { radius } => {
            let (t0, t1) = sphere_roots(o, d, radius)?;
            let inside = o.norm_squared() < radius * radius;
            if hollow && inside {
                // inner wall, facing the center
                let p = o + d * t1;
                return Some((t1, -p / radius));
            }
            if inside || t0 < 0.0 {
                return None;
            }
            let p = o + d * t0;
            Some((t0, p / radius))
        }
        Shape::Capsule { radius, half_length } => {
            let mut best: Option<(f64, Vec3)> = None;
            let mut consider = |t: f64, n: Vec3| {
                if t >= 0.0 && best.map_or(true, |(bt, _)| t < bt) {
                    best = Some((t, n));
                }
            };
            // inside test first: no hits from within the solid
            let c = closest_on_segment(o, &Vec3::new(0.0, 0.0, -half_length), &Vec3::new(0.0, 0.0, half_length));
            if (o - c).norm_squared() < radius * radius {
                return None;
            }
            let a = d.x * d.x + d.y * d.y;
            if a > 1e-18 {
                let b = o.x * d.x + o.y * d.y;
                let cc = o.x * o.x + o.y * o.y - radius * radius;
                let disc = b * b - a * cc;
                if disc >= 0.0 {
                    let t = (-b - libm::sqrt(disc)) / a;
                    let p = o + d * t;
                    if p.z.abs() <= half_length {
                        consider(t, Vec3::new(p.x, p.y, 0.0) / radius);
                    }
                }
            }
            for z in [-half_length, half_length] {
                let center = Vec3::new(0.0, 0.0, z);
                if let Some((t0, _)) = sphere_roots(&(o - center), d, radius) {
                    let p = o + d * t0;
                    consider(t0, (p - center) / radius);
                }
            }
            best
        }
        Shape::Box { half_extents } => {
            let mut t_near = f64::NEG_INFINITY;
            let mut t_far = f64::INFINITY;
            let mut axis_near = 0;
            for i in 0..3 {
                let h = half_extents[i];
                if d[i].abs() < 1e-18 {
                    if o[i].abs() > h {
                        return None;
                    }
                    continue;
                }
                let mut t1 = (-h - o[i]) / d[i];
                let mut t2 = (h - o[i]) / d[i];
                if t1 > t2 {
                    core::mem::swap(&mut t1, &mut t2);
                }
                if t1 > t_near {
                    t_near = t1;
                    axis_near = i;
                }
                t_far = t_far.min(t2);
            }
            if t_near > t_far || t_near < 0.0 {
                return None;
            }
            let mut n = Vec3::zeros();
            n[axis_near] = if d[axis_near] > 0.0 { -1.0 } else { 1.0 };
            Some((t_near, n))
        }
    }
}
