//! Nearest-hit ray queries against scene objects, body links and the
//! caregiver. Used by the retina renderer and by gaze hit-testing.

use core::cmp::Ordering;

use thiserror::Error;

use crate::math::{Quat, Vec3};
use crate::scene::{local_ray, Shape};
use crate::world::WorldState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HitTarget {
    Object(u32),
    Link(usize),
    Caregiver,
}

impl HitTarget {
    fn rank(&self) -> (u8, u64) {
        match *self {
            HitTarget::Object(id) => (0, id as u64),
            HitTarget::Link(i) => (1, i as u64),
            HitTarget::Caregiver => (2, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub target: HitTarget,
    pub distance: f64,
    pub normal: Vec3,
    pub color: [u8; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum RaycastError {
    #[error("ray direction has zero length")]
    ZeroDirection,
    #[error("ray origin or direction is not finite")]
    NonFinite,
}

/// Which kinds of geometry a query considers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RayFilter {
    pub objects: bool,
    pub body: bool,
    pub caregiver: bool,
    pub skip_link: Option<usize>,
}

impl RayFilter {
    pub const ALL: Self = Self { objects: true, body: true, caregiver: true, skip_link: None };
    pub const OBJECTS: Self = Self { objects: true, body: false, caregiver: false, skip_link: None };

    /// Everything except the link carrying the eyes.
    pub fn from_eye(world: &WorldState) -> Self {
        Self { skip_link: Some(world.model().head_link()), ..Self::ALL }
    }
}

/// Nearest hit over all geometry. Ties go to the lowest object id.
pub fn raycast(world: &WorldState, origin: &Vec3, direction: &Vec3) -> Result<Option<Hit>, RaycastError> {
    cast(world, origin, direction, &RayFilter::ALL)
}

/// Nearest hit over the geometry selected by `filter`. Non-unit directions are
/// normalized.
pub fn cast(world: &WorldState, origin: &Vec3, direction: &Vec3, filter: &RayFilter) -> Result<Option<Hit>, RaycastError> {
    if !(origin.iter().chain(direction.iter()).all(|c| c.is_finite())) {
        return Err(RaycastError::NonFinite);
    }
    let len = direction.norm();
    if len < 1e-12 {
        return Err(RaycastError::ZeroDirection);
    }
    let dir = direction / len;
    let mut best: Option<Hit> = None;
    let mut offer = |hit: Hit| {
        let better = match &best {
            None => true,
            Some(b) => match hit.distance.partial_cmp(&b.distance) {
                Some(Ordering::Less) => true,
                Some(Ordering::Equal) => hit.target.rank() < b.target.rank(),
                _ => false,
            },
        };
        if better {
            best = Some(hit);
        }
    };
    if filter.objects {
        for o in &world.objects {
            if let Some((t, n)) = o.ray_intersect(origin, &dir) {
                offer(Hit { target: HitTarget::Object(o.id), distance: t, normal: n, color: o.color });
            }
        }
    }
    if filter.body {
        let model = world.model();
        for (i, (link, pose)) in model.links.iter().zip(world.body.link_poses()).enumerate() {
            if filter.skip_link == Some(i) {
                continue;
            }
            let a = pose.transform_point(&link.seg_a);
            let b = pose.transform_point(&link.seg_b);
            if let Some((t, n)) = ray_capsule(origin, &dir, &a, &b, link.radius) {
                offer(Hit { target: HitTarget::Link(i), distance: t, normal: n, color: model.skin_color });
            }
        }
    }
    if filter.caregiver {
        if let Some((a, b, r)) = world.caregiver_capsule() {
            if let Some((t, n)) = ray_capsule(origin, &dir, &a, &b, r) {
                offer(Hit { target: HitTarget::Caregiver, distance: t, normal: n, color: world.caregiver_color() });
            }
        }
    }
    Ok(best)
}

/// Ray against the capsule swept by a sphere of radius `r` along `[a, b]`.
/// `dir` must be unit length. Rays starting inside report no hit.
pub fn ray_capsule(origin: &Vec3, dir: &Vec3, a: &Vec3, b: &Vec3, r: f64) -> Option<(f64, Vec3)> {
    let center = (a + b) * 0.5;
    let mut axis = b - a;
    let reach = axis.norm() * 0.5 + r;
    let oc = center - origin;
    let along = oc.dot(dir);
    if along < -reach || oc.norm_squared() - along * along > reach * reach * (1.0 + 1e-9) + 1e-12 {
        return None;
    }
    let half = axis.norm() * 0.5;
    if axis.z < 0.0 {
        axis = -axis;
    }
    let rot = if half > 1e-12 { Quat::rotation_between(&Vec3::z(), &axis).unwrap_or_else(Quat::identity) } else { Quat::identity() };
    let inv = rot.inverse();
    let shape = Shape::Capsule { radius: r, half_length: half };
    let (t, n) = local_ray(&shape, false, &(inv * (origin - center)), &(inv * dir))?;
    Some((t, rot * n))
}
