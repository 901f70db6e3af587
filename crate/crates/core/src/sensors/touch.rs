use crate::body::{TouchLayout, TOUCH_SENSORS};
use crate::math::{closest_on_segment, Vec3};
use crate::world::WorldState;

pub const TOUCH_BYTES: usize = TOUCH_SENSORS / 8;

/// One bit per touch sensor, LSB-first within each byte.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct TouchBits(pub [u8; TOUCH_BYTES]);

impl TouchBits {
    pub fn get(&self, i: usize) -> bool {
        self.0[i / 8] & (1 << (i % 8)) != 0
    }

    pub fn set(&mut self, i: usize) {
        self.0[i / 8] |= 1 << (i % 8);
    }

    pub fn count(&self) -> u32 {
        self.0.iter().map(|b| b.count_ones()).sum()
    }

    pub fn any_of(&self, bits: &[usize]) -> bool {
        bits.iter().any(|&i| self.get(i))
    }
}

/// Bit `i` is set iff a scene object, the caregiver, or a non-adjacent body
/// link lies within the sensing radius of sensor `i`.
pub fn sense_touch(world: &WorldState, layout: &TouchLayout) -> TouchBits {
    let model = world.model();
    let poses = world.body.link_poses();
    let radius = layout.sensing_radius;
    let caregiver = world.caregiver_capsule();
    let segments: alloc::vec::Vec<(Vec3, Vec3)> = model
        .links
        .iter()
        .zip(poses)
        .map(|(l, p)| (p.transform_point(&l.seg_a), p.transform_point(&l.seg_b)))
        .collect();
    let mut bits = TouchBits::default();
    for (i, sensor) in layout.sensors.iter().enumerate() {
        let p = poses[sensor.link].transform_point(&sensor.local);
        let hit_object = world.objects.iter().any(|o| {
            let reach = o.bounding_radius() + radius;
            (o.hollow || (p - o.pose.position).norm_squared() <= reach * reach) && o.signed_distance(&p).0 <= radius
        });
        let hit_caregiver = caregiver.is_some_and(|(a, b, r)| (p - closest_on_segment(&p, &a, &b)).norm() - r <= radius);
        let hit_link = || {
            model.links.iter().enumerate().any(|(li, link)| {
                if li == sensor.link
                    || link.parent == Some(sensor.link)
                    || model.links[sensor.link].parent == Some(li)
                {
                    return false;
                }
                let (a, b) = &segments[li];
                (p - closest_on_segment(&p, a, b)).norm() - link.radius <= radius
            })
        };
        if hit_object || hit_caregiver || hit_link() {
            bits.set(i);
        }
    }
    bits
}
