use crate::world::WorldState;

/// Head linear acceleration (m/s², finite difference of head velocity over one
/// tick) followed by the unit gravity direction, both in the head frame.
/// Acceleration reads zero until two ticks of head velocity exist.
pub fn sense_vestibular(world: &WorldState) -> [f64; 6] {
    let head = world.body.link_poses()[world.model().head_link()];
    let inv = head.rotation.inverse();
    let acc = inv * world.body.head_acceleration;
    let g = world.gravity;
    let down = if g.norm() > 0.0 { inv * g.normalize() } else { g };
    [acc.x, acc.y, acc.z, down.x, down.y, down.z]
}
