//! World state, scene loading, the fixed-step update and canonical state
//! serialization.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use thiserror::Error;

use crate::body::{BodyModel, MUSCLE_CHANNELS};
use crate::caregiver::{touching_head, Behavior, CaregiverCommand, CaregiverScript, CaregiverState, Interaction};
use crate::codec::{digest, ByteReader, ByteWriter, DecodeError};
use crate::math::{axis_angle, integrate_rotation, is_finite3, quat_to_wxyz, quat_wxyz, vec3, Pose, Vec3};
use crate::rng::SimRng;
use crate::scene::{scene_invalid, Material, Oscillation, PhysicsParams, SceneError, SceneObject, SceneSpec, Shape};
use crate::sensors::{motor_command, Action, ActionError, InteroState};
use crate::{dynamics, DT};

/// Version of the canonical state encoding. Bump on any layout change.
pub const STATE_SCHEMA_VERSION: u32 = 1;

/// Articulated body state. Link poses are derived and recomputed whenever the
/// configuration changes, so they are never stale.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyState {
    pub(crate) root: Pose,
    pub(crate) root_linear_velocity: Vec3,
    pub(crate) root_angular_velocity: Vec3,
    pub(crate) joint_angles: [f64; MUSCLE_CHANNELS],
    pub(crate) joint_velocities: [f64; MUSCLE_CHANNELS],
    pub(crate) eye_angles: [f64; 3],
    pub(crate) head_velocity: Vec3,
    pub(crate) head_acceleration: Vec3,
    /// Ticks of head motion history, saturating at 2.
    pub(crate) head_samples: u8,
    pub(crate) resting_ticks: u32,
    link_poses: Vec<Pose>,
}

impl BodyState {
    fn new(model: &BodyModel, root: Pose, mut joint_angles: [f64; MUSCLE_CHANNELS]) -> Self {
        model.clamp_to_limits(&mut joint_angles);
        let mut out = Self {
            root,
            root_linear_velocity: Vec3::zeros(),
            root_angular_velocity: Vec3::zeros(),
            joint_angles,
            joint_velocities: [0.0; MUSCLE_CHANNELS],
            eye_angles: [0.0; 3],
            head_velocity: Vec3::zeros(),
            head_acceleration: Vec3::zeros(),
            head_samples: 0,
            resting_ticks: 0,
            link_poses: Vec::new(),
        };
        out.refresh(model);
        out
    }

    pub(crate) fn refresh(&mut self, model: &BodyModel) {
        self.link_poses = model.forward(&self.root, &self.joint_angles).links;
    }

    /// Pelvis pose.
    pub fn root(&self) -> &Pose {
        &self.root
    }

    pub fn root_linear_velocity(&self) -> &Vec3 {
        &self.root_linear_velocity
    }

    pub fn root_angular_velocity(&self) -> &Vec3 {
        &self.root_angular_velocity
    }

    pub fn joint_angles(&self) -> &[f64; MUSCLE_CHANNELS] {
        &self.joint_angles
    }

    pub fn joint_velocities(&self) -> &[f64; MUSCLE_CHANNELS] {
        &self.joint_velocities
    }

    /// Yaw, pitch, torsion.
    pub fn eye_angles(&self) -> &[f64; 3] {
        &self.eye_angles
    }

    pub fn link_poses(&self) -> &[Pose] {
        &self.link_poses
    }

    /// World-frame head acceleration from the last two ticks, zero until
    /// two ticks of history exist.
    pub fn head_acceleration(&self) -> &Vec3 {
        &self.head_acceleration
    }

    pub fn is_sleeping(&self, physics: &PhysicsParams) -> bool {
        self.resting_ticks >= physics.sleep_ticks
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error("invalid caregiver command: {0}")]
    Caregiver(&'static str),
}

/// Complete simulation state.
#[derive(Clone, Debug)]
pub struct WorldState {
    pub tick: u64,
    pub scene_id: String,
    pub seed: u64,
    pub gravity: Vec3,
    /// Fraction of gravity cancelled for body links and objects.
    pub buoyancy: f64,
    /// Energy is replenished every tick (womb).
    pub umbilical: bool,
    /// Energy neither decays nor is fed.
    pub intero_frozen: bool,
    /// Motor strength factor applied to every muscle channel.
    pub strength: f64,
    pub physics: PhysicsParams,
    pub body: BodyState,
    /// Last normalized vocalization command.
    pub vocal_output: f64,
    pub intero: InteroState,
    pub caregiver: Option<CaregiverState>,
    /// Sorted by id.
    pub objects: Vec<SceneObject>,
    model: Arc<BodyModel>,
    script: Option<Arc<CaregiverScript>>,
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn validate_physics(p: &PhysicsParams) -> Result<(), SceneError> {
    let ok = p.contact_stiffness.is_finite()
        && p.contact_stiffness >= 0.0
        && p.contact_damping.is_finite()
        && p.contact_damping >= 0.0
        && p.joint_damping.map_or(true, |d| d.is_finite() && d >= 0.0)
        && p.sleep_speed.is_finite()
        && p.sleep_speed >= 0.0
        && p.drag.is_finite()
        && p.drag >= 0.0;
    if ok {
        Ok(())
    } else {
        Err(scene_invalid("physics", "coefficients must be finite and non-negative"))
    }
}

fn build_objects(spec: &SceneSpec, tick: u64) -> Result<Vec<SceneObject>, SceneError> {
    let mut objects = Vec::with_capacity(spec.objects.len());
    for (index, o) in spec.objects.iter().enumerate() {
        if spec.objects[..index].iter().any(|p| p.id == o.id) {
            return Err(SceneError::DuplicateId { index, id: o.id });
        }
        objects.push(SceneObject::from_spec(o, index, tick)?);
    }
    objects.sort_by_key(|o| o.id);
    Ok(objects)
}

fn agent_pose(spec: &SceneSpec, model: &BodyModel) -> Result<(Pose, [f64; MUSCLE_CHANNELS]), SceneError> {
    let a = &spec.agent;
    if !finite(&a.position) {
        return Err(scene_invalid("agent.position", "non-finite coordinate"));
    }
    let rotation = quat_wxyz(a.orientation)
        .ok_or_else(|| scene_invalid("agent.orientation", "must be a finite non-zero quaternion"))?;
    let mut q = [0.0; MUSCLE_CHANNELS];
    for (name, angle) in &a.joint_angles {
        let ch = model
            .channel_by_name(name)
            .ok_or_else(|| scene_invalid(alloc::format!("agent.joint_angles.{name}"), "unknown channel"))?;
        if !angle.is_finite() {
            return Err(scene_invalid(alloc::format!("agent.joint_angles.{name}"), "not finite"));
        }
        q[ch] = *angle;
    }
    Ok((Pose::new(vec3(a.position), rotation), q))
}

/// Builds the tick-0 state for `spec`. The caregiver is present iff a script is
/// given.
pub fn load_scene(
    spec: &SceneSpec,
    model: Arc<BodyModel>,
    script: Option<Arc<CaregiverScript>>,
) -> Result<WorldState, SceneError> {
    if spec.scene_id.is_empty() {
        return Err(scene_invalid("scene_id", "must not be empty"));
    }
    if !finite(&spec.gravity) {
        return Err(scene_invalid("gravity", "non-finite component"));
    }
    if !(0.0..=1.0).contains(&spec.buoyancy) {
        return Err(scene_invalid("buoyancy", "must be in [0, 1]"));
    }
    if !(0.0..=1.0).contains(&spec.agent.energy) {
        return Err(scene_invalid("agent.energy", "must be in [0, 1]"));
    }
    if spec.caregiver_home.is_some_and(|h| !finite(&h)) {
        return Err(scene_invalid("caregiver_home", "non-finite coordinate"));
    }
    validate_physics(&spec.physics)?;
    let objects = build_objects(spec, 0)?;
    let (root, q) = agent_pose(spec, &model)?;
    let body = BodyState::new(&model, root, q);
    let rng = SimRng::new(spec.seed);
    let caregiver = script.as_ref().map(|s| CaregiverState::new(s, &rng, home(spec), 0));
    Ok(WorldState {
        tick: 0,
        scene_id: spec.scene_id.clone(),
        seed: spec.seed,
        gravity: vec3(spec.gravity),
        buoyancy: spec.buoyancy,
        umbilical: spec.umbilical,
        intero_frozen: false,
        strength: 1.0,
        physics: spec.physics,
        body,
        vocal_output: 0.0,
        intero: InteroState::with_energy(spec.agent.energy),
        caregiver,
        objects,
        model,
        script,
    })
}

fn home(spec: &SceneSpec) -> Vec3 {
    spec.caregiver_home.map(vec3).unwrap_or_else(crate::caregiver::default_home)
}

impl WorldState {
    pub fn model(&self) -> &BodyModel {
        &self.model
    }

    pub fn model_arc(&self) -> &Arc<BodyModel> {
        &self.model
    }

    pub fn caregiver_script(&self) -> Option<&CaregiverScript> {
        self.script.as_deref()
    }

    pub fn rng(&self) -> SimRng {
        SimRng::new(self.seed)
    }

    pub fn sim_time(&self) -> f64 {
        crate::sim_time(self.tick)
    }

    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.binary_search_by_key(&id, |o| o.id).ok().map(|i| &self.objects[i])
    }

    /// Adds an object, keeping ids unique and sorted.
    pub fn insert_object(&mut self, object: SceneObject) -> Result<(), SceneError> {
        match self.objects.binary_search_by_key(&object.id, |o| o.id) {
            Ok(index) => Err(SceneError::DuplicateId { index, id: object.id }),
            Err(at) => {
                self.objects.insert(at, object);
                Ok(())
            }
        }
    }

    pub fn remove_object(&mut self, id: u32) -> Option<SceneObject> {
        let i = self.objects.binary_search_by_key(&id, |o| o.id).ok()?;
        Some(self.objects.remove(i))
    }

    /// Removes the caregiver entirely (evaluation runs).
    pub fn dismiss_caregiver(&mut self) {
        self.caregiver = None;
        self.script = None;
    }

    /// Caregiver hand-and-arm capsule `(hand, shoulder, radius)` if present.
    pub fn caregiver_capsule(&self) -> Option<(Vec3, Vec3, f64)> {
        let (state, script) = (self.caregiver.as_ref()?, self.script.as_ref()?);
        Some(state.capsule(&script.params))
    }

    pub fn caregiver_color(&self) -> [u8; 3] {
        self.script.as_ref().map_or([0; 3], |s| s.color)
    }

    /// Eye pose: x along the gaze, y left, z up. Torsion does not affect it.
    pub fn eye_pose(&self) -> Pose {
        let eyes = &self.model.eyes;
        let head = self.body.link_poses[eyes.link];
        let [yaw, pitch, _] = self.body.eye_angles;
        let rotation = head.rotation * axis_angle(&Vec3::z(), yaw) * axis_angle(&Vec3::y(), -pitch);
        Pose::new(head.transform_point(&eyes.offset), rotation)
    }

    /// Poses the body, clamping joint angles to their limits and zeroing all
    /// body velocities.
    pub fn set_body_pose(&mut self, root: Pose, joint_angles: [f64; MUSCLE_CHANNELS]) {
        let eyes = self.body.eye_angles;
        self.body = BodyState::new(&self.model, root, joint_angles);
        self.body.eye_angles = eyes;
    }

    /// Overwrites body velocities (root linear and angular in world frame,
    /// then per-channel joint rates) and wakes the body.
    pub fn set_body_velocities(&mut self, linear: Vec3, angular: Vec3, joints: [f64; MUSCLE_CHANNELS]) {
        self.body.root_linear_velocity = linear;
        self.body.root_angular_velocity = angular;
        self.body.joint_velocities = joints;
        self.body.resting_ticks = 0;
    }

    /// Sets eye angles, clamped to their limits.
    pub fn set_eye_angles(&mut self, angles: [f64; 3]) {
        let limits = self.model.eyes.limits;
        for i in 0..3 {
            self.body.eye_angles[i] = angles[i].clamp(limits[i][0], limits[i][1]);
        }
    }

    /// Switches to another scene in place: objects, physics and the agent's
    /// root pose come from `spec`; tick, joint angles, eyes and energy carry over.
    pub fn change_scene(&mut self, spec: &SceneSpec, script: Option<Arc<CaregiverScript>>) -> Result<(), SceneError> {
        let mut next = load_scene(spec, self.model.clone(), script)?;
        next.objects = build_objects(spec, self.tick)?;
        let (root, _) = agent_pose(spec, &self.model)?;
        next.body = BodyState::new(&self.model, root, self.body.joint_angles);
        next.body.eye_angles = self.body.eye_angles;
        next.tick = self.tick;
        next.seed = self.seed;
        next.intero = self.intero.clone();
        next.intero_frozen = self.intero_frozen;
        next.strength = self.strength;
        let rng = next.rng();
        if let Some(s) = next.script.clone() {
            next.caregiver = Some(CaregiverState::new(&s, &rng, home(spec), self.tick));
        }
        *self = next;
        Ok(())
    }

    fn head_point(&self) -> Vec3 {
        let head = self.model.head_link();
        self.body.link_poses[head].transform_point(&self.model.links[head].seg_a)
    }

    /// Advances one tick. On error the state is left untouched.
    pub fn step(&mut self, action: &Action, caregiver_cmd: &CaregiverCommand) -> Result<(), StepError> {
        action.validate()?;
        if !is_finite3(&caregiver_cmd.velocity) {
            return Err(StepError::Caregiver("velocity is not finite"));
        }
        let mut feed = 0.0;
        let mut held = None;
        match &caregiver_cmd.interact {
            None | Some(Interaction::Utterance(_)) => {}
            Some(Interaction::Feed(amount)) => {
                let (Some(state), Some(script)) = (&self.caregiver, &self.script) else {
                    return Err(StepError::Caregiver("feed without a caregiver"));
                };
                if !(amount.is_finite() && *amount >= 0.0) {
                    return Err(StepError::Caregiver("feed amount must be finite and non-negative"));
                }
                if *amount > 0.0 && !(state.behavior == Behavior::Feed && touching_head(self, state, &script.params)) {
                    return Err(StepError::Caregiver("feeding requires the feed behavior and head contact"));
                }
                feed = *amount;
            }
            Some(Interaction::MoveToy { id, target }) => {
                let index = self
                    .objects
                    .binary_search_by_key(id, |o| o.id)
                    .map_err(|_| StepError::Caregiver("unknown toy id"))?;
                let o = &self.objects[index];
                if !o.has_tag("toy") || o.is_static() || !is_finite3(target) {
                    return Err(StepError::Caregiver("only movable objects tagged toy can be carried"));
                }
                held = Some((index, *target));
            }
        }

        let cmd = motor_command(action, self.strength, &self.model);
        let head_before = self.head_point();
        let reactions = dynamics::step_body(self, &cmd.torques);
        let speed = self.script.as_ref().map_or(0.5, |s| s.params.approach_speed);
        dynamics::step_objects(self, &reactions, held, speed);

        let limits = self.model.eyes.limits;
        for ((angle, lim), v) in self.body.eye_angles.iter_mut().zip(limits).zip(cmd.eye_velocity) {
            *angle = (*angle + DT * v).clamp(lim[0], lim[1]);
        }
        if let Some(state) = &mut self.caregiver {
            state.position += caregiver_cmd.velocity * DT;
        }
        if self.umbilical {
            self.intero.energy = 1.0;
            self.intero.pending_feed = 0.0;
        } else if !self.intero_frozen {
            self.intero.queue_feed(feed);
            self.intero.advance(DT);
        }
        self.vocal_output = self.model.vocal_channel.map_or(0.0, |c| action.muscle[c]);

        self.body.refresh(&self.model);
        let velocity = (self.head_point() - head_before) / DT;
        self.body.head_acceleration =
            if self.body.head_samples >= 1 { (velocity - self.body.head_velocity) / DT } else { Vec3::zeros() };
        self.body.head_velocity = velocity;
        self.body.head_samples = (self.body.head_samples + 1).min(2);
        self.tick += 1;
        Ok(())
    }

    /// Body kinetic energy in joules.
    pub fn kinetic_energy(&self) -> f64 {
        dynamics::body_energy(self).0
    }

    /// Body gravitational potential energy in joules, zero at z = 0.
    pub fn potential_energy(&self) -> f64 {
        dynamics::body_energy(self).1
    }

    /// Deepest overlap in metres between the body and objects accepted by
    /// `include`.
    pub fn max_penetration(&self, include: impl Fn(&SceneObject) -> bool) -> f64 {
        dynamics::max_penetration(self, include)
    }

    /// Canonical little-endian encoding of every dynamic field.
    pub fn encode_state(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_capacity(2048);
        w.u32(STATE_SCHEMA_VERSION).u64(self.tick).str16(&self.scene_id).u64(self.seed);
        w.f64s(self.gravity.as_slice()).f64(self.buoyancy).bool(self.umbilical).bool(self.intero_frozen).f64(self.strength);
        let p = &self.physics;
        w.f64(p.contact_stiffness).f64(p.contact_damping);
        match p.joint_damping {
            Some(d) => w.bool(true).f64(d),
            None => w.bool(false),
        };
        w.f64(p.sleep_speed).u32(p.sleep_ticks).f64(p.drag);

        let b = &self.body;
        w.f64s(b.root.position.as_slice()).f64s(&quat_to_wxyz(&b.root.rotation));
        w.f64s(b.root_linear_velocity.as_slice()).f64s(b.root_angular_velocity.as_slice());
        w.f64s(&b.joint_angles).f64s(&b.joint_velocities).f64s(&b.eye_angles);
        w.f64s(b.head_velocity.as_slice()).f64s(b.head_acceleration.as_slice()).u8(b.head_samples).u32(b.resting_ticks);
        w.f64(self.vocal_output);
        w.f64(self.intero.energy).f64(self.intero.decay_rate).f64(self.intero.pending_feed);

        match &self.caregiver {
            None => {
                w.bool(false);
            }
            Some(c) => {
                w.bool(true).f64s(c.position.as_slice()).f64s(c.home.as_slice()).u8(c.behavior.code());
                w.u64(c.behavior_ticks).u64(c.utterance_cursor as u64).u64(c.vocal_ticks);
                w.u32(c.next_base.len() as u32);
                for (base, fire) in c.next_base.iter().zip(&c.next_fire) {
                    w.u64(*base).u64(*fire);
                }
                match c.routine {
                    Some(r) => w.bool(true).u32(r as u32),
                    None => w.bool(false),
                };
            }
        }

        w.u32(self.objects.len() as u32);
        for o in &self.objects {
            w.u32(o.id).u8(o.shape.tag()).f64s(&o.shape.params());
            w.f64s(o.pose.position.as_slice()).f64s(&quat_to_wxyz(&o.pose.rotation));
            w.f64s(o.linear_velocity.as_slice()).f64s(o.angular_velocity.as_slice()).f64(o.mass);
            w.f64(o.material.friction).f64(o.material.restitution).bytes(&o.color).bool(o.hollow);
            w.u32(o.tags.len() as u32);
            for t in &o.tags {
                w.str16(t);
            }
            match &o.motion {
                None => {
                    w.bool(false);
                }
                Some(m) => {
                    w.bool(true).f64s(m.base.as_slice()).f64s(m.axis.as_slice());
                    w.f64(m.amplitude).f64(m.frequency_hz).f64(m.phase).u64(m.start_tick);
                }
            }
        }
        w.into_inner()
    }

    /// Inverse of [`WorldState::encode_state`]. The body model and caregiver
    /// script are configuration and must be supplied.
    pub fn decode_state(
        bytes: &[u8],
        model: Arc<BodyModel>,
        script: Option<Arc<CaregiverScript>>,
    ) -> Result<Self, DecodeError> {
        let mut r = ByteReader::new(bytes);
        let schema = r.u32()?;
        if schema != STATE_SCHEMA_VERSION {
            return Err(DecodeError::Invalid { field: "schema", value: schema as u64 });
        }
        let tick = r.u64()?;
        let scene_id = r.str16()?;
        let seed = r.u64()?;
        let gravity = read3(&mut r)?;
        let buoyancy = r.f64()?;
        let umbilical = r.bool()?;
        let intero_frozen = r.bool()?;
        let strength = r.f64()?;
        let contact_stiffness = r.f64()?;
        let contact_damping = r.f64()?;
        let joint_damping = if r.bool()? { Some(r.f64()?) } else { None };
        let physics = PhysicsParams {
            contact_stiffness,
            contact_damping,
            joint_damping,
            sleep_speed: r.f64()?,
            sleep_ticks: r.u32()?,
            drag: r.f64()?,
        };

        let position = read3(&mut r)?;
        let rotation = read_quat(&mut r)?;
        let mut body = BodyState::new(&model, Pose::new(position, rotation), [0.0; MUSCLE_CHANNELS]);
        body.root_linear_velocity = read3(&mut r)?;
        body.root_angular_velocity = read3(&mut r)?;
        read_into(&mut r, &mut body.joint_angles)?;
        read_into(&mut r, &mut body.joint_velocities)?;
        read_into(&mut r, &mut body.eye_angles)?;
        body.head_velocity = read3(&mut r)?;
        body.head_acceleration = read3(&mut r)?;
        body.head_samples = r.u8()?;
        body.resting_ticks = r.u32()?;
        body.refresh(&model);
        let vocal_output = r.f64()?;
        let intero = InteroState { energy: r.f64()?, decay_rate: r.f64()?, pending_feed: r.f64()? };

        let caregiver = if r.bool()? {
            let position = read3(&mut r)?;
            let home = read3(&mut r)?;
            let code = r.u8()?;
            let behavior =
                Behavior::from_code(code).ok_or(DecodeError::Invalid { field: "caregiver.behavior", value: code as u64 })?;
            let behavior_ticks = r.u64()?;
            let utterance_cursor = r.u64()? as usize;
            let vocal_ticks = r.u64()?;
            let n = r.u32()? as usize;
            let mut next_base = Vec::with_capacity(n.min(1024));
            let mut next_fire = Vec::with_capacity(n.min(1024));
            for _ in 0..n {
                next_base.push(r.u64()?);
                next_fire.push(r.u64()?);
            }
            let routine = if r.bool()? { Some(r.u32()? as usize) } else { None };
            Some(CaregiverState {
                position,
                home,
                behavior,
                behavior_ticks,
                utterance_cursor,
                vocal_ticks,
                next_base,
                next_fire,
                routine,
            })
        } else {
            None
        };

        let count = r.u32()? as usize;
        let mut objects = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let id = r.u32()?;
            let tag = r.u8()?;
            let params = [r.f64()?, r.f64()?, r.f64()?];
            let shape = Shape::from_parts(tag, params).ok_or(DecodeError::Invalid { field: "object.shape", value: tag as u64 })?;
            let pose = Pose::new(read3(&mut r)?, read_quat(&mut r)?);
            let linear_velocity = read3(&mut r)?;
            let angular_velocity = read3(&mut r)?;
            let mass = r.f64()?;
            let material = Material { friction: r.f64()?, restitution: r.f64()? };
            let color = [r.u8()?, r.u8()?, r.u8()?];
            let hollow = r.bool()?;
            let ntags = r.u32()? as usize;
            let mut tags = Vec::with_capacity(ntags.min(256));
            for _ in 0..ntags {
                tags.push(r.str16()?);
            }
            let motion = if r.bool()? {
                Some(Oscillation {
                    base: read3(&mut r)?,
                    axis: read3(&mut r)?,
                    amplitude: r.f64()?,
                    frequency_hz: r.f64()?,
                    phase: r.f64()?,
                    start_tick: r.u64()?,
                })
            } else {
                None
            };
            objects.push(SceneObject {
                id,
                shape,
                pose,
                linear_velocity,
                angular_velocity,
                mass,
                material,
                color,
                tags,
                hollow,
                motion,
            });
        }
        r.finish()?;
        Ok(Self {
            tick,
            scene_id,
            seed,
            gravity,
            buoyancy,
            umbilical,
            intero_frozen,
            strength,
            physics,
            body,
            vocal_output,
            intero,
            caregiver,
            objects,
            model,
            script,
        })
    }

    /// 64-bit FNV-1a digest of the canonical encoding.
    pub fn state_hash(&self) -> u64 {
        digest(&self.encode_state())
    }
}

fn read3(r: &mut ByteReader<'_>) -> Result<Vec3, DecodeError> {
    Ok(Vec3::new(r.f64()?, r.f64()?, r.f64()?))
}

fn read_quat(r: &mut ByteReader<'_>) -> Result<crate::math::Quat, DecodeError> {
    let q = [r.f64()?, r.f64()?, r.f64()?, r.f64()?];
    // stored quaternions are already unit; avoid renormalizing so the encoding round-trips
    if q.iter().any(|c| !c.is_finite()) {
        return Err(DecodeError::Invalid { field: "quaternion", value: 0 });
    }
    Ok(crate::math::Quat::new_unchecked(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3])))
}

fn read_into(r: &mut ByteReader<'_>, out: &mut [f64]) -> Result<(), DecodeError> {
    for v in out.iter_mut() {
        *v = r.f64()?;
    }
    Ok(())
}

/// Rotates `root` so that its attitude integrates `omega` over one tick.
pub(crate) fn advance_rotation(root: &mut Pose, omega: &Vec3) {
    root.rotation = integrate_rotation(&root.rotation, omega, DT);
}
