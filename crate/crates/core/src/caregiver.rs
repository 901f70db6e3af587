//! Scripted caregiver: a small behavior machine that feeds, talks to and
//! shows toys to the agent, driven by a JSON routine script.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::development::StageParams;
use crate::math::{vec3, Vec3};
use crate::rng::{SimRng, Stream};
use crate::world::WorldState;
use crate::TICKS_PER_SECOND;

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct CaregiverScript {
    pub name: String,
    #[serde(default)]
    pub params: CaregiverParams,
    #[serde(default = "default_color")]
    pub color: [u8; 3],
    #[serde(default)]
    pub routines: Vec<RoutineSpec>,
    /// Token id sequences, emitted in order and wrapping around.
    pub utterances: Vec<Vec<u32>>,
}

fn default_color() -> [u8; 3] {
    [214, 160, 130]
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(default)]
pub struct CaregiverParams {
    /// Energy below which the caregiver goes to feed.
    pub feed_threshold: f64,
    /// Energy per second of head contact while feeding.
    pub feed_rate: f64,
    /// Energy at which feeding stops.
    pub feed_stop: f64,
    /// m/s.
    pub approach_speed: f64,
    pub vocal_threshold: f64,
    /// Sustained vocalization needed to trigger a response, seconds.
    pub vocal_duration_s: f64,
    pub respond_duration_s: f64,
    /// Radius of the caregiver's hand capsule.
    pub tip_radius: f64,
    /// Length of the capsule above the hand.
    pub arm_length: f64,
    /// Slack allowed between hand and head surfaces for feeding contact.
    pub contact_tolerance: f64,
    /// Distance in front of the face while talking back.
    pub respond_distance: f64,
    /// Distance in front of the face while showing a toy.
    pub show_distance: f64,
}

impl Default for CaregiverParams {
    fn default() -> Self {
        Self {
            feed_threshold: 0.3,
            feed_rate: 0.05,
            feed_stop: 0.95,
            approach_speed: 0.5,
            vocal_threshold: 0.5,
            vocal_duration_s: 1.0,
            respond_duration_s: 3.0,
            tip_radius: 0.03,
            arm_length: 0.4,
            contact_tolerance: 0.005,
            respond_distance: 0.25,
            show_distance: 0.3,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct RoutineSpec {
    pub id: String,
    pub behavior: RoutineBehavior,
    pub schedule: RoutineSchedule,
    #[serde(default)]
    pub params: RoutineParams,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RoutineBehavior {
    Talk,
    ShowToy,
}

/// Fires at `offset + k × period` plus a per-firing jitter in `[0, jitter]`.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct RoutineSchedule {
    pub period_s: f64,
    #[serde(default)]
    pub offset_s: f64,
    #[serde(default)]
    pub jitter_s: f64,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(default)]
pub struct RoutineParams {
    pub duration_s: f64,
}

impl Default for RoutineParams {
    fn default() -> Self {
        Self { duration_s: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaregiverError {
    #[error("caregiver script has no utterances")]
    EmptyScript,
    #[error("utterances[{0}] is empty")]
    EmptyUtterance(usize),
    #[error("routines[{index}] ({id}): {reason}")]
    Routine { index: usize, id: String, reason: &'static str },
    #[error("params.{0}: out of range")]
    Param(&'static str),
}

impl CaregiverScript {
    pub fn validate(&self) -> Result<(), CaregiverError> {
        if self.utterances.is_empty() {
            return Err(CaregiverError::EmptyScript);
        }
        if let Some(i) = self.utterances.iter().position(|u| u.is_empty()) {
            return Err(CaregiverError::EmptyUtterance(i));
        }
        let p = &self.params;
        let checks: [(&'static str, bool); 6] = [
            ("feed_threshold", (0.0..=1.0).contains(&p.feed_threshold)),
            ("feed_stop", p.feed_stop > p.feed_threshold && p.feed_stop <= 1.0),
            ("feed_rate", p.feed_rate.is_finite() && p.feed_rate > 0.0),
            ("approach_speed", p.approach_speed.is_finite() && p.approach_speed > 0.0),
            ("vocal_duration_s", p.vocal_duration_s.is_finite() && p.vocal_duration_s > 0.0),
            ("tip_radius", p.tip_radius.is_finite() && p.tip_radius > 0.0 && p.arm_length >= 0.0),
        ];
        if let Some((name, _)) = checks.iter().find(|(_, ok)| !ok) {
            return Err(CaregiverError::Param(name));
        }
        for (index, r) in self.routines.iter().enumerate() {
            let err = |reason| Err(CaregiverError::Routine { index, id: r.id.clone(), reason });
            let s = &r.schedule;
            if !(s.period_s.is_finite() && s.period_s > 0.0) {
                return err("period_s must be positive");
            }
            if !(s.offset_s.is_finite() && s.offset_s >= 0.0 && s.jitter_s.is_finite() && s.jitter_s >= 0.0) {
                return err("offset_s and jitter_s must be non-negative");
            }
            if !(r.params.duration_s.is_finite() && r.params.duration_s > 0.0) {
                return err("duration_s must be positive");
            }
            if self.routines[..index].iter().any(|o| o.id == r.id) {
                return err("duplicate routine id");
            }
        }
        Ok(())
    }
}

/// Next utterance after `cursor` and the advanced cursor, wrapping at the end.
pub fn emit_utterance(script: &CaregiverScript, cursor: usize) -> (Vec<u32>, usize) {
    let n = script.utterances.len();
    let i = cursor % n;
    (script.utterances[i].clone(), (i + 1) % n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Behavior {
    Idle,
    Approach,
    Feed,
    Talk,
    ShowToy,
    Respond,
}

/// Every allowed behavior transition.
pub const BEHAVIOR_EDGES: [(Behavior, Behavior); 14] = {
    use Behavior::*;
    [
        (Idle, Approach),
        (Idle, Talk),
        (Idle, ShowToy),
        (Idle, Respond),
        (Approach, Feed),
        (Approach, Idle),
        (Feed, Idle),
        (Feed, Approach),
        (Talk, Idle),
        (Talk, Approach),
        (ShowToy, Idle),
        (ShowToy, Approach),
        (Respond, Idle),
        (Respond, Approach),
    ]
};

impl Behavior {
    pub const ALL: [Behavior; 6] =
        [Behavior::Idle, Behavior::Approach, Behavior::Feed, Behavior::Talk, Behavior::ShowToy, Behavior::Respond];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Behavior::Idle => "idle",
            Behavior::Approach => "approach",
            Behavior::Feed => "feed",
            Behavior::Talk => "talk",
            Behavior::ShowToy => "show_toy",
            Behavior::Respond => "respond",
        }
    }

    pub fn can_transition(self, to: Behavior) -> bool {
        self == to || BEHAVIOR_EDGES.contains(&(self, to))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaregiverState {
    /// Center of the hand sphere; the arm capsule extends straight up from it.
    pub position: Vec3,
    pub home: Vec3,
    pub behavior: Behavior,
    /// Ticks spent in the current behavior.
    pub behavior_ticks: u64,
    pub utterance_cursor: usize,
    /// Consecutive ticks of agent vocalization above threshold.
    pub vocal_ticks: u64,
    /// Base tick of each routine's next firing.
    pub next_base: Vec<u64>,
    /// Jittered firing tick derived from `next_base`.
    pub next_fire: Vec<u64>,
    /// Routine being performed, for timed behaviors.
    pub routine: Option<usize>,
}

impl CaregiverState {
    pub fn new(script: &CaregiverScript, rng: &SimRng, home: Vec3, tick: u64) -> Self {
        let next_base: Vec<u64> = script
            .routines
            .iter()
            .map(|r| tick + seconds_to_ticks(r.schedule.offset_s))
            .collect();
        let next_fire = next_base.iter().enumerate().map(|(i, b)| firing_tick(rng, script, i, *b)).collect();
        Self {
            position: home,
            home,
            behavior: Behavior::Idle,
            behavior_ticks: 0,
            utterance_cursor: 0,
            vocal_ticks: 0,
            next_base,
            next_fire,
            routine: None,
        }
    }

    /// Seconds spent in the current behavior.
    pub fn behavior_time(&self) -> f64 {
        crate::sim_time(self.behavior_ticks)
    }

    pub fn capsule(&self, params: &CaregiverParams) -> (Vec3, Vec3, f64) {
        (self.position, self.position + Vec3::z() * params.arm_length, params.tip_radius)
    }
}

pub fn seconds_to_ticks(s: f64) -> u64 {
    libm::round(s * TICKS_PER_SECOND as f64) as u64
}

/// Tick at which routine `index` fires for a given base tick.
pub fn firing_tick(rng: &SimRng, script: &CaregiverScript, index: usize, base: u64) -> u64 {
    let jitter = script.routines[index].schedule.jitter_s;
    if jitter <= 0.0 {
        return base;
    }
    let mut draw = rng.at(base, Stream::Caregiver);
    let mut u = 0.0;
    for _ in 0..=index {
        u = draw.unit_f64();
    }
    base + seconds_to_ticks(u * jitter)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Interaction {
    /// Energy delivered this tick.
    Feed(f64),
    Utterance(Vec<u32>),
    /// Carries a toy toward a world position.
    MoveToy { id: u32, target: Vec3 },
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CaregiverCommand {
    /// m/s, applied to the caregiver's hand this tick.
    pub velocity: Vec3,
    pub interact: Option<Interaction>,
}

/// Face geometry the caregiver aims at: head center, anterior direction and
/// head radius.
fn face(world: &WorldState) -> (Vec3, Vec3, f64) {
    let model = world.model();
    let head = model.head_link();
    let pose = world.body.link_poses()[head];
    let link = &model.links[head];
    (pose.transform_point(&link.seg_a), pose.rotation * Vec3::x(), link.radius)
}

/// Whether the caregiver's hand touches the agent's head.
pub fn touching_head(world: &WorldState, state: &CaregiverState, params: &CaregiverParams) -> bool {
    let (center, _, r) = face(world);
    (state.position - center).norm() <= r + params.tip_radius + params.contact_tolerance
}

fn feed_target(world: &WorldState, params: &CaregiverParams) -> Vec3 {
    let (center, anterior, r) = face(world);
    // slightly inside the head so the face sensors register the bottle
    center + anterior * (r + params.tip_radius - 0.003)
}

fn step_toward(from: &Vec3, to: &Vec3, speed: f64, dt: f64) -> (Vec3, bool) {
    let delta = to - from;
    let dist = delta.norm();
    if dist <= speed * dt {
        (delta / dt, true)
    } else {
        (delta * (speed / dist), false)
    }
}

/// One tick of the caregiver behavior machine. Deterministic in the world
/// state; only scheduled routine jitter draws from the caregiver RNG stream.
pub fn caregiver_policy(
    world: &WorldState,
    state: &CaregiverState,
    stage: &StageParams,
    dt: f64,
) -> (CaregiverState, CaregiverCommand) {
    let mut next = state.clone();
    let mut cmd = CaregiverCommand::default();
    let Some(script) = world.caregiver_script() else {
        return (next, cmd);
    };
    let p = &script.params;
    let energy = world.intero.energy;
    let tick = world.tick;

    if world.vocal_output > p.vocal_threshold {
        next.vocal_ticks += 1;
    } else {
        next.vocal_ticks = 0;
    }
    let vocal_needed = seconds_to_ticks(p.vocal_duration_s).max(1);
    let hungry = energy < p.feed_threshold && !world.umbilical;

    let mut due = None;
    for i in 0..script.routines.len() {
        if tick >= next.next_fire[i] {
            let period = seconds_to_ticks(script.routines[i].schedule.period_s).max(1);
            let rng = world.rng();
            while next.next_fire[i] <= tick {
                next.next_base[i] += period;
                next.next_fire[i] = firing_tick(&rng, script, i, next.next_base[i]);
            }
            if due.is_none() && stage.caregiver_routines.iter().any(|r| *r == script.routines[i].id) {
                due = Some(i);
            }
        }
    }

    let elapsed = |s: &CaregiverState, secs: f64| s.behavior_ticks + 1 >= seconds_to_ticks(secs).max(1);
    let target = match next.behavior {
        Behavior::Idle => {
            if hungry {
                Behavior::Approach
            } else if next.vocal_ticks >= vocal_needed {
                Behavior::Respond
            } else if let Some(i) = due {
                next.routine = Some(i);
                match script.routines[i].behavior {
                    RoutineBehavior::Talk => Behavior::Talk,
                    RoutineBehavior::ShowToy => Behavior::ShowToy,
                }
            } else {
                Behavior::Idle
            }
        }
        Behavior::Approach => {
            if energy >= p.feed_stop || world.umbilical {
                Behavior::Idle
            } else if touching_head(world, &next, p) {
                Behavior::Feed
            } else {
                Behavior::Approach
            }
        }
        Behavior::Feed => {
            if energy >= p.feed_stop || world.umbilical {
                Behavior::Idle
            } else if !touching_head(world, &next, p) {
                Behavior::Approach
            } else {
                Behavior::Feed
            }
        }
        Behavior::Talk | Behavior::ShowToy | Behavior::Respond if hungry => Behavior::Approach,
        Behavior::Talk | Behavior::ShowToy => {
            let duration = next.routine.map_or(0.0, |i| script.routines[i].params.duration_s);
            if elapsed(&next, duration) {
                Behavior::Idle
            } else {
                next.behavior
            }
        }
        Behavior::Respond => {
            if elapsed(&next, p.respond_duration_s) {
                Behavior::Idle
            } else {
                Behavior::Respond
            }
        }
    };
    debug_assert!(next.behavior.can_transition(target));
    let entered = target != next.behavior;
    if entered {
        next.behavior = target;
        next.behavior_ticks = 0;
        if !matches!(target, Behavior::Talk | Behavior::ShowToy) {
            next.routine = None;
        }
        if target == Behavior::Respond {
            next.vocal_ticks = 0;
        }
    } else {
        next.behavior_ticks += 1;
    }

    let (center, anterior, r) = face(world);
    let goal = match next.behavior {
        Behavior::Idle | Behavior::Talk => next.home,
        Behavior::Approach | Behavior::Feed => feed_target(world, p),
        Behavior::Respond => center + anterior * (r + p.respond_distance),
        Behavior::ShowToy => center + anterior * (r + p.show_distance),
    };
    let (velocity, _) = step_toward(&next.position, &goal, p.approach_speed, dt);
    cmd.velocity = velocity;

    if entered && matches!(next.behavior, Behavior::Talk | Behavior::Respond) {
        let (tokens, cursor) = emit_utterance(script, next.utterance_cursor);
        next.utterance_cursor = cursor;
        cmd.interact = Some(Interaction::Utterance(tokens));
    } else if next.behavior == Behavior::Feed && energy < p.feed_stop {
        cmd.interact = Some(Interaction::Feed(p.feed_rate * dt));
    } else if next.behavior == Behavior::ShowToy {
        if let Some(toy) = world.objects.iter().find(|o| o.has_tag("toy") && !o.is_static()) {
            let hand = next.position + velocity * dt;
            cmd.interact = Some(Interaction::MoveToy { id: toy.id, target: hand - Vec3::z() * 0.08 });
        }
    }
    next.position += velocity * dt;
    (next, cmd)
}

/// Default home position when the scene does not give one.
pub fn default_home() -> Vec3 {
    vec3([0.0, 0.5, 0.9])
}
