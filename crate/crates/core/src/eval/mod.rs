//! Looking-time evaluation: the infant-controlled habituation procedure,
//! gaze hit-testing and the rod-and-box perceptual-completion scenario.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;
use crate::protocol::Event;
use crate::raycast::{cast, HitTarget, RayFilter};
use crate::scene::SceneError;
use crate::sensors::{Action, Observation};
use crate::world::{StepError, WorldState};

pub mod oracle;
mod rod_and_box;

pub use rod_and_box::{
    display_objects, run_rod_and_box, Display, RodAndBoxConfig, Stimulus, BROKEN_ROD, COMPLETE_ROD, OCCLUDED_ROD,
};

/// Scenario ids the harness can run.
pub const SCENARIOS: &[&str] = &["rod_and_box"];

/// Infant-controlled habituation rule: habituated once the mean looking time
/// of the last `window` trials drops below `ratio` times the mean of the
/// first `window`.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(default)]
pub struct HabituationCriterion {
    pub window: usize,
    pub ratio: f64,
    pub min_trials: usize,
    pub max_trials: usize,
    /// Continuous look-away that ends a trial, seconds.
    pub lookaway_end: f64,
    /// Longest trial, seconds.
    pub trial_cap: f64,
}

impl Default for HabituationCriterion {
    fn default() -> Self {
        Self { window: 3, ratio: 0.5, min_trials: 6, max_trials: 14, lookaway_end: 2.0, trial_cap: 60.0 }
    }
}

impl HabituationCriterion {
    pub fn validate(&self) -> Result<(), EvalConfigError> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(EvalConfigError("criterion.ratio must be in (0, 1)"));
        }
        if !(self.window >= 1 && self.window <= self.min_trials && self.min_trials <= self.max_trials) {
            return Err(EvalConfigError("criterion needs 1 <= window <= min_trials <= max_trials"));
        }
        if !(self.lookaway_end > 0.0 && self.trial_cap >= self.lookaway_end && self.trial_cap.is_finite()) {
            return Err(EvalConfigError("criterion needs 0 < lookaway_end <= trial_cap"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("invalid evaluation config: {0}")]
pub struct EvalConfigError(pub &'static str);

/// Whether the looking times so far meet the criterion.
pub fn habituation_reached(looking_times: &[f64], criterion: &HabituationCriterion) -> bool {
    let n = looking_times.len();
    let w = criterion.window;
    if w == 0 || n < criterion.min_trials || n < w {
        return false;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    mean(&looking_times[n - w..]) < criterion.ratio * mean(&looking_times[..w])
}

/// First trial (1-based) at which the criterion is met, looking no further
/// than `max_trials`.
pub fn habituation_point(looking_times: &[f64], criterion: &HabituationCriterion) -> Option<usize> {
    let limit = looking_times.len().min(criterion.max_trials);
    (1..=limit).find(|&k| habituation_reached(&looking_times[..k], criterion))
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TrialEnd {
    LookAway,
    Cap,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Trial {
    /// 1-based within its phase.
    pub index: usize,
    pub stimulus_id: String,
    pub start_tick: u64,
    /// Seconds, always `dt × (gaze-on ticks)`.
    pub looking_time: f64,
    pub ended_by: TrialEnd,
    /// Gaze-on flag for every tick of the trial. Written to CSV, not JSON.
    #[serde(skip)]
    pub gaze: Vec<bool>,
}

impl Trial {
    pub fn ticks(&self) -> usize {
        self.gaze.len()
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ReportFlag {
    NotHabituated,
    NoLooking,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct HabituationReport {
    pub scenario: String,
    pub seed: u64,
    pub criterion: HabituationCriterion,
    pub habituation_trials: Vec<Trial>,
    pub habituated_at: Option<usize>,
    pub test_trials: Vec<Trial>,
    /// Share of test looking time spent on the broken rod.
    pub novelty_preference: Option<f64>,
    pub flags: Vec<ReportFlag>,
}

impl HabituationReport {
    pub fn trials(&self) -> impl Iterator<Item = &Trial> {
        self.habituation_trials.iter().chain(&self.test_trials)
    }

    pub fn trials_mut(&mut self) -> impl Iterator<Item = &mut Trial> {
        self.habituation_trials.iter_mut().chain(&mut self.test_trials)
    }

    /// Total looking time on each test stimulus, `(novel, familiar)`.
    pub fn test_looking(&self) -> (f64, f64) {
        let sum = |id: &str| self.test_trials.iter().filter(|t| t.stimulus_id == id).map(|t| t.looking_time).sum();
        (sum(BROKEN_ROD), sum(COMPLETE_ROD))
    }
}

/// `novel / (novel + familiar)`, undefined when nothing was looked at.
pub fn novelty_preference(novel: f64, familiar: f64) -> Option<f64> {
    let total = novel + familiar;
    (total > 0.0).then(|| novel / total)
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GazeMode {
    /// The central fovea ray hits a stimulus object.
    #[default]
    Ray,
    /// Any stimulus object comes within `half_angle_deg` of the gaze axis.
    Cone { half_angle_deg: f64 },
}

/// Whether the agent is looking at an object carrying any of `tags`.
pub fn gaze_on_stimulus<S: AsRef<str>>(world: &WorldState, tags: &[S], mode: GazeMode) -> bool {
    let eye = world.eye_pose();
    let dir = eye.rotation * Vec3::x();
    let ray = match cast(world, &eye.position, &dir, &RayFilter::from_eye(world)) {
        Ok(Some(hit)) => match hit.target {
            HitTarget::Object(id) => world.object(id).is_some_and(|o| o.has_any_tag(tags)),
            _ => false,
        },
        _ => false,
    };
    match mode {
        GazeMode::Ray => ray,
        GazeMode::Cone { half_angle_deg } => {
            ray || world.objects.iter().filter(|o| o.has_any_tag(tags)).any(|o| {
                let to = o.pose.position - eye.position;
                let dist = to.norm();
                if dist <= o.bounding_radius() {
                    return true;
                }
                let angle = libm::acos((to.dot(&dir) / dist).clamp(-1.0, 1.0));
                let radius = libm::asin((o.bounding_radius() / dist).min(1.0));
                angle - radius <= half_angle_deg.to_radians()
            })
        }
    }
}

/// Eye yaw and pitch that put `point` on the gaze axis for the current head
/// pose, unclamped.
pub fn gaze_angles_to(world: &WorldState, point: &Vec3) -> (f64, f64) {
    let model = world.model();
    let head = world.body.link_poses()[model.eyes.link];
    let eye = head.transform_point(&model.eyes.offset);
    let d = head.rotation.inverse() * (point - eye);
    (libm::atan2(d.y, d.x), libm::atan2(d.z, libm::hypot(d.x, d.y)))
}

/// The agent side of an evaluation: receives the tick's events and
/// observation, answers with an action.
pub trait AgentLink {
    type Error;

    fn act(&mut self, events: &[Event], obs: &Observation) -> Result<Action, Self::Error>;
}

impl<A: AgentLink + ?Sized> AgentLink for &mut A {
    type Error = A::Error;

    fn act(&mut self, events: &[Event], obs: &Observation) -> Result<Action, Self::Error> {
        (**self).act(events, obs)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError<E> {
    #[error("agent failed: {0}")]
    Agent(E),
    #[error(transparent)]
    Config(#[from] EvalConfigError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Step(#[from] StepError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn criterion_validation() {
        assert!(HabituationCriterion::default().validate().is_ok());
        let c = HabituationCriterion { ratio: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = HabituationCriterion { window: 7, ..Default::default() };
        assert!(c.validate().is_err());
        let c = HabituationCriterion { max_trials: 5, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn too_few_trials_never_habituate() {
        let c = HabituationCriterion::default();
        assert!(!habituation_reached(&[60.0, 60.0, 60.0, 1.0, 1.0], &c));
        assert!(habituation_reached(&[60.0, 60.0, 60.0, 10.0, 10.0, 10.0], &c));
    }

    #[test]
    fn preference_needs_looking() {
        assert_eq!(novelty_preference(0.0, 0.0), None);
        assert_eq!(novelty_preference(3.0, 1.0), Some(0.75));
    }

    proptest! {
        #[test]
        fn scale_invariant(times in proptest::collection::vec(0.1f64..60.0, 6..14), k in 0.01f64..100.0) {
            let c = HabituationCriterion::default();
            let scaled: Vec<f64> = times.iter().map(|t| t * k).collect();
            // both sides of the comparison scale by k, up to rounding at the boundary
            let n = times.len();
            let first: f64 = times[..3].iter().sum::<f64>() / 3.0;
            let last: f64 = times[n - 3..].iter().sum::<f64>() / 3.0;
            prop_assume!((last - 0.5 * first).abs() > 1e-9 * first);
            prop_assert_eq!(habituation_reached(&times, &c), habituation_reached(&scaled, &c));
        }
    }
}
