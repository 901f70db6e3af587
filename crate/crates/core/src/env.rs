//! Developmental environment: a world plus its schedule, caregiver policy and
//! event queue. This is what a session steps once per tick.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use thiserror::Error;

use crate::caregiver::{caregiver_policy, CaregiverCommand, CaregiverScript, Interaction};
use crate::development::{advance_age, DevelopmentError, Schedule, StageParams};
use crate::protocol::Event;
use crate::scene::{SceneError, SceneSpec};
use crate::sensors::{Action, Observation};
use crate::world::{StepError, WorldState};
use crate::DT;

/// A scene resolved together with its caregiver script.
#[derive(Clone, Debug)]
pub struct SceneBundle {
    pub spec: SceneSpec,
    pub script: Option<Arc<CaregiverScript>>,
}

/// Looks up scenes by id when the schedule moves the agent between them.
pub trait SceneProvider: Send + Sync {
    fn scene(&self, scene_id: &str) -> Option<SceneBundle>;
}

impl SceneProvider for Vec<SceneBundle> {
    fn scene(&self, scene_id: &str) -> Option<SceneBundle> {
        self.iter().find(|b| b.spec.scene_id == scene_id).cloned()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvOptions {
    /// Simulated developmental seconds per simulated physics second.
    pub time_scale: f64,
    /// Age at tick 0, in days.
    pub age0: f64,
    pub caregiver: bool,
}

impl Default for EnvOptions {
    fn default() -> Self {
        Self { time_scale: 1.0, age0: 0.0, caregiver: true }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("time_scale must be >= 1, got {0}")]
    TimeScale(f64),
    #[error(transparent)]
    Development(#[from] DevelopmentError),
    #[error("scene `{0}` required by the schedule is not available")]
    MissingScene(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Step(#[from] StepError),
}

pub struct Environment {
    world: WorldState,
    schedule: Schedule,
    provider: Arc<dyn SceneProvider>,
    options: EnvOptions,
    stage: StageParams,
    age: f64,
    pending: Vec<Event>,
}

impl Environment {
    /// Wraps `world`, switching to the scene the schedule requires at `age0`.
    pub fn new(
        mut world: WorldState,
        schedule: Schedule,
        provider: Arc<dyn SceneProvider>,
        options: EnvOptions,
    ) -> Result<Self, EnvError> {
        if !(options.time_scale.is_finite() && options.time_scale >= 1.0) {
            return Err(EnvError::TimeScale(options.time_scale));
        }
        let age = advance_age(options.age0, world.tick, options.time_scale);
        let stage = schedule.stage_at(age)?;
        let mut pending = alloc::vec![Event::StageChange { stage_id: stage.stage_id.clone() }];
        if stage.scene_id != world.scene_id {
            let bundle = provider.scene(&stage.scene_id).ok_or_else(|| EnvError::MissingScene(stage.scene_id.clone()))?;
            world.change_scene(&bundle.spec, bundle.script)?;
            pending.push(Event::SceneChange { scene_id: stage.scene_id.clone() });
        }
        world.strength = stage.strength_factor;
        if !options.caregiver {
            world.dismiss_caregiver();
        }
        Ok(Self { world, schedule, provider, options, stage, age, pending })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }

    pub fn stage(&self) -> &StageParams {
        &self.stage
    }

    pub fn options(&self) -> &EnvOptions {
        &self.options
    }

    pub fn tick(&self) -> u64 {
        self.world.tick
    }

    pub fn age_days(&self) -> f64 {
        self.age
    }

    /// Events accumulated for the current tick, oldest first.
    pub fn take_events(&mut self) -> Vec<Event> {
        core::mem::take(&mut self.pending)
    }

    pub fn push_event(&mut self, event: Event) {
        self.pending.push(event);
    }

    /// The agent's senses at the current tick, at the stage's acuity.
    pub fn observe(&self) -> Observation {
        Observation::sense(&self.world, self.stage.acuity_factor)
    }

    /// Runs the caregiver, steps the world and applies developmental
    /// transitions. A rejected action leaves the environment unchanged.
    pub fn step(&mut self, action: &Action) -> Result<(), EnvError> {
        action.validate().map_err(StepError::from)?;
        let mut events = Vec::new();
        let (next_caregiver, cmd) = match &self.world.caregiver {
            Some(state) => {
                let (next, cmd) = caregiver_policy(&self.world, state, &self.stage, DT);
                if next.behavior != state.behavior {
                    events.push(Event::CaregiverBehavior { behavior: next.behavior.code() });
                }
                if let Some(Interaction::Utterance(tokens)) = &cmd.interact {
                    events.push(Event::Utterance { tokens: tokens.clone() });
                }
                (Some(next), cmd)
            }
            None => (None, CaregiverCommand::default()),
        };
        let previous = self.world.caregiver.clone();
        if let Some(next) = next_caregiver.clone() {
            // position advances inside the world step
            let mut staged = next;
            staged.position = previous.as_ref().map_or(staged.position, |p| p.position);
            self.world.caregiver = Some(staged);
        }
        if let Err(e) = self.world.step(action, &cmd) {
            self.world.caregiver = previous;
            return Err(e.into());
        }
        self.pending.extend(events);
        self.advance_development()
    }

    fn advance_development(&mut self) -> Result<(), EnvError> {
        let before = self.age;
        self.age = advance_age(self.options.age0, self.world.tick, self.options.time_scale);
        if before < 0.0 && self.age >= 0.0 {
            self.pending.push(Event::Birth);
        }
        let stage = self.schedule.stage_at(self.age)?;
        if stage.index != self.stage.index {
            self.pending.push(Event::StageChange { stage_id: stage.stage_id.clone() });
        }
        if stage.scene_id != self.world.scene_id {
            let bundle =
                self.provider.scene(&stage.scene_id).ok_or_else(|| EnvError::MissingScene(stage.scene_id.clone()))?;
            self.world.change_scene(&bundle.spec, bundle.script)?;
            if !self.options.caregiver {
                self.world.dismiss_caregiver();
            }
            self.pending.push(Event::SceneChange { scene_id: stage.scene_id.clone() });
        }
        self.world.strength = stage.strength_factor;
        self.stage = stage;
        Ok(())
    }
}
