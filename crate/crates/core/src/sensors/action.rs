use thiserror::Error;

use crate::body::{BodyModel, EYE_CHANNELS, MUSCLE_CHANNELS};
use crate::development::StageParams;

/// Muscle plus eye channels.
pub const ACTION_CHANNELS: usize = MUSCLE_CHANNELS + EYE_CHANNELS;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("action must have {expected} channels, got {found}")]
    Length { expected: usize, found: usize },
    #[error("action channel {channel} is not finite")]
    NonFinite { channel: usize },
}

/// Normalized per-tick motor command. Values are clamped into `[-1, 1]` on
/// ingestion; non-finite values are rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    pub muscle: [f64; MUSCLE_CHANNELS],
    /// Yaw, pitch and torsion velocity commands.
    pub eye: [f64; EYE_CHANNELS],
}

impl Default for Action {
    fn default() -> Self {
        Self::zero()
    }
}

impl Action {
    pub fn zero() -> Self {
        Self { muscle: [0.0; MUSCLE_CHANNELS], eye: [0.0; EYE_CHANNELS] }
    }

    /// Builds an action from `ACTION_CHANNELS` raw values, muscles first.
    pub fn from_channels(values: &[f64]) -> Result<Self, ActionError> {
        if values.len() != ACTION_CHANNELS {
            return Err(ActionError::Length { expected: ACTION_CHANNELS, found: values.len() });
        }
        if let Some(channel) = values.iter().position(|v| !v.is_finite()) {
            return Err(ActionError::NonFinite { channel });
        }
        let mut out = Self::zero();
        for (dst, v) in out.muscle.iter_mut().chain(out.eye.iter_mut()).zip(values) {
            *dst = v.clamp(-1.0, 1.0);
        }
        Ok(out)
    }

    pub fn channels(&self) -> [f64; ACTION_CHANNELS] {
        let mut out = [0.0; ACTION_CHANNELS];
        for (dst, v) in out.iter_mut().zip(self.muscle.iter().chain(self.eye.iter())) {
            *dst = *v;
        }
        out
    }

    /// First non-finite channel, if any. Actions built through
    /// [`Action::from_channels`] never have one.
    pub fn validate(&self) -> Result<(), ActionError> {
        match self.channels().iter().position(|v| !v.is_finite()) {
            Some(channel) => Err(ActionError::NonFinite { channel }),
            None => Ok(()),
        }
    }
}

/// Physical command derived from an [`Action`].
#[derive(Clone, Debug, PartialEq)]
pub struct MotorCommand {
    /// N·m per channel.
    pub torques: [f64; MUSCLE_CHANNELS],
    /// rad/s for yaw, pitch, torsion.
    pub eye_velocity: [f64; EYE_CHANNELS],
}

/// Scales the normalized action into joint torques gated by the stage's motor
/// strength. Eye velocities are not strength-gated.
pub fn apply_action(action: &Action, stage: &StageParams, model: &BodyModel) -> MotorCommand {
    motor_command(action, stage.strength_factor, model)
}

/// [`apply_action`] with an explicit strength factor.
pub fn motor_command(action: &Action, strength: f64, model: &BodyModel) -> MotorCommand {
    let mut torques = [0.0; MUSCLE_CHANNELS];
    for ((t, a), dof) in torques.iter_mut().zip(&action.muscle).zip(&model.dofs) {
        *t = a.clamp(-1.0, 1.0) * dof.max_torque * strength;
    }
    let mut eye_velocity = [0.0; EYE_CHANNELS];
    for (e, a) in eye_velocity.iter_mut().zip(&action.eye) {
        *e = a.clamp(-1.0, 1.0) * model.eyes.max_speed;
    }
    MotorCommand { torques, eye_velocity }
}
