//! The agent's embodiment interface: motor command mapping and every sense
//! the agent observes each tick.

mod action;
mod intero;
mod observation;
mod retina;
mod touch;
mod vestibular;

pub use action::{apply_action, motor_command, Action, ActionError, MotorCommand, ACTION_CHANNELS};
pub use intero::{update_interoception, InteroState, DEFAULT_DECAY_RATE};
pub use observation::{Observation, INTERO_CHANNELS, PROPRIO_CHANNELS, VESTIBULAR_CHANNELS};
pub use retina::{
    effective_resolution, render_view, sample_lines, sense_retina, RetinaImage, RetinaSpec, FOVEA_FOV_DEG, FOVEA_SIZE,
    PERIPHERY_FOV_DEG, PERIPHERY_SIZE,
};
pub use touch::{sense_touch, TouchBits, TOUCH_BYTES};
pub use vestibular::sense_vestibular;
