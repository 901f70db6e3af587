//! Deterministic simulation kernel for developmental-robotics experiments.
//!
//! An infant body (16 capsule links, 53 muscle channels, 3 eye channels) lives
//! in a staged scene (womb or nursery) next to a scripted caregiver. The
//! kernel steps the world at a fixed 50 Hz, renders the agent's senses, maps
//! simulated age onto developmental stage parameters and runs the
//! habituation-based rod-and-box evaluation. The binary lockstep protocol
//! codec also lives here so that servers and clients share one definition.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches files,
//! sockets or the command line lives in the companion `sedro` crate.

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod body;
pub mod caregiver;
pub mod codec;
pub mod development;
mod dynamics;
pub mod env;
pub mod eval;
pub mod math;
pub mod protocol;
pub mod raycast;
pub mod replay;
pub mod rng;
pub mod scene;
pub mod sensors;
pub mod world;

pub use body::{BodyModel, BodySpec, EYE_CHANNELS, LINK_COUNT, MUSCLE_CHANNELS};
pub use env::{Environment, EnvOptions};
pub use scene::{SceneObject, SceneSpec, Shape};
pub use sensors::{Action, Observation};
pub use world::{BodyState, StepError, WorldState};

/// Simulation steps per simulated second.
pub const TICKS_PER_SECOND: u64 = 50;

/// Fixed step length in seconds (1/50 s).
pub const DT: f64 = 1.0 / TICKS_PER_SECOND as f64;

/// Simulated time at `tick`, computed as an exact rational division so that
/// `sim_time(n) == n × dt` holds for every tick without accumulated drift.
#[inline]
pub fn sim_time(tick: u64) -> f64 {
    tick as f64 / TICKS_PER_SECOND as f64
}
