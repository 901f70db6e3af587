use crate::body::MUSCLE_CHANNELS;
use crate::sensors::retina::{sense_retina, RetinaImage, FOVEA_SIZE, PERIPHERY_SIZE};
use crate::sensors::touch::{sense_touch, TouchBits};
use crate::sensors::vestibular::sense_vestibular;
use crate::world::WorldState;

pub const PROPRIO_CHANNELS: usize = 2 * MUSCLE_CHANNELS;
pub const VESTIBULAR_CHANNELS: usize = 6;
pub const INTERO_CHANNELS: usize = 4;

/// Everything the agent senses at one tick. Continuous channels are stored
/// at wire precision so that encoding is lossless.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub tick: u64,
    pub fovea: RetinaImage,
    pub periphery: RetinaImage,
    pub touch: TouchBits,
    /// 53 joint angles then 53 joint velocities.
    pub proprio: [f32; PROPRIO_CHANNELS],
    pub eye: [f32; 3],
    pub vestibular: [f32; VESTIBULAR_CHANNELS],
    /// Energy followed by reserved zeros.
    pub intero: [f32; INTERO_CHANNELS],
}

impl Observation {
    pub fn blank(tick: u64) -> Self {
        Self {
            tick,
            fovea: RetinaImage::black(FOVEA_SIZE),
            periphery: RetinaImage::black(PERIPHERY_SIZE),
            touch: TouchBits::default(),
            proprio: [0.0; PROPRIO_CHANNELS],
            eye: [0.0; 3],
            vestibular: [0.0; VESTIBULAR_CHANNELS],
            intero: [0.0; INTERO_CHANNELS],
        }
    }

    /// Samples every sense from `world` with the given visual acuity.
    pub fn sense(world: &WorldState, acuity: f64) -> Self {
        let (fovea, periphery) = sense_retina(world, acuity);
        let body = &world.body;
        let mut proprio = [0.0; PROPRIO_CHANNELS];
        for (i, (q, qd)) in body.joint_angles().iter().zip(body.joint_velocities()).enumerate() {
            proprio[i] = *q as f32;
            proprio[MUSCLE_CHANNELS + i] = *qd as f32;
        }
        Self {
            tick: world.tick,
            fovea,
            periphery,
            touch: sense_touch(world, &world.model().touch),
            proprio,
            eye: body.eye_angles().map(|e| e as f32),
            vestibular: sense_vestibular(world).map(|v| v as f32),
            intero: [world.intero.energy as f32, 0.0, 0.0, 0.0],
        }
    }

    pub fn energy(&self) -> f32 {
        self.intero[0]
    }

    pub fn is_finite(&self) -> bool {
        self.proprio.iter().chain(&self.eye).chain(&self.vestibular).chain(&self.intero).all(|v| v.is_finite())
    }
}
