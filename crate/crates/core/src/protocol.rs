//! Lockstep wire protocol: frame layout, handshake, and the OBS/ACT/EVENT/ERR
//! payload codecs. All integers and floats are little-endian with no padding.
//!
//! A frame is `length: u32` (whole frame, header included), `type: u8`,
//! `tick: u64`, then the payload.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::body::MUSCLE_CHANNELS;
use crate::codec::{ByteReader, ByteWriter, DecodeError};
use crate::sensors::{
    Action, ActionError, Observation, RetinaImage, TouchBits, ACTION_CHANNELS, FOVEA_SIZE, INTERO_CHANNELS,
    PERIPHERY_SIZE, PROPRIO_CHANNELS, TOUCH_BYTES, VESTIBULAR_CHANNELS,
};

pub const MAGIC: [u8; 4] = *b"SDRO";
pub const HEADER_LEN: usize = 13;
/// Versions this build speaks, ascending.
pub const SUPPORTED_VERSIONS: &[u16] = &[1];
/// Frames above this size are rejected before their payload is read.
pub const MAX_FRAME_LEN: u32 = 1 << 20;

pub const FOVEA_BYTES: usize = FOVEA_SIZE * FOVEA_SIZE * 3;
pub const PERIPHERY_BYTES: usize = PERIPHERY_SIZE * PERIPHERY_SIZE * 3;
pub const OBS_PAYLOAD_LEN: usize = FOVEA_BYTES
    + PERIPHERY_BYTES
    + TOUCH_BYTES
    + 4 * (PROPRIO_CHANNELS + 3 + VESTIBULAR_CHANNELS + INTERO_CHANNELS);
pub const ACT_PAYLOAD_LEN: usize = 4 * ACTION_CHANNELS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameType {
    Hello = 1,
    Obs = 2,
    Act = 3,
    Reset = 4,
    Event = 5,
    Bye = 6,
    Err = 7,
}

impl FrameType {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            1 => Self::Hello,
            2 => Self::Obs,
            3 => Self::Act,
            4 => Self::Reset,
            5 => Self::Event,
            6 => Self::Bye,
            7 => Self::Err,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum ErrorCode {
    BadMagic = 1,
    NoMutualVersion = 2,
    BadFrame = 3,
    PayloadSize = 4,
    UnexpectedFrame = 5,
    Timeout = 6,
    Internal = 7,
    InvalidAction = 8,
}

impl ErrorCode {
    pub fn from_u16(v: u16) -> Option<Self> {
        Some(match v {
            1 => Self::BadMagic,
            2 => Self::NoMutualVersion,
            3 => Self::BadFrame,
            4 => Self::PayloadSize,
            5 => Self::UnexpectedFrame,
            6 => Self::Timeout,
            7 => Self::Internal,
            8 => Self::InvalidAction,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("no mutual protocol version (peer offers {peer:?}, we support {ours:?})")]
    NoMutualVersion { peer: Vec<u16>, ours: Vec<u16> },
    #[error("unknown frame type {0}")]
    UnknownType(u8),
    #[error("frame length {0} is shorter than the header")]
    ShortFrame(u32),
    #[error("frame length {0} exceeds the limit")]
    FrameTooLarge(u32),
    #[error("{kind} payload: expected {expected} bytes, got {actual}")]
    PayloadSize { kind: &'static str, expected: usize, actual: usize },
    #[error("expected {expected:?} frame, got {actual:?}")]
    Unexpected { expected: FrameType, actual: FrameType },
    #[error("tick mismatch: expected {expected}, got {actual}")]
    TickMismatch { expected: u64, actual: u64 },
    #[error("malformed payload: {0}")]
    Decode(#[from] DecodeError),
    #[error("invalid action: {0}")]
    Action(#[from] ActionError),
    #[error("unknown event kind {0}")]
    UnknownEvent(u8),
    #[error("peer error {code:?}: {message}")]
    Peer { code: Option<ErrorCode>, message: String },
}

impl ProtocolError {
    /// Code to report to the peer for this error.
    pub fn code(&self) -> ErrorCode {
        match self {
            Self::BadMagic(_) => ErrorCode::BadMagic,
            Self::NoMutualVersion { .. } => ErrorCode::NoMutualVersion,
            Self::UnknownType(_) | Self::ShortFrame(_) | Self::Decode(_) | Self::UnknownEvent(_) => ErrorCode::BadFrame,
            Self::FrameTooLarge(_) | Self::PayloadSize { .. } => ErrorCode::PayloadSize,
            Self::Unexpected { .. } | Self::TickMismatch { .. } => ErrorCode::UnexpectedFrame,
            Self::Action(_) => ErrorCode::InvalidAction,
            Self::Peer { .. } => ErrorCode::Internal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameHeader {
    pub length: u32,
    pub kind: FrameType,
    pub tick: u64,
}

impl FrameHeader {
    pub fn payload_len(&self) -> usize {
        self.length as usize - HEADER_LEN
    }

    pub fn parse(bytes: &[u8; HEADER_LEN]) -> Result<Self, ProtocolError> {
        let length = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
        if length < HEADER_LEN as u32 {
            return Err(ProtocolError::ShortFrame(length));
        }
        if length > MAX_FRAME_LEN {
            return Err(ProtocolError::FrameTooLarge(length));
        }
        let kind = FrameType::from_u8(bytes[4]).ok_or(ProtocolError::UnknownType(bytes[4]))?;
        let mut t = [0u8; 8];
        t.copy_from_slice(&bytes[5..13]);
        Ok(Self { length, kind, tick: u64::from_le_bytes(t) })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameType,
    pub tick: u64,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: FrameType, tick: u64, payload: Vec<u8>) -> Self {
        Self { kind, tick, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_capacity(HEADER_LEN + self.payload.len());
        w.u32((HEADER_LEN + self.payload.len()) as u32).u8(self.kind as u8).u64(self.tick).bytes(&self.payload);
        w.into_inner()
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.len() < HEADER_LEN {
            return Err(DecodeError::Truncated { offset: bytes.len(), needed: HEADER_LEN - bytes.len() }.into());
        }
        let mut head = [0u8; HEADER_LEN];
        head.copy_from_slice(&bytes[..HEADER_LEN]);
        let h = FrameHeader::parse(&head)?;
        let rest = &bytes[HEADER_LEN..];
        if rest.len() < h.payload_len() {
            return Err(DecodeError::Truncated { offset: bytes.len(), needed: h.payload_len() - rest.len() }.into());
        }
        if rest.len() > h.payload_len() {
            return Err(DecodeError::Trailing(rest.len() - h.payload_len()).into());
        }
        Ok(Self { kind: h.kind, tick: h.tick, payload: rest.to_vec() })
    }

    pub fn expect(self, kind: FrameType) -> Result<Self, ProtocolError> {
        if self.kind == FrameType::Err && kind != FrameType::Err {
            let (code, message) = decode_error(&self.payload)?;
            return Err(ProtocolError::Peer { code: ErrorCode::from_u16(code), message });
        }
        if self.kind != kind {
            return Err(ProtocolError::Unexpected { expected: kind, actual: self.kind });
        }
        Ok(self)
    }
}

/// HELLO payload: magic then the offered versions.
pub fn encode_hello(versions: &[u16]) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(&MAGIC).u8(versions.len() as u8);
    for v in versions {
        w.u16(*v);
    }
    w.into_inner()
}

pub fn decode_hello(payload: &[u8]) -> Result<Vec<u16>, ProtocolError> {
    let mut r = ByteReader::new(payload);
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(ProtocolError::BadMagic([magic[0], magic[1], magic[2], magic[3]]));
    }
    let n = r.u8()?;
    let versions = (0..n).map(|_| r.u16()).collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Ok(versions)
}

/// Highest version both sides support.
pub fn negotiate(peer: &[u16], ours: &[u16]) -> Result<u16, ProtocolError> {
    peer.iter()
        .filter(|v| ours.contains(v))
        .max()
        .copied()
        .ok_or_else(|| ProtocolError::NoMutualVersion { peer: peer.to_vec(), ours: ours.to_vec() })
}

pub fn encode_error(code: ErrorCode, message: &str) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.u16(code as u16).bytes(message.as_bytes());
    w.into_inner()
}

pub fn decode_error(payload: &[u8]) -> Result<(u16, String), ProtocolError> {
    let mut r = ByteReader::new(payload);
    let code = r.u16()?;
    let text = r.take(r.remaining())?;
    let message = core::str::from_utf8(text).map_err(|_| DecodeError::Utf8(2))?;
    Ok((code, message.into()))
}

pub fn encode_observation(obs: &Observation) -> Vec<u8> {
    let mut w = ByteWriter::with_capacity(OBS_PAYLOAD_LEN);
    w.bytes(&obs.fovea.pixels).bytes(&obs.periphery.pixels).bytes(&obs.touch.0);
    for v in obs.proprio.iter().chain(&obs.eye).chain(&obs.vestibular).chain(&obs.intero) {
        w.f32(*v);
    }
    debug_assert_eq!(w.len(), OBS_PAYLOAD_LEN);
    w.into_inner()
}

pub fn decode_observation(tick: u64, payload: &[u8]) -> Result<Observation, ProtocolError> {
    if payload.len() != OBS_PAYLOAD_LEN {
        return Err(ProtocolError::PayloadSize { kind: "OBS", expected: OBS_PAYLOAD_LEN, actual: payload.len() });
    }
    let mut r = ByteReader::new(payload);
    let mut obs = Observation::blank(tick);
    obs.fovea = RetinaImage { size: FOVEA_SIZE, pixels: r.take(FOVEA_BYTES)?.to_vec() };
    obs.periphery = RetinaImage { size: PERIPHERY_SIZE, pixels: r.take(PERIPHERY_BYTES)?.to_vec() };
    let mut touch = [0u8; TOUCH_BYTES];
    touch.copy_from_slice(r.take(TOUCH_BYTES)?);
    obs.touch = TouchBits(touch);
    for v in obs.proprio.iter_mut().chain(obs.eye.iter_mut()).chain(obs.vestibular.iter_mut()).chain(obs.intero.iter_mut()) {
        *v = r.f32()?;
    }
    r.finish()?;
    Ok(obs)
}

/// ACT payload: 53 muscle then 3 eye channels as f32.
pub fn encode_action(action: &Action) -> Vec<u8> {
    let mut w = ByteWriter::with_capacity(ACT_PAYLOAD_LEN);
    for v in action.channels() {
        w.f32(v as f32);
    }
    w.into_inner()
}

/// Decodes and validates an ACT payload; out-of-range values are clamped.
pub fn decode_action(payload: &[u8]) -> Result<Action, ProtocolError> {
    if payload.len() != ACT_PAYLOAD_LEN {
        return Err(ProtocolError::PayloadSize { kind: "ACT", expected: ACT_PAYLOAD_LEN, actual: payload.len() });
    }
    let mut r = ByteReader::new(payload);
    let mut raw = [0.0f64; ACTION_CHANNELS];
    for v in raw.iter_mut() {
        *v = r.f32()? as f64;
    }
    Ok(Action::from_channels(&raw)?)
}

/// Out-of-band notifications sent before the OBS frame of the tick they
/// belong to.
#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Birth,
    StageChange { stage_id: String },
    Utterance { tokens: Vec<u32> },
    SceneChange { scene_id: String },
    StimulusOn { stimulus_id: u32, tags: Vec<String> },
    StimulusOff { stimulus_id: u32 },
    /// Eye angles that center the stimulus on the next tick. Evaluation hint
    /// for scripted agents.
    GazeTarget { stimulus_id: u32, yaw: f32, pitch: f32 },
    CaregiverBehavior { behavior: u8 },
}

impl Event {
    pub fn kind(&self) -> u8 {
        match self {
            Event::Birth => 1,
            Event::StageChange { .. } => 2,
            Event::Utterance { .. } => 3,
            Event::SceneChange { .. } => 4,
            Event::StimulusOn { .. } => 5,
            Event::StimulusOff { .. } => 6,
            Event::GazeTarget { .. } => 7,
            Event::CaregiverBehavior { .. } => 8,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.u8(self.kind());
        match self {
            Event::Birth => {}
            Event::StageChange { stage_id } => {
                w.str16(stage_id);
            }
            Event::Utterance { tokens } => {
                w.u16(tokens.len() as u16);
                for t in tokens {
                    w.u32(*t);
                }
            }
            Event::SceneChange { scene_id } => {
                w.str16(scene_id);
            }
            Event::StimulusOn { stimulus_id, tags } => {
                w.u32(*stimulus_id).u8(tags.len() as u8);
                for t in tags {
                    w.str16(t);
                }
            }
            Event::StimulusOff { stimulus_id } => {
                w.u32(*stimulus_id);
            }
            Event::GazeTarget { stimulus_id, yaw, pitch } => {
                w.u32(*stimulus_id).f32(*yaw).f32(*pitch);
            }
            Event::CaregiverBehavior { behavior } => {
                w.u8(*behavior);
            }
        }
        w.into_inner()
    }

    pub fn decode(payload: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = ByteReader::new(payload);
        let kind = r.u8()?;
        let event = match kind {
            1 => Event::Birth,
            2 => Event::StageChange { stage_id: r.str16()? },
            3 => {
                let n = r.u16()?;
                Event::Utterance { tokens: (0..n).map(|_| r.u32()).collect::<Result<_, _>>()? }
            }
            4 => Event::SceneChange { scene_id: r.str16()? },
            5 => {
                let stimulus_id = r.u32()?;
                let n = r.u8()?;
                Event::StimulusOn { stimulus_id, tags: (0..n).map(|_| r.str16()).collect::<Result<_, _>>()? }
            }
            6 => Event::StimulusOff { stimulus_id: r.u32()? },
            7 => Event::GazeTarget { stimulus_id: r.u32()?, yaw: r.f32()?, pitch: r.f32()? },
            8 => Event::CaregiverBehavior { behavior: r.u8()? },
            other => return Err(ProtocolError::UnknownEvent(other)),
        };
        r.finish()?;
        Ok(event)
    }
}

const _: () = assert!(OBS_PAYLOAD_LEN == 4332);
const _: () = assert!(ACT_PAYLOAD_LEN == 224);
const _: () = assert!(MUSCLE_CHANNELS * 2 == PROPRIO_CHANNELS);
