//! Session logs and deterministic replay.
//!
//! A log is `"SDLG"`, a `u16` format version and a header, followed by the
//! session's frames in wire encoding: for every tick the EVENT frames sent to
//! the agent, an OBS frame whose payload is the `u64` digest of the encoded
//! observation, and the agent's ACT frame. A final BYE frame carries one
//! status byte; a log without it was cut short.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::codec::{digest, ByteReader, ByteWriter, DecodeError};
use crate::env::{EnvError, Environment};
use crate::protocol::{decode_action, encode_observation, Event, Frame, FrameHeader, FrameType, ProtocolError, HEADER_LEN};

pub const LOG_MAGIC: [u8; 4] = *b"SDLG";
pub const LOG_FORMAT: u16 = 1;

/// Everything needed to rebuild the session's starting world.
#[derive(Clone, Debug, PartialEq)]
pub struct LogHeader {
    pub protocol_version: u16,
    pub seed: u64,
    pub time_scale: f64,
    pub age0: f64,
    pub caregiver: bool,
    pub max_ticks: u64,
    /// Digest over the scene, schedule, script and body files' bytes.
    pub assets_digest: u64,
    pub scene: String,
    pub schedule: String,
    /// Empty when the scene's own reference is used.
    pub script: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub tick: u64,
    /// Event payloads sent before this tick's observation.
    pub events: Vec<Vec<u8>>,
    pub obs_digest: u64,
    pub action: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogStatus {
    Complete,
    Aborted,
    /// No closing frame: the writer stopped mid-session.
    Truncated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
    pub status: LogStatus,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogError {
    #[error("truncated header")]
    TruncatedHeader,
    #[error("not a session log (bad magic)")]
    BadMagic,
    #[error("unsupported log format {0}")]
    Format(u16),
    #[error("corrupt header: {0}")]
    Header(DecodeError),
    #[error("corrupt frame at byte {offset}: {source}")]
    Frame { offset: usize, source: ProtocolError },
    #[error("unexpected {kind:?} frame for tick {tick} at byte {offset}")]
    Sequence { offset: usize, kind: FrameType, tick: u64 },
}

pub fn encode_header(header: &LogHeader) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(&LOG_MAGIC)
        .u16(LOG_FORMAT)
        .u16(header.protocol_version)
        .u64(header.seed)
        .f64(header.time_scale)
        .f64(header.age0)
        .bool(header.caregiver)
        .u64(header.max_ticks)
        .u64(header.assets_digest)
        .str16(&header.scene)
        .str16(&header.schedule)
        .str16(&header.script);
    w.into_inner()
}

/// Frames for one tick, in session order.
pub fn encode_record(record: &LogRecord) -> Vec<u8> {
    let mut out = Vec::new();
    for e in &record.events {
        out.extend(Frame::new(FrameType::Event, record.tick, e.clone()).encode());
    }
    out.extend(Frame::new(FrameType::Obs, record.tick, record.obs_digest.to_le_bytes().to_vec()).encode());
    out.extend(Frame::new(FrameType::Act, record.tick, record.action.clone()).encode());
    out
}

/// Closing frame; `tick` is the first tick not played.
pub fn encode_trailer(tick: u64, status: LogStatus) -> Vec<u8> {
    let code = match status {
        LogStatus::Complete => 0,
        LogStatus::Aborted | LogStatus::Truncated => 1,
    };
    Frame::new(FrameType::Bye, tick, alloc::vec![code]).encode()
}

impl SessionLog {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = encode_header(&self.header);
        for r in &self.records {
            out.extend(encode_record(r));
        }
        if self.status != LogStatus::Truncated {
            let next = self.records.last().map_or(0, |r| r.tick + 1);
            out.extend(encode_trailer(next, self.status));
        }
        out
    }

    /// Parses a log. A tick whose ACT never arrived is dropped, and a missing
    /// trailer yields [`LogStatus::Truncated`].
    pub fn decode(bytes: &[u8]) -> Result<Self, LogError> {
        let mut r = ByteReader::new(bytes);
        let magic = r.take(4).map_err(|_| LogError::TruncatedHeader)?;
        if magic != LOG_MAGIC {
            return Err(LogError::BadMagic);
        }
        let format = r.u16().map_err(|_| LogError::TruncatedHeader)?;
        if format != LOG_FORMAT {
            return Err(LogError::Format(format));
        }
        let header = decode_header_body(&mut r).map_err(|e| match e {
            DecodeError::Truncated { .. } => LogError::TruncatedHeader,
            other => LogError::Header(other),
        })?;

        let mut records = Vec::new();
        let mut events = Vec::new();
        let mut digest_at: Option<(u64, u64)> = None;
        let mut status = LogStatus::Truncated;
        let mut offset = r.position();
        while offset < bytes.len() {
            let rest = &bytes[offset..];
            if rest.len() < HEADER_LEN {
                break;
            }
            let mut head = [0u8; HEADER_LEN];
            head.copy_from_slice(&rest[..HEADER_LEN]);
            let h = FrameHeader::parse(&head).map_err(|source| LogError::Frame { offset, source })?;
            if rest.len() < h.length as usize {
                break;
            }
            let payload = &rest[HEADER_LEN..h.length as usize];
            let expected = records.last().map(|r: &LogRecord| r.tick + 1);
            let seq = || LogError::Sequence { offset, kind: h.kind, tick: h.tick };
            if expected.is_some_and(|t| t != h.tick) && h.kind != FrameType::Bye {
                return Err(seq());
            }
            match h.kind {
                FrameType::Event => {
                    if digest_at.is_some() {
                        return Err(seq());
                    }
                    Event::decode(payload).map_err(|source| LogError::Frame { offset, source })?;
                    events.push(payload.to_vec());
                }
                FrameType::Obs => {
                    if digest_at.is_some() || payload.len() != 8 {
                        return Err(seq());
                    }
                    let mut d = [0u8; 8];
                    d.copy_from_slice(payload);
                    digest_at = Some((h.tick, u64::from_le_bytes(d)));
                }
                FrameType::Act => {
                    let Some((tick, obs_digest)) = digest_at.take() else {
                        return Err(seq());
                    };
                    if tick != h.tick {
                        return Err(seq());
                    }
                    records.push(LogRecord {
                        tick,
                        events: core::mem::take(&mut events),
                        obs_digest,
                        action: payload.to_vec(),
                    });
                }
                FrameType::Bye => {
                    status = if payload.first() == Some(&0) { LogStatus::Complete } else { LogStatus::Aborted };
                    offset += h.length as usize;
                    if offset != bytes.len() {
                        return Err(LogError::Frame {
                            offset,
                            source: DecodeError::Trailing(bytes.len() - offset).into(),
                        });
                    }
                    break;
                }
                _ => return Err(seq()),
            }
            offset += h.length as usize;
        }
        Ok(Self { header, records, status })
    }
}

fn decode_header_body(r: &mut ByteReader<'_>) -> Result<LogHeader, DecodeError> {
    Ok(LogHeader {
        protocol_version: r.u16()?,
        seed: r.u64()?,
        time_scale: r.f64()?,
        age0: r.f64()?,
        caregiver: r.bool()?,
        max_ticks: r.u64()?,
        assets_digest: r.u64()?,
        scene: r.str16()?,
        schedule: r.str16()?,
        script: r.str16()?,
    })
}

/// Digest recorded for an observation.
pub fn observation_digest(env: &Environment) -> u64 {
    digest(&encode_observation(&env.observe()))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Divergence {
    Observation { expected: u64, actual: u64 },
    Events,
    /// The logged action was not one the server could have accepted.
    Action(ProtocolError),
    Step(EnvError),
    /// The log starts at a tick the environment is not at.
    Start { expected: u64, actual: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayReport {
    /// Ticks whose observation, events and action matched.
    pub verified: u64,
    pub divergence: Option<(u64, Divergence)>,
}

impl ReplayReport {
    pub fn divergences(&self) -> usize {
        self.divergence.is_some() as usize
    }
}

/// Re-simulates `records` from `env`, which must be the session's starting
/// environment, stopping at the first tick that does not match.
pub fn replay(env: &mut Environment, records: &[LogRecord]) -> ReplayReport {
    let mut verified = 0;
    for rec in records {
        let diverged = |d| ReplayReport { verified, divergence: Some((rec.tick, d)) };
        if rec.tick != env.tick() {
            return diverged(Divergence::Start { expected: rec.tick, actual: env.tick() });
        }
        let events: Vec<Vec<u8>> = env.take_events().iter().map(Event::encode).collect();
        if events != rec.events {
            return diverged(Divergence::Events);
        }
        let actual = observation_digest(env);
        if actual != rec.obs_digest {
            return diverged(Divergence::Observation { expected: rec.obs_digest, actual });
        }
        let action = match decode_action(&rec.action) {
            Ok(a) => a,
            Err(e) => return diverged(Divergence::Action(e)),
        };
        if let Err(e) = env.step(&action) {
            return diverged(Divergence::Step(e));
        }
        verified += 1;
    }
    ReplayReport { verified, divergence: None }
}
