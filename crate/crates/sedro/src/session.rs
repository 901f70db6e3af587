//! Server side of the lockstep protocol.

use std::time::Duration;

use sedro_core::codec::digest;
use sedro_core::env::EnvError;
use sedro_core::protocol::{
    decode_action, decode_error, decode_hello, encode_error, encode_hello, encode_observation, negotiate, ErrorCode,
    Event, Frame, FrameType, ProtocolError, SUPPORTED_VERSIONS,
};
use sedro_core::replay::{LogHeader, LogRecord, LogStatus, SessionLog};
use sedro_core::{Action, Environment};
use thiserror::Error;

use crate::transport::{Connection, TransportError};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("agent sent ERR {code:?}: {message}")]
    Peer { code: Option<ErrorCode>, message: String },
    #[error("agent ended the session at tick {0}")]
    AgentQuit(u64),
    #[error(transparent)]
    Env(#[from] EnvError),
}

impl SessionError {
    pub fn is_timeout(&self) -> bool {
        matches!(self, SessionError::Transport(TransportError::Timeout(_)))
    }
}

pub(crate) fn peer_error(frame: &Frame) -> SessionError {
    match decode_error(&frame.payload) {
        Ok((code, message)) => SessionError::Peer { code: ErrorCode::from_u16(code), message },
        Err(e) => e.into(),
    }
}

fn reject(conn: &mut Connection, tick: u64, err: &ProtocolError) {
    let frame = Frame::new(FrameType::Err, tick, encode_error(err.code(), &err.to_string()));
    let _ = conn.send_now(&frame);
}

/// Server handshake: reads the agent's HELLO and answers with the highest
/// mutual version. Failures are reported to the peer with an ERR frame.
pub fn accept_hello(conn: &mut Connection, timeout: Option<Duration>) -> Result<u16, SessionError> {
    let frame = conn.recv(timeout)?;
    if frame.kind == FrameType::Err {
        return Err(peer_error(&frame));
    }
    let chosen = frame
        .expect(FrameType::Hello)
        .and_then(|f| decode_hello(&f.payload))
        .and_then(|offered| negotiate(&offered, SUPPORTED_VERSIONS));
    match chosen {
        Ok(v) => {
            conn.send_now(&Frame::new(FrameType::Hello, 0, encode_hello(&[v])))?;
            Ok(v)
        }
        Err(e) => {
            reject(conn, 0, &e);
            Err(e.into())
        }
    }
}

/// Client handshake: offers `versions` and returns the one the server chose.
pub fn offer_hello(conn: &mut Connection, versions: &[u16], timeout: Option<Duration>) -> Result<u16, SessionError> {
    conn.send_now(&Frame::new(FrameType::Hello, 0, encode_hello(versions)))?;
    let frame = conn.recv(timeout)?;
    if frame.kind == FrameType::Err {
        return Err(peer_error(&frame));
    }
    let chosen = decode_hello(&frame.expect(FrameType::Hello)?.payload)?;
    match chosen.as_slice() {
        [v] if versions.contains(v) => Ok(*v),
        _ => {
            let e = ProtocolError::NoMutualVersion { peer: chosen, ours: versions.to_vec() };
            reject(conn, 0, &e);
            Err(e.into())
        }
    }
}

/// What a session left behind. `log.status` is `Aborted` whenever `error`
/// is set.
#[derive(Debug)]
pub struct SessionOutcome {
    pub log: SessionLog,
    pub error: Option<SessionError>,
}

/// Runs one session to `header.max_ticks` on an already accepted
/// connection: handshake, then per tick EVENT frames and OBS out, ACT in,
/// step. Ends with BYE on success.
pub fn run_session(conn: &mut Connection, env: &mut Environment, header: LogHeader, timeout: Duration) -> SessionOutcome {
    let mut log = SessionLog { header, records: Vec::new(), status: LogStatus::Aborted };
    let error = match accept_hello(conn, Some(timeout)) {
        Ok(v) => {
            log.header.protocol_version = v;
            lockstep(conn, env, &mut log, timeout).err()
        }
        Err(e) => Some(e),
    };
    if error.is_none() {
        log.status = LogStatus::Complete;
    }
    SessionOutcome { log, error }
}

fn lockstep(conn: &mut Connection, env: &mut Environment, log: &mut SessionLog, timeout: Duration) -> Result<(), SessionError> {
    for _ in 0..log.header.max_ticks {
        let tick = env.tick();
        let events: Vec<Vec<u8>> = env.take_events().iter().map(Event::encode).collect();
        for e in &events {
            conn.send(&Frame::new(FrameType::Event, tick, e.clone()))?;
        }
        let obs = encode_observation(&env.observe());
        let obs_digest = digest(&obs);
        conn.send_now(&Frame::new(FrameType::Obs, tick, obs))?;

        let action = read_action(conn, tick, timeout)?;
        let bytes = sedro_core::protocol::encode_action(&action);
        if let Err(e) = env.step(&action) {
            let _ = conn.send_now(&Frame::new(FrameType::Err, tick, encode_error(ErrorCode::Internal, &e.to_string())));
            return Err(e.into());
        }
        log.records.push(LogRecord { tick, events, obs_digest, action: bytes });
    }
    conn.send_now(&Frame::new(FrameType::Bye, env.tick(), vec![0]))?;
    Ok(())
}

fn read_action(conn: &mut Connection, tick: u64, timeout: Duration) -> Result<Action, SessionError> {
    let frame = match conn.recv(Some(timeout)) {
        Ok(f) => f,
        Err(e) => {
            if let TransportError::Protocol(p) = &e {
                reject(conn, tick, p);
            } else if let TransportError::Timeout(_) = e {
                let msg = format!("no ACT for tick {tick} within {timeout:?}");
                let _ = conn.send_now(&Frame::new(FrameType::Err, tick, encode_error(ErrorCode::Timeout, &msg)));
            }
            return Err(e.into());
        }
    };
    match frame.kind {
        FrameType::Err => return Err(peer_error(&frame)),
        FrameType::Bye => return Err(SessionError::AgentQuit(tick)),
        _ => {}
    }
    let checked = frame.expect(FrameType::Act).and_then(|f| {
        if f.tick != tick {
            return Err(ProtocolError::TickMismatch { expected: tick, actual: f.tick });
        }
        decode_action(&f.payload)
    });
    checked.map_err(|e| {
        reject(conn, tick, &e);
        e.into()
    })
}
