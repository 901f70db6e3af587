//! Agent side of the lockstep protocol.

use std::net::ToSocketAddrs;
use std::time::Duration;

use sedro_core::eval::AgentLink;
use sedro_core::protocol::{
    decode_observation, encode_action, encode_error, ErrorCode, Event, Frame, FrameType, ProtocolError,
    SUPPORTED_VERSIONS,
};
use sedro_core::{Action, Observation};

use crate::session::{offer_hello, peer_error, SessionError};
use crate::transport::Connection;

/// What the server sent for one tick.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub tick: u64,
    pub events: Vec<Event>,
    pub observation: Observation,
}

pub struct ClientSession {
    conn: Connection,
    version: u16,
    tick: Option<u64>,
    timeout: Option<Duration>,
}

impl ClientSession {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, SessionError> {
        let conn = Connection::connect(addr).map_err(|e| SessionError::Transport(e.into()))?;
        Self::over(conn, SUPPORTED_VERSIONS)
    }

    /// Handshakes on an open connection, offering `versions`.
    pub fn over(mut conn: Connection, versions: &[u16]) -> Result<Self, SessionError> {
        let version = offer_hello(&mut conn, versions, None)?;
        Ok(Self { conn, version, tick: None, timeout: None })
    }

    pub fn version(&self) -> u16 {
        self.version
    }

    /// Tick of the last observation received.
    pub fn tick(&self) -> Option<u64> {
        self.tick
    }

    pub fn set_timeout(&mut self, timeout: Option<Duration>) {
        self.timeout = timeout;
    }

    /// Events and observation for the next tick, or `None` once the server
    /// says BYE.
    pub fn next_step(&mut self) -> Result<Option<Step>, SessionError> {
        let mut events = Vec::new();
        loop {
            let frame = self.conn.recv(self.timeout)?;
            match frame.kind {
                FrameType::Event => events.push(Event::decode(&frame.payload)?),
                FrameType::Obs => {
                    let observation = decode_observation(frame.tick, &frame.payload)?;
                    self.tick = Some(frame.tick);
                    return Ok(Some(Step { tick: frame.tick, events, observation }));
                }
                FrameType::Bye => return Ok(None),
                FrameType::Err => return Err(peer_error(&frame)),
                other => return Err(ProtocolError::Unexpected { expected: FrameType::Obs, actual: other }.into()),
            }
        }
    }

    /// Answers the last observation.
    pub fn act(&mut self, action: &Action) -> Result<(), SessionError> {
        let tick = self.tick.ok_or(ProtocolError::Unexpected { expected: FrameType::Obs, actual: FrameType::Act })?;
        Ok(self.conn.send_now(&Frame::new(FrameType::Act, tick, encode_action(action)))?)
    }

    /// Drives `agent` until the server ends the session. Returns the number
    /// of ticks played.
    pub fn run<A: AgentLink>(&mut self, mut agent: A) -> Result<u64, SessionError>
    where
        A::Error: std::fmt::Display,
    {
        let mut ticks = 0;
        while let Some(step) = self.next_step()? {
            let action = match agent.act(&step.events, &step.observation) {
                Ok(a) => a,
                Err(e) => {
                    let msg = e.to_string();
                    let _ = self.conn.send_now(&Frame::new(FrameType::Err, step.tick, encode_error(ErrorCode::Internal, &msg)));
                    return Err(SessionError::Peer { code: Some(ErrorCode::Internal), message: msg });
                }
            };
            self.act(&action)?;
            ticks += 1;
        }
        Ok(ticks)
    }

    /// Tells the server the agent is leaving.
    pub fn close(mut self) -> Result<(), SessionError> {
        let tick = self.tick.map_or(0, |t| t + 1);
        Ok(self.conn.send_now(&Frame::new(FrameType::Bye, tick, Vec::new()))?)
    }
}
