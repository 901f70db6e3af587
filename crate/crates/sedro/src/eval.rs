//! Scenario registry and the wire-backed agent used by remote evaluations.

use std::time::Duration;

use sedro_core::eval::{run_rod_and_box, AgentLink, EvalError, HabituationReport, RodAndBoxConfig, SCENARIOS};
use sedro_core::protocol::{decode_action, encode_observation, Event, Frame, FrameType, ProtocolError};
use sedro_core::{Action, Observation, WorldState};
use thiserror::Error;

use crate::session::{accept_hello, peer_error, SessionError};
use crate::transport::Connection;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}` (registered: {list})", list = SCENARIOS.join(", "))]
    Unknown(String),
    #[error("invalid {id} config: {source}")]
    Config { id: &'static str, source: serde_json::Error },
}

/// A registered scenario with its configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum Scenario {
    RodAndBox(RodAndBoxConfig),
}

impl Scenario {
    /// Looks `id` up and parses `config` (defaults when absent).
    pub fn from_id(id: &str, config: Option<serde_json::Value>) -> Result<Self, ScenarioError> {
        match id {
            "rod_and_box" => {
                let cfg = match config {
                    Some(v) => serde_json::from_value::<RodAndBoxConfig>(v).map_err(|source| ScenarioError::Config { id: "rod_and_box", source })?,
                    None => RodAndBoxConfig::default(),
                };
                Ok(Scenario::RodAndBox(cfg))
            }
            other => Err(ScenarioError::Unknown(other.into())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Scenario::RodAndBox(_) => "rod_and_box",
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Scenario::RodAndBox(c) => c.seed = seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Scenario::RodAndBox(c) => c.validate().map_err(|e| e.to_string()),
        }
    }

    pub fn run<A: AgentLink>(&self, world: WorldState, agent: A) -> Result<HabituationReport, EvalError<A::Error>> {
        match self {
            Scenario::RodAndBox(c) => run_rod_and_box(world, c, agent).map(|(r, _)| r),
        }
    }
}

/// An agent on the far side of a connection. Each call sends the pending
/// events and the observation, then waits for the matching ACT.
pub struct RemoteAgent<'a> {
    conn: &'a mut Connection,
    timeout: Duration,
    tick: u64,
}

impl<'a> RemoteAgent<'a> {
    /// Performs the server handshake.
    pub fn accept(conn: &'a mut Connection, timeout: Duration) -> Result<Self, SessionError> {
        accept_hello(conn, Some(timeout))?;
        Ok(Self { conn, timeout, tick: 0 })
    }

    /// Ends the session with BYE.
    pub fn finish(self) -> Result<(), SessionError> {
        Ok(self.conn.send_now(&Frame::new(FrameType::Bye, self.tick, vec![0]))?)
    }
}

impl AgentLink for RemoteAgent<'_> {
    type Error = SessionError;

    fn act(&mut self, events: &[Event], obs: &Observation) -> Result<Action, SessionError> {
        let tick = self.tick;
        for e in events {
            self.conn.send(&Frame::new(FrameType::Event, tick, e.encode()))?;
        }
        self.conn.send_now(&Frame::new(FrameType::Obs, tick, encode_observation(obs)))?;
        let frame = self.conn.recv(Some(self.timeout))?;
        match frame.kind {
            FrameType::Err => return Err(peer_error(&frame)),
            FrameType::Bye => return Err(SessionError::AgentQuit(tick)),
            _ => {}
        }
        let frame = frame.expect(FrameType::Act)?;
        if frame.tick != tick {
            return Err(ProtocolError::TickMismatch { expected: tick, actual: frame.tick }.into());
        }
        let action = decode_action(&frame.payload)?;
        self.tick += 1;
        Ok(action)
    }
}
