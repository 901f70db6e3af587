//! Scripted agents shipped with the binary.

use std::convert::Infallible;
use std::fmt;
use std::str::FromStr;

use sedro_core::eval::oracle::{OracleAgent, OracleGazePolicy, OracleMode, OracleParams};
use sedro_core::eval::AgentLink;
use sedro_core::protocol::Event;
use sedro_core::rng::{SimRng, Stream};
use sedro_core::sensors::ACTION_CHANNELS;
use sedro_core::{Action, Observation};

pub const POLICIES: &[&str] = &["zero", "random", "stare", "familiarity", "novelty", "symmetric"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    Zero,
    Random,
    /// Follows every stimulus for as long as it is shown.
    Stare,
    Oracle(OracleMode),
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "zero" => Policy::Zero,
            "random" => Policy::Random,
            "stare" => Policy::Stare,
            "familiarity" => Policy::Oracle(OracleMode::Familiarity),
            "novelty" => Policy::Oracle(OracleMode::Novelty),
            "symmetric" => Policy::Oracle(OracleMode::Symmetric),
            other => return Err(format!("unknown policy `{other}` (known: {})", POLICIES.join(", "))),
        })
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Zero => "zero",
            Policy::Random => "random",
            Policy::Stare => "stare",
            Policy::Oracle(OracleMode::Familiarity) => "familiarity",
            Policy::Oracle(OracleMode::Novelty) => "novelty",
            Policy::Oracle(OracleMode::Symmetric) => "symmetric",
        })
    }
}

/// Uniform actions in `[-1, 1]`, a pure function of `(seed, tick)`.
#[derive(Clone, Debug)]
pub struct RandomAgent {
    rng: SimRng,
    tick: u64,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        Self { rng: SimRng::new(seed), tick: 0 }
    }
}

impl AgentLink for RandomAgent {
    type Error = Infallible;

    fn act(&mut self, _: &[Event], obs: &Observation) -> Result<Action, Infallible> {
        self.tick = obs.tick;
        let mut r = self.rng.at(self.tick, Stream::Eval);
        let values: Vec<f64> = (0..ACTION_CHANNELS).map(|_| r.uniform(-1.0, 1.0)).collect();
        Ok(Action::from_channels(&values).expect("uniform values are in range"))
    }
}

pub enum BuiltinAgent {
    Zero,
    Random(RandomAgent),
    Oracle(OracleAgent),
}

impl BuiltinAgent {
    pub fn new(policy: Policy, seed: u64) -> Self {
        match policy {
            Policy::Zero => BuiltinAgent::Zero,
            Policy::Random => BuiltinAgent::Random(RandomAgent::new(seed)),
            Policy::Stare => {
                let params = OracleParams { initial_look: 1e9, decay: f64::INFINITY, ..Default::default() };
                BuiltinAgent::Oracle(OracleAgent { policy: OracleGazePolicy::new(OracleMode::Familiarity, params) })
            }
            Policy::Oracle(mode) => BuiltinAgent::Oracle(OracleAgent::new(mode)),
        }
    }
}

impl AgentLink for BuiltinAgent {
    type Error = Infallible;

    fn act(&mut self, events: &[Event], obs: &Observation) -> Result<Action, Infallible> {
        match self {
            BuiltinAgent::Zero => Ok(Action::zero()),
            BuiltinAgent::Random(a) => a.act(events, obs),
            BuiltinAgent::Oracle(a) => a.act(events, obs),
        }
    }
}
