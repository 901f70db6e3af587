//! Scripted looking agents. They read stimulus identity and gaze hints from
//! evaluation events instead of solving vision, and differ only in how long
//! they keep looking at each stimulus.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::protocol::Event;
use crate::sensors::{Action, Observation};
use crate::DT;

use super::AgentLink;

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Looks longest at whatever most resembles the most-exposed stimulus.
    Familiarity,
    /// Looks longest at whatever resembles past exposure least.
    Novelty,
    /// Habituates like the others, then gives every new stimulus the same
    /// fixed look.
    Symmetric,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(default)]
pub struct OracleParams {
    /// Look on first exposure, seconds.
    pub initial_look: f64,
    /// Exposure (seconds) over which interest falls by a factor e.
    pub decay: f64,
    /// Look given to each new stimulus in symmetric mode, seconds.
    pub symmetric_look: f64,
    /// Eye yaw and pitch held while looking away.
    pub away: [f64; 2],
    /// Eyes within this many radians of the hint count as on target.
    pub on_target: f64,
    /// Must match the body's eye speed limit, rad/s.
    pub eye_max_speed: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self { initial_look: 30.0, decay: 40.0, symmetric_look: 5.0, away: [0.0, 0.7], on_target: 0.02, eye_max_speed: 5.24 }
    }
}

/// Jaccard overlap of two tag sets.
pub fn similarity(a: &[String], b: &[String]) -> f64 {
    let shared = a.iter().filter(|t| b.contains(t)).count();
    let union = a.len() + b.len() - shared;
    if union == 0 {
        1.0
    } else {
        shared as f64 / union as f64
    }
}

/// Gaze policy driven by exposure memory: looking seconds per stimulus id.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleGazePolicy {
    pub mode: OracleMode,
    pub params: OracleParams,
    tags: BTreeMap<u32, Vec<String>>,
    exposure: BTreeMap<u32, f64>,
    current: Option<u32>,
    /// On-target ticks left for the current stimulus.
    budget: u64,
    target: Option<(f64, f64)>,
}

impl OracleGazePolicy {
    pub fn new(mode: OracleMode, params: OracleParams) -> Self {
        Self {
            mode,
            params,
            tags: BTreeMap::new(),
            exposure: BTreeMap::new(),
            current: None,
            budget: 0,
            target: None,
        }
    }

    pub fn exposure(&self, stimulus_id: u32) -> f64 {
        self.exposure.get(&stimulus_id).copied().unwrap_or(0.0)
    }

    /// Most-exposed stimulus, lowest id on ties.
    fn reference(&self) -> Option<u32> {
        let mut best: Option<(u32, f64)> = None;
        for (&id, &e) in &self.exposure {
            if e > 0.0 && best.map_or(true, |(_, b)| e > b) {
                best = Some((id, e));
            }
        }
        best.map(|(id, _)| id)
    }

    /// Seconds this policy will look at stimulus `id` when it appears.
    pub fn planned_look(&self, id: u32) -> f64 {
        let p = &self.params;
        let none = Vec::new();
        let tags = self.tags.get(&id).unwrap_or(&none);
        let total: f64 = self.exposure.values().sum();
        let interest = |familiarity: f64| p.initial_look * libm::exp(-familiarity / p.decay);
        match self.mode {
            OracleMode::Novelty => {
                let familiarity: f64 = self
                    .exposure
                    .iter()
                    .map(|(j, e)| e * similarity(tags, self.tags.get(j).unwrap_or(&none)))
                    .sum();
                interest(familiarity)
            }
            OracleMode::Familiarity => {
                let resemblance = match self.reference() {
                    Some(r) => similarity(tags, self.tags.get(&r).unwrap_or(&none)),
                    None => 1.0,
                };
                interest(total) * (0.25 + 0.75 * resemblance)
            }
            OracleMode::Symmetric => match self.reference() {
                Some(r) if r != id => p.symmetric_look,
                _ => interest(total),
            },
        }
    }

    pub fn observe(&mut self, events: &[Event]) {
        for e in events {
            match e {
                Event::StimulusOn { stimulus_id, tags } => {
                    self.tags.insert(*stimulus_id, tags.clone());
                    self.current = Some(*stimulus_id);
                    self.budget = crate::caregiver::seconds_to_ticks(self.planned_look(*stimulus_id));
                    self.target = None;
                }
                Event::StimulusOff { stimulus_id } if self.current == Some(*stimulus_id) => {
                    self.current = None;
                    self.target = None;
                }
                Event::GazeTarget { stimulus_id, yaw, pitch } if self.current == Some(*stimulus_id) => {
                    self.target = Some((*yaw as f64, *pitch as f64));
                }
                _ => {}
            }
        }
    }

    /// Eye command for this tick; muscles stay relaxed. Without a stimulus
    /// on display the eyes hold still.
    pub fn action(&mut self, obs: &Observation) -> Action {
        let mut action = Action::zero();
        let Some(id) = self.current else {
            return action;
        };
        let goal = match self.target {
            Some(target) if self.budget > 0 => {
                let tol = self.params.on_target;
                if (target.0 - obs.eye[0] as f64).abs() <= tol && (target.1 - obs.eye[1] as f64).abs() <= tol {
                    self.budget -= 1;
                    *self.exposure.entry(id).or_insert(0.0) += DT;
                }
                target
            }
            _ => (self.params.away[0], self.params.away[1]),
        };
        let step = self.params.eye_max_speed * DT;
        action.eye[0] = ((goal.0 - obs.eye[0] as f64) / step).clamp(-1.0, 1.0);
        action.eye[1] = ((goal.1 - obs.eye[1] as f64) / step).clamp(-1.0, 1.0);
        action.eye[2] = (-(obs.eye[2] as f64) / step).clamp(-1.0, 1.0);
        action
    }
}

/// In-process agent wrapping an [`OracleGazePolicy`].
#[derive(Clone, Debug, PartialEq)]
pub struct OracleAgent {
    pub policy: OracleGazePolicy,
}

impl OracleAgent {
    pub fn new(mode: OracleMode) -> Self {
        Self { policy: OracleGazePolicy::new(mode, OracleParams::default()) }
    }
}

impl AgentLink for OracleAgent {
    type Error = core::convert::Infallible;

    fn act(&mut self, events: &[Event], obs: &Observation) -> Result<Action, Self::Error> {
        self.policy.observe(events);
        Ok(self.policy.action(obs))
    }
}
