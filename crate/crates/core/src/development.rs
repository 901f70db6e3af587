//! Developmental schedule: maps simulated age in days to sensory acuity,
//! motor strength, the active scene and the caregiver routines in play.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Start of gestational time covered by schedules, in days.
pub const MIN_AGE_DAYS: f64 = -84.0;
/// End of the covered range (twelve months).
pub const MAX_AGE_DAYS: f64 = 365.0;
pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct ScheduleSpec {
    pub stages: Vec<StageSpec>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct StageSpec {
    pub id: String,
    pub start_day: f64,
    pub end_day: f64,
    /// Acuity at the start and end of the window.
    pub acuity: [f64; 2],
    pub strength: [f64; 2],
    pub scene_id: String,
    #[serde(default)]
    pub caregiver_routines: Vec<String>,
}

/// Parameters in effect at one age.
#[derive(Clone, Debug, PartialEq)]
pub struct StageParams {
    pub stage_id: String,
    pub index: usize,
    /// `[start, end)` in days; the last stage also contains its end.
    pub age_window: (f64, f64),
    pub acuity_factor: f64,
    pub strength_factor: f64,
    pub scene_id: String,
    pub caregiver_routines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DevelopmentError {
    #[error("age {0} days is outside [{MIN_AGE_DAYS}, {MAX_AGE_DAYS}]")]
    AgeOutOfRange(f64),
    #[error("stages[{index}].{field}: {reason}")]
    Invalid { index: usize, field: &'static str, reason: &'static str },
    #[error("schedule has no stages")]
    Empty,
}

/// A validated schedule whose stages partition `[MIN_AGE_DAYS, MAX_AGE_DAYS]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    stages: Vec<StageSpec>,
}

impl Schedule {
    pub fn new(spec: ScheduleSpec) -> Result<Self, DevelopmentError> {
        let stages = spec.stages;
        if stages.is_empty() {
            return Err(DevelopmentError::Empty);
        }
        let bad = |index, field, reason| Err(DevelopmentError::Invalid { index, field, reason });
        let unit = |v: f64| v.is_finite() && v > 0.0 && v <= 1.0;
        for (i, s) in stages.iter().enumerate() {
            let expected_start = if i == 0 { MIN_AGE_DAYS } else { stages[i - 1].end_day };
            if s.start_day != expected_start {
                return bad(i, "start_day", "stages must be contiguous from -84 days");
            }
            if s.end_day.partial_cmp(&s.start_day) != Some(core::cmp::Ordering::Greater) {
                return bad(i, "end_day", "must exceed start_day");
            }
            if !(unit(s.acuity[0]) && unit(s.acuity[1]) && s.acuity[1] >= s.acuity[0]) {
                return bad(i, "acuity", "must be non-decreasing within (0, 1]");
            }
            if !(unit(s.strength[0]) && unit(s.strength[1]) && s.strength[1] >= s.strength[0]) {
                return bad(i, "strength", "must be non-decreasing within (0, 1]");
            }
            if i > 0 {
                let prev = &stages[i - 1];
                if s.acuity[0] < prev.acuity[1] {
                    return bad(i, "acuity", "drops below the previous stage");
                }
                if s.strength[0] < prev.strength[1] {
                    return bad(i, "strength", "drops below the previous stage");
                }
            }
        }
        if stages[stages.len() - 1].end_day != MAX_AGE_DAYS {
            return bad(stages.len() - 1, "end_day", "last stage must end at 365 days");
        }
        Ok(Self { stages })
    }

    pub fn stages(&self) -> &[StageSpec] {
        &self.stages
    }

    pub fn stage_index(&self, age: f64) -> Result<usize, DevelopmentError> {
        if !(MIN_AGE_DAYS..=MAX_AGE_DAYS).contains(&age) {
            return Err(DevelopmentError::AgeOutOfRange(age));
        }
        Ok(self.stages.iter().position(|s| age < s.end_day).unwrap_or(self.stages.len() - 1))
    }

    /// Stage parameters at `age` days, linearly interpolated within the stage.
    pub fn stage_at(&self, age: f64) -> Result<StageParams, DevelopmentError> {
        let index = self.stage_index(age)?;
        let s = &self.stages[index];
        let f = (age - s.start_day) / (s.end_day - s.start_day);
        let lerp = |r: [f64; 2]| r[0] + (r[1] - r[0]) * f;
        Ok(StageParams {
            stage_id: s.id.clone(),
            index,
            age_window: (s.start_day, s.end_day),
            acuity_factor: lerp(s.acuity),
            strength_factor: lerp(s.strength),
            scene_id: s.scene_id.clone(),
            caregiver_routines: s.caregiver_routines.clone(),
        })
    }
}

/// Simulated age at `tick`: `age0 + tick × dt × time_scale / 86400`, capped at
/// the end of the schedule.
pub fn advance_age(age0: f64, tick: u64, time_scale: f64) -> f64 {
    (age0 + crate::sim_time(tick) * time_scale / SECONDS_PER_DAY).min(MAX_AGE_DAYS)
}
