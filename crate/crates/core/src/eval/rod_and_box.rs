//! Rod-and-box: habituate to a rod moving laterally behind an occluding box,
//! then compare looking at a complete rod with looking at two rod pieces.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::caregiver::CaregiverCommand;
use crate::math::{quat_to_wxyz, Quat, Vec3};
use crate::protocol::Event;
use crate::scene::{ObjectSpec, OscillationSpec, Oscillation, SceneObject, Shape};
use crate::sensors::{Action, Observation};
use crate::world::WorldState;

use super::{
    gaze_angles_to, gaze_on_stimulus, habituation_reached, novelty_preference, AgentLink, EvalConfigError, EvalError,
    GazeMode, HabituationCriterion, HabituationReport, ReportFlag, Trial, TrialEnd,
};

pub const OCCLUDED_ROD: &str = "occluded_rod";
pub const COMPLETE_ROD: &str = "complete_rod";
pub const BROKEN_ROD: &str = "broken_rod";

const ROD_ID: u32 = 101;
const BOX_ID: u32 = 102;
const LOWER_ID: u32 = 103;
const UPPER_ID: u32 = 104;
const ROD_COLOR: [u8; 3] = [220, 60, 50];
const BOX_COLOR: [u8; 3] = [60, 90, 200];

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default)]
pub struct RodAndBoxConfig {
    /// Test order counterbalancing follows the seed's parity.
    pub seed: u64,
    pub rod_length: f64,
    pub rod_radius: f64,
    /// Extent of the box along the rod, centred on it.
    pub box_width: f64,
    /// Lateral extent of the box; covers the rod's middle over the whole sweep.
    pub box_span: f64,
    /// How far in front of the rod the box stands.
    pub box_gap: f64,
    pub amplitude: f64,
    pub frequency_hz: f64,
    /// Distance from the eyes to the rod plane.
    pub distance: f64,
    pub test_trials: usize,
    /// Blank screen between trials, seconds.
    pub blank_s: f64,
    /// Passive settling before the first trial, seconds.
    pub settle_s: f64,
    pub acuity: f64,
    pub gaze: GazeMode,
    pub criterion: HabituationCriterion,
}

impl Default for RodAndBoxConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            rod_length: 0.3,
            rod_radius: 0.015,
            box_width: 0.12,
            box_span: 0.32,
            box_gap: 0.05,
            amplitude: 0.08,
            frequency_hz: 0.5,
            distance: 0.6,
            test_trials: 6,
            blank_s: 2.0,
            settle_s: 30.0,
            acuity: 1.0,
            gaze: GazeMode::Ray,
            criterion: HabituationCriterion::default(),
        }
    }
}

impl RodAndBoxConfig {
    pub fn validate(&self) -> Result<(), EvalConfigError> {
        self.criterion.validate()?;
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if ![self.rod_length, self.rod_radius, self.box_width, self.box_span, self.distance, self.frequency_hz]
            .into_iter()
            .all(positive)
        {
            return Err(EvalConfigError("display dimensions must be positive"));
        }
        if self.box_width + 4.0 * self.rod_radius >= self.rod_length {
            return Err(EvalConfigError("box_width must leave both rod ends visible"));
        }
        if !(self.box_gap >= 0.0 && self.box_gap < self.distance && self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(EvalConfigError("box_gap and amplitude out of range"));
        }
        if !(self.blank_s >= 0.0 && self.settle_s >= 0.0 && self.blank_s.is_finite() && self.settle_s.is_finite()) {
            return Err(EvalConfigError("blank_s and settle_s must be non-negative"));
        }
        if !(self.acuity > 0.0 && self.acuity <= 1.0) {
            return Err(EvalConfigError("acuity must be in (0, 1]"));
        }
        if self.test_trials == 0 {
            return Err(EvalConfigError("test_trials must be positive"));
        }
        Ok(())
    }

    fn ticks(seconds: f64) -> u64 {
        crate::caregiver::seconds_to_ticks(seconds)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stimulus {
    /// Habituation display: rod behind the box.
    Occluded,
    Complete,
    Broken,
}

impl Stimulus {
    pub fn wire_id(self) -> u32 {
        match self {
            Stimulus::Occluded => 1,
            Stimulus::Complete => 2,
            Stimulus::Broken => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stimulus::Occluded => OCCLUDED_ROD,
            Stimulus::Complete => COMPLETE_ROD,
            Stimulus::Broken => BROKEN_ROD,
        }
    }

    /// Tags advertised for the display; every display object carries at
    /// least one of them.
    pub fn tags(self) -> Vec<String> {
        let t: &[&str] = match self {
            Stimulus::Occluded => &["stimulus", "rod", "occluder"],
            Stimulus::Complete => &["stimulus", "rod"],
            Stimulus::Broken => &["stimulus", "rod_segment"],
        };
        t.iter().map(|s| String::from(*s)).collect()
    }
}

/// Display frame fixed at the start of the evaluation: origin at the eyes,
/// axes of the head (x anterior, y lateral, z toward the crown).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Display {
    pub eye: Vec3,
    pub rotation: Quat,
}

impl Display {
    pub fn facing(world: &WorldState) -> Self {
        let model = world.model();
        let head = world.body.link_poses()[model.eyes.link];
        Self { eye: head.transform_point(&model.eyes.offset), rotation: head.rotation }
    }

    fn forward(&self) -> Vec3 {
        self.rotation * Vec3::x()
    }

    fn lateral(&self) -> Vec3 {
        self.rotation * Vec3::y()
    }

    fn along(&self) -> Vec3 {
        self.rotation * Vec3::z()
    }

    fn rod_centre(&self, cfg: &RodAndBoxConfig) -> Vec3 {
        self.eye + self.forward() * cfg.distance
    }

    /// Point the gaze hint tracks: the middle of the upper visible rod piece,
    /// present in all three displays.
    fn aim(&self, cfg: &RodAndBoxConfig, start_tick: u64) -> Oscillation {
        let offset = 0.25 * (cfg.rod_length + cfg.box_width);
        Oscillation {
            base: self.rod_centre(cfg) + self.along() * offset,
            axis: self.lateral(),
            amplitude: cfg.amplitude,
            frequency_hz: cfg.frequency_hz,
            phase: 0.0,
            start_tick,
        }
    }
}

/// Objects making up `stimulus` in the display frame.
pub fn display_objects(display: &Display, cfg: &RodAndBoxConfig, stimulus: Stimulus) -> Vec<ObjectSpec> {
    let orientation = quat_to_wxyz(&display.rotation);
    let lateral = display.lateral();
    let motion = OscillationSpec {
        axis: [lateral.x, lateral.y, lateral.z],
        amplitude: cfg.amplitude,
        frequency_hz: cfg.frequency_hz,
        phase: 0.0,
    };
    let rod = |id: u32, centre: Vec3, length: f64, tag: &str| {
        let mut o = ObjectSpec::new(
            id,
            Shape::Capsule { radius: cfg.rod_radius, half_length: 0.5 * length - cfg.rod_radius },
            [centre.x, centre.y, centre.z],
        );
        o.orientation = orientation;
        o.color = ROD_COLOR;
        o.tags = alloc::vec!["stimulus".into(), tag.into()];
        o.motion = Some(motion.clone());
        o
    };
    let centre = display.rod_centre(cfg);
    match stimulus {
        Stimulus::Complete => alloc::vec![rod(ROD_ID, centre, cfg.rod_length, "rod")],
        Stimulus::Occluded => {
            let front = display.eye + display.forward() * (cfg.distance - cfg.box_gap);
            let mut occluder = ObjectSpec::new(
                BOX_ID,
                Shape::Box { half_extents: [0.005, 0.5 * cfg.box_span, 0.5 * cfg.box_width] },
                [front.x, front.y, front.z],
            );
            occluder.orientation = orientation;
            occluder.color = BOX_COLOR;
            occluder.tags = alloc::vec!["occluder".into(), "stimulus".into()];
            alloc::vec![rod(ROD_ID, centre, cfg.rod_length, "rod"), occluder]
        }
        Stimulus::Broken => {
            let piece = 0.5 * (cfg.rod_length - cfg.box_width);
            let offset = display.along() * (0.5 * cfg.box_width + 0.5 * piece);
            alloc::vec![
                rod(LOWER_ID, centre - offset, piece, "rod_segment"),
                rod(UPPER_ID, centre + offset, piece, "rod_segment"),
            ]
        }
    }
}

struct Runner<'a, A: AgentLink> {
    world: WorldState,
    agent: A,
    cfg: &'a RodAndBoxConfig,
    display: Display,
    pending: Vec<Event>,
}

impl<A: AgentLink> Runner<'_, A> {
    fn tick(&mut self) -> Result<(), EvalError<A::Error>> {
        let obs = Observation::sense(&self.world, self.cfg.acuity);
        let events = core::mem::take(&mut self.pending);
        let action = self.agent.act(&events, &obs).map_err(EvalError::Agent)?;
        self.world.step(&action, &CaregiverCommand::default())?;
        Ok(())
    }

    fn blank(&mut self) -> Result<(), EvalError<A::Error>> {
        for _ in 0..RodAndBoxConfig::ticks(self.cfg.blank_s) {
            self.tick()?;
        }
        Ok(())
    }

    fn present(&mut self, stimulus: Stimulus, index: usize) -> Result<Trial, EvalError<A::Error>> {
        let start_tick = self.world.tick;
        let specs = display_objects(&self.display, self.cfg, stimulus);
        for (i, spec) in specs.iter().enumerate() {
            self.world.insert_object(SceneObject::from_spec(spec, i, start_tick)?)?;
        }
        let tags = stimulus.tags();
        let aim = self.display.aim(self.cfg, start_tick);
        self.pending.push(Event::StimulusOn { stimulus_id: stimulus.wire_id(), tags: tags.clone() });
        let c = &self.cfg.criterion;
        let (away_limit, cap) = (RodAndBoxConfig::ticks(c.lookaway_end), RodAndBoxConfig::ticks(c.trial_cap));
        let mut gaze = Vec::new();
        let mut away = 0u64;
        let ended_by = loop {
            let (yaw, pitch) = gaze_angles_to(&self.world, &aim.position_at(self.world.tick + 1));
            self.pending.push(Event::GazeTarget { stimulus_id: stimulus.wire_id(), yaw: yaw as f32, pitch: pitch as f32 });
            self.tick()?;
            let on = gaze_on_stimulus(&self.world, &tags, self.cfg.gaze);
            gaze.push(on);
            away = if on { 0 } else { away + 1 };
            if gaze.len() as u64 >= cap {
                break TrialEnd::Cap;
            }
            if away >= away_limit {
                break TrialEnd::LookAway;
            }
        };
        for spec in &specs {
            self.world.remove_object(spec.id);
        }
        self.pending.push(Event::StimulusOff { stimulus_id: stimulus.wire_id() });
        let looked = gaze.iter().filter(|g| **g).count() as u64;
        Ok(Trial {
            index,
            stimulus_id: stimulus.name().into(),
            start_tick,
            looking_time: crate::sim_time(looked),
            ended_by,
            gaze,
        })
    }
}

/// Runs the full scenario against `agent`. The world is stripped of moving
/// objects and the caregiver, interoception is frozen and the body settles
/// passively before the first trial. Returns the report and the final world.
pub fn run_rod_and_box<A: AgentLink>(
    mut world: WorldState,
    cfg: &RodAndBoxConfig,
    agent: A,
) -> Result<(HabituationReport, WorldState), EvalError<A::Error>> {
    cfg.validate()?;
    world.dismiss_caregiver();
    world.intero_frozen = true;
    world.seed = cfg.seed;
    world.objects.retain(|o| o.is_static());
    for _ in 0..RodAndBoxConfig::ticks(cfg.settle_s) {
        world.step(&Action::zero(), &CaregiverCommand::default())?;
    }
    let display = Display::facing(&world);
    let mut run = Runner { world, agent, cfg, display, pending: Vec::new() };

    let mut habituation_trials: Vec<Trial> = Vec::new();
    let mut times = Vec::new();
    let mut habituated_at = None;
    for k in 1..=cfg.criterion.max_trials {
        if k > 1 {
            run.blank()?;
        }
        let trial = run.present(Stimulus::Occluded, k)?;
        times.push(trial.looking_time);
        habituation_trials.push(trial);
        if habituation_reached(&times, &cfg.criterion) {
            habituated_at = Some(k);
            break;
        }
    }

    let mut report = HabituationReport {
        scenario: "rod_and_box".into(),
        seed: cfg.seed,
        criterion: cfg.criterion,
        habituation_trials,
        habituated_at,
        test_trials: Vec::new(),
        novelty_preference: None,
        flags: Vec::new(),
    };
    if habituated_at.is_none() {
        report.flags.push(ReportFlag::NotHabituated);
        return Ok((report, run.world));
    }
    let (first, second) =
        if cfg.seed % 2 == 0 { (Stimulus::Complete, Stimulus::Broken) } else { (Stimulus::Broken, Stimulus::Complete) };
    for k in 1..=cfg.test_trials {
        run.blank()?;
        let stimulus = if k % 2 == 1 { first } else { second };
        report.test_trials.push(run.present(stimulus, k)?);
    }
    let (novel, familiar) = report.test_looking();
    report.novelty_preference = novelty_preference(novel, familiar);
    if report.novelty_preference.is_none() {
        report.flags.push(ReportFlag::NoLooking);
    }
    Ok((report, run.world))
}
