#![allow(dead_code)]

use std::sync::Arc;

use sedro_core::caregiver::CaregiverScript;
use sedro_core::development::{Schedule, ScheduleSpec};
use sedro_core::world::load_scene;
use sedro_core::{BodyModel, BodySpec, SceneSpec, WorldState};

pub const BODY: &str = include_str!("../../../../assets/body/infant_3m.json");
pub const NURSERY: &str = include_str!("../../../../assets/scenes/nursery.json");
pub const WOMB: &str = include_str!("../../../../assets/scenes/womb.json");
pub const CAREGIVER: &str = include_str!("../../../../assets/caregiver/default.json");
pub const SCHEDULE: &str = include_str!("../../../../assets/schedules/default.json");

pub fn model() -> Arc<BodyModel> {
    let spec: BodySpec = serde_json::from_str(BODY).unwrap();
    Arc::new(BodyModel::from_spec(&spec).unwrap())
}

pub fn scene(name: &str) -> SceneSpec {
    let text = match name {
        "nursery" => NURSERY,
        "womb" => WOMB,
        other => panic!("no scene {other}"),
    };
    serde_json::from_str(text).unwrap()
}

pub fn script() -> Arc<CaregiverScript> {
    Arc::new(serde_json::from_str(CAREGIVER).unwrap())
}

pub fn schedule() -> Schedule {
    let spec: ScheduleSpec = serde_json::from_str(SCHEDULE).unwrap();
    Schedule::new(spec).unwrap()
}

pub fn world(name: &str) -> WorldState {
    load_scene(&scene(name), model(), None).unwrap()
}

pub fn world_with_caregiver(name: &str) -> WorldState {
    load_scene(&scene(name), model(), Some(script())).unwrap()
}

/// The nursery with every object removed: the body floats in free space.
pub fn empty_world() -> WorldState {
    let mut spec = scene("nursery");
    spec.objects.clear();
    load_scene(&spec, model(), None).unwrap()
}

/// Deterministic pseudo-random action for `(seed, tick)`.
pub fn random_action(seed: u64, tick: u64) -> sedro_core::Action {
    use sedro_core::rng::{SimRng, Stream};
    let mut rng = SimRng::new(seed).at(tick, Stream::Eval);
    let values: Vec<f64> = (0..sedro_core::sensors::ACTION_CHANNELS).map(|_| rng.uniform(-1.0, 1.0)).collect();
    sedro_core::Action::from_channels(&values).unwrap()
}

pub fn bundles() -> Vec<sedro_core::env::SceneBundle> {
    vec![
        sedro_core::env::SceneBundle { spec: scene("nursery"), script: Some(script()) },
        sedro_core::env::SceneBundle { spec: scene("womb"), script: None },
    ]
}

/// Environment in the nursery at `age0` days with the shipped schedule.
pub fn environment(age0: f64, caregiver: bool) -> sedro_core::Environment {
    let options = sedro_core::EnvOptions { age0, caregiver, ..Default::default() };
    sedro_core::Environment::new(world_with_caregiver("nursery"), schedule(), Arc::new(bundles()), options).unwrap()
}
