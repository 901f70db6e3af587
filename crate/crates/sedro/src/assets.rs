//! Locating and loading scene, schedule, body and caregiver files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sedro_core::caregiver::CaregiverScript;
use sedro_core::codec::digest;
use sedro_core::development::{DevelopmentError, Schedule, ScheduleSpec};
use sedro_core::env::{EnvError, SceneBundle};
use sedro_core::scene::SceneError;
use sedro_core::world::load_scene;
use sedro_core::{BodyModel, BodySpec, EnvOptions, Environment, SceneSpec, WorldState};
use serde::de::DeserializeOwned;
use thiserror::Error;

/// Environment variable naming the default asset root.
pub const DATA_DIR_VAR: &str = "SEDRO_DATA_DIR";

pub const DEFAULT_SCENE: &str = "scenes/nursery.json";
pub const DEFAULT_SCHEDULE: &str = "schedules/default.json";

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

fn invalid(path: &Path, message: impl ToString) -> AssetError {
    AssetError::Invalid { path: path.to_path_buf(), message: message.to_string() }
}

/// `$SEDRO_DATA_DIR`, else `./assets` when present, else the assets shipped
/// with the source tree.
pub fn data_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(DATA_DIR_VAR) {
        return dir.into();
    }
    let local = Path::new("assets");
    if local.is_dir() {
        return local.to_path_buf();
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

/// Paths as given are tried relative to the working directory first, then
/// to `root`.
pub fn resolve(root: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        path.to_path_buf()
    } else {
        root.join(path)
    }
}

fn read(path: &Path) -> Result<Vec<u8>, AssetError> {
    std::fs::read(path).map_err(|source| AssetError::Io { path: path.to_path_buf(), source })
}

fn parse<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T, AssetError> {
    serde_json::from_slice(bytes).map_err(|source| AssetError::Parse { path: path.to_path_buf(), source })
}

fn canonical(path: &Path) -> Result<PathBuf, AssetError> {
    path.canonicalize().map_err(|source| AssetError::Io { path: path.to_path_buf(), source })
}

/// Reads and parses a JSON file.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, AssetError> {
    parse(path, &read(path)?)
}

/// The files a session is built from. `script` replaces the scenes' own
/// caregiver reference.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AssetPaths {
    pub scene: Option<PathBuf>,
    pub schedule: Option<PathBuf>,
    pub script: Option<PathBuf>,
}

/// Validated assets, ready to build worlds from.
#[derive(Clone, Debug)]
pub struct Assets {
    pub scene_path: PathBuf,
    pub schedule_path: PathBuf,
    pub script_path: Option<PathBuf>,
    pub spec: SceneSpec,
    pub model: Arc<BodyModel>,
    pub script: Option<Arc<CaregiverScript>>,
    pub schedule: Schedule,
    /// Every scene the schedule can move the agent into.
    pub scenes: Vec<SceneBundle>,
    /// Digest over the bytes of every file read.
    pub digest: u64,
}

struct Digest(Vec<u8>);

impl Digest {
    fn add(&mut self, bytes: &[u8]) {
        self.0.extend((bytes.len() as u64).to_le_bytes());
        self.0.extend(bytes);
    }
}

type LoadedScript = Option<(PathBuf, Arc<CaregiverScript>)>;

fn load_script(hash: &mut Digest, replace: Option<&Path>, spec: &SceneSpec, dir: &Path) -> Result<LoadedScript, AssetError> {
    let path = match (replace, &spec.caregiver_script_ref) {
        (Some(p), Some(_)) => p.to_path_buf(),
        (None, Some(r)) => canonical(&dir.join(r))?,
        (_, None) => return Ok(None),
    };
    let bytes = read(&path)?;
    hash.add(&bytes);
    let script: CaregiverScript = parse(&path, &bytes)?;
    script.validate().map_err(|e| invalid(&path, e))?;
    Ok(Some((path, Arc::new(script))))
}

impl Assets {
    pub fn load(paths: &AssetPaths) -> Result<Self, AssetError> {
        Self::load_from(&data_dir(), paths)
    }

    pub fn load_from(root: &Path, paths: &AssetPaths) -> Result<Self, AssetError> {
        let pick = |p: &Option<PathBuf>, default: &str| resolve(root, p.as_deref().unwrap_or(Path::new(default)));
        let scene_path = canonical(&pick(&paths.scene, DEFAULT_SCENE))?;
        let schedule_path = canonical(&pick(&paths.schedule, DEFAULT_SCHEDULE))?;
        let script_override = paths.script.as_ref().map(|p| canonical(&resolve(root, p))).transpose()?;
        let mut hash = Digest(Vec::new());

        let bytes = read(&scene_path)?;
        hash.add(&bytes);
        let spec: SceneSpec = parse(&scene_path, &bytes)?;
        let scene_dir = scene_path.parent().unwrap_or(Path::new("."));

        let body_path = scene_dir.join(&spec.body_spec_ref);
        let bytes = read(&body_path)?;
        hash.add(&bytes);
        let body: BodySpec = parse(&body_path, &bytes)?;
        let model = Arc::new(BodyModel::from_spec(&body).map_err(|e| invalid(&body_path, e))?);

        let bytes = read(&schedule_path)?;
        hash.add(&bytes);
        let schedule_spec: ScheduleSpec = parse(&schedule_path, &bytes)?;
        let schedule = Schedule::new(schedule_spec).map_err(|e: DevelopmentError| invalid(&schedule_path, e))?;

        let main = load_script(&mut hash, script_override.as_deref(), &spec, scene_dir)?;
        let script_path = main.as_ref().map(|(p, _)| p.clone());
        let script = main.map(|(_, s)| s);
        let mut scenes = vec![SceneBundle { spec: spec.clone(), script: script.clone() }];
        let wanted: BTreeSet<&str> = schedule.stages().iter().map(|s| s.scene_id.as_str()).collect();
        for id in wanted {
            if id == spec.scene_id {
                continue;
            }
            let path = scene_dir.join(format!("{id}.json"));
            if !path.is_file() {
                continue;
            }
            let bytes = read(&path)?;
            hash.add(&bytes);
            let other: SceneSpec = parse(&path, &bytes)?;
            if other.scene_id != id {
                return Err(invalid(&path, format!("scene_id is `{}`, expected `{id}`", other.scene_id)));
            }
            let script = load_script(&mut hash, script_override.as_deref(), &other, scene_dir)?.map(|(_, s)| s);
            scenes.push(SceneBundle { spec: other, script });
        }
        load_scene(&spec, model.clone(), script.clone()).map_err(|e| invalid(&scene_path, e))?;

        Ok(Self {
            scene_path,
            schedule_path,
            script_path,
            spec,
            model,
            script,
            schedule,
            scenes,
            digest: digest(&hash.0),
        })
    }

    /// Tick-0 world of the main scene; `seed` replaces the scene's seed.
    pub fn world(&self, seed: Option<u64>) -> Result<WorldState, AssetError> {
        let mut spec = self.spec.clone();
        if let Some(s) = seed {
            spec.seed = s;
        }
        Ok(load_scene(&spec, self.model.clone(), self.script.clone())?)
    }

    pub fn environment(&self, seed: Option<u64>, options: EnvOptions) -> Result<Environment, AssetError> {
        let world = self.world(seed)?;
        Ok(Environment::new(world, self.schedule.clone(), Arc::new(self.scenes.clone()), options)?)
    }
}
