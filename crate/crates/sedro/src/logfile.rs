//! Session log files and replay against the assets they name.

use std::path::{Path, PathBuf};

use sedro_core::replay::{replay, LogError, LogHeader, ReplayReport, SessionLog};
use sedro_core::EnvOptions;
use thiserror::Error;

use crate::assets::{AssetError, AssetPaths, Assets};

#[derive(Debug, Error)]
pub enum LogFileError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Corrupt { path: PathBuf, source: LogError },
}

pub fn write_log(path: &Path, log: &SessionLog) -> Result<(), LogFileError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| LogFileError::Io { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, log.encode()).map_err(|source| LogFileError::Io { path: path.to_path_buf(), source })
}

pub fn read_log(path: &Path) -> Result<SessionLog, LogFileError> {
    let bytes = std::fs::read(path).map_err(|source| LogFileError::Io { path: path.to_path_buf(), source })?;
    SessionLog::decode(&bytes).map_err(|source| LogFileError::Corrupt { path: path.to_path_buf(), source })
}

#[derive(Debug, Error)]
pub enum ReplaySetupError {
    #[error(transparent)]
    Assets(#[from] AssetError),
    #[error("assets changed since the log was written (digest {actual:016x}, log has {expected:016x})")]
    AssetsChanged { expected: u64, actual: u64 },
}

/// The asset paths a log header names.
pub fn header_paths(header: &LogHeader) -> AssetPaths {
    AssetPaths {
        scene: Some(header.scene.clone().into()),
        schedule: Some(header.schedule.clone().into()),
        script: (!header.script.is_empty()).then(|| header.script.clone().into()),
    }
}

/// Rebuilds the session's starting environment from the header's files and
/// re-simulates the recorded actions.
pub fn replay_log(log: &SessionLog) -> Result<ReplayReport, ReplaySetupError> {
    let h = &log.header;
    let assets = Assets::load(&header_paths(h))?;
    if assets.digest != h.assets_digest {
        return Err(ReplaySetupError::AssetsChanged { expected: h.assets_digest, actual: assets.digest });
    }
    let options = EnvOptions { time_scale: h.time_scale, age0: h.age0, caregiver: h.caregiver };
    let mut env = assets.environment(Some(h.seed), options)?;
    Ok(replay(&mut env, &log.records))
}
