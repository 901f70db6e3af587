#![allow(dead_code)]

use std::net::TcpListener;
use std::path::PathBuf;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use sedro::assets::{AssetPaths, Assets};
use sedro::cli::{prepare, serve_listener, CliError, RunSettings};
use sedro_core::replay::SessionLog;

pub fn assets_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

pub fn asset(rel: &str) -> PathBuf {
    assets_dir().join(rel)
}

pub fn assets() -> Assets {
    Assets::load_from(&assets_dir(), &AssetPaths::default()).unwrap()
}

pub fn settings(out: PathBuf, max_ticks: u64) -> RunSettings {
    RunSettings {
        assets: AssetPaths { scene: Some(asset("scenes/nursery.json")), schedule: Some(asset("schedules/default.json")), script: None },
        seed: None,
        time_scale: 1.0,
        age0: 30.0,
        caregiver: true,
        max_ticks,
        listen: "127.0.0.1:0".into(),
        out,
        timeout: Duration::from_secs(10),
        agent_cmd: None,
    }
}

/// Serves one session on an ephemeral port in the background.
pub fn server(settings: RunSettings) -> (String, JoinHandle<Result<SessionLog, CliError>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let prepared = prepare(settings).unwrap();
    (addr, thread::spawn(move || serve_listener(prepared, &listener)))
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sedro")
}
