//! Command-line front end. Each `cmd_*` returns `Ok` or an error carrying
//! the process exit code.

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command as Process, Stdio};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use sedro_core::caregiver::CaregiverScript;
use sedro_core::development::ScheduleSpec;
use sedro_core::eval::{HabituationReport, ReportFlag};
use sedro_core::protocol::SUPPORTED_VERSIONS;
use sedro_core::replay::{LogHeader, LogStatus, SessionLog, LOG_MAGIC};
use sedro_core::{BodySpec, EnvOptions};
use serde::Deserialize;
use thiserror::Error;

use crate::agents::{BuiltinAgent, Policy};
use crate::assets::{load_json, AssetError, AssetPaths, Assets};
use crate::client::ClientSession;
use crate::eval::{RemoteAgent, Scenario};
use crate::logfile::{read_log, replay_log, write_log};
use crate::report::{csv_path, write_report};
use crate::session::{run_session, SessionOutcome};
use crate::transport::{accept_timeout, Connection};

pub const EXIT_DIVERGED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_AGENT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Assets(#[from] AssetError),
    #[error("agent: {0}")]
    Agent(String),
    #[error("replay diverged at tick {tick}: {detail}")]
    Diverged { tick: u64, detail: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Assets(_) => EXIT_CONFIG,
            CliError::Agent(_) => EXIT_AGENT,
            CliError::Diverged { .. } => EXIT_DIVERGED,
        }
    }
}

fn config_err(e: impl ToString) -> CliError {
    CliError::Config(e.to_string())
}

fn agent_err(e: impl ToString) -> CliError {
    CliError::Agent(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "sedro", version, about = "Developmental robotics simulation server")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Serve one lockstep session to an agent and write its log.
    Run(RunArgs),
    /// Run an evaluation scenario against an agent.
    Eval(EvalArgs),
    /// Re-simulate a session log and check every observation.
    Replay {
        log: PathBuf,
    },
    /// Summarize a scene, schedule, body, caregiver script or session log.
    Inspect {
        path: PathBuf,
    },
    /// Connect a built-in agent to a server.
    Agent(AgentArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct AssetArgs {
    /// Scene file (default scenes/nursery.json under the data dir).
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Developmental schedule file.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Caregiver script replacing the scene's own.
    #[arg(long)]
    pub script: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct RunArgs {
    /// JSON file with any of the flag values; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub assets: AssetArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub time_scale: Option<f64>,
    /// Age at tick 0, days.
    #[arg(long, allow_negative_numbers = true)]
    pub age0: Option<f64>,
    #[arg(long)]
    pub caregiver: Option<bool>,
    #[arg(long)]
    pub max_ticks: Option<u64>,
    /// Address to accept the agent on.
    #[arg(long)]
    pub listen: Option<String>,
    /// Session log path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timeout_s: Option<f64>,
    /// Start this shell command and talk to it over its stdin and stdout
    /// instead of listening.
    #[arg(long)]
    pub agent_cmd: Option<String>,
}

/// File form of [`RunArgs`].
#[derive(Deserialize, Debug, Default, Clone, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene: Option<PathBuf>,
    pub schedule: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub seed: Option<u64>,
    pub time_scale: Option<f64>,
    pub age0: Option<f64>,
    pub caregiver: Option<bool>,
    pub max_ticks: Option<u64>,
    pub listen: Option<String>,
    pub out: Option<PathBuf>,
    pub timeout_s: Option<f64>,
    pub agent_cmd: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSettings {
    pub assets: AssetPaths,
    /// `None` keeps the scene's seed.
    pub seed: Option<u64>,
    pub time_scale: f64,
    pub age0: f64,
    pub caregiver: bool,
    pub max_ticks: u64,
    pub listen: String,
    pub out: PathBuf,
    pub timeout: Duration,
    pub agent_cmd: Option<String>,
}

pub const DEFAULT_LISTEN: &str = "127.0.0.1:7878";
pub const DEFAULT_MAX_TICKS: u64 = 1000;

fn timeout(seconds: Option<f64>) -> Result<Duration, CliError> {
    let s = seconds.unwrap_or(30.0);
    Duration::try_from_secs_f64(s)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| config_err(format!("--timeout-s must be positive, got {s}")))
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        Some(p) => Ok(load_json(p)?),
        None => Ok(T::default()),
    }
}

impl RunArgs {
    /// Merges the config file under the flags and fills in defaults.
    pub fn settings(&self) -> Result<RunSettings, CliError> {
        let file: RunConfig = read_config(self.config.as_deref())?;
        let a = &self.assets;
        Ok(RunSettings {
            assets: AssetPaths {
                scene: a.scene.clone().or(file.scene),
                schedule: a.schedule.clone().or(file.schedule),
                script: a.script.clone().or(file.script),
            },
            seed: self.seed.or(file.seed),
            time_scale: self.time_scale.or(file.time_scale).unwrap_or(1.0),
            age0: self.age0.or(file.age0).unwrap_or(0.0),
            caregiver: self.caregiver.or(file.caregiver).unwrap_or(true),
            max_ticks: self.max_ticks.or(file.max_ticks).unwrap_or(DEFAULT_MAX_TICKS),
            listen: self.listen.clone().or(file.listen).unwrap_or_else(|| DEFAULT_LISTEN.into()),
            out: self.out.clone().or(file.out).unwrap_or_else(|| "session.sdlg".into()),
            timeout: timeout(self.timeout_s.or(file.timeout_s))?,
            agent_cmd: self.agent_cmd.clone().or(file.agent_cmd),
        })
    }
}

/// A validated session, ready to be served.
pub struct Prepared {
    pub settings: RunSettings,
    pub assets: Assets,
    pub env: sedro_core::Environment,
    pub header: LogHeader,
}

pub fn prepare(settings: RunSettings) -> Result<Prepared, CliError> {
    let assets = Assets::load(&settings.assets)?;
    let options = EnvOptions { time_scale: settings.time_scale, age0: settings.age0, caregiver: settings.caregiver };
    let env = assets.environment(settings.seed, options)?;
    let header = LogHeader {
        protocol_version: SUPPORTED_VERSIONS[SUPPORTED_VERSIONS.len() - 1],
        seed: env.world().seed,
        time_scale: settings.time_scale,
        age0: settings.age0,
        caregiver: settings.caregiver,
        max_ticks: settings.max_ticks,
        assets_digest: assets.digest,
        scene: assets.scene_path.to_string_lossy().into_owned(),
        schedule: assets.schedule_path.to_string_lossy().into_owned(),
        script: match settings.assets.script {
            Some(_) => assets.script_path.as_ref().map(|p| p.to_string_lossy().into_owned()).unwrap_or_default(),
            None => String::new(),
        },
    };
    Ok(Prepared { settings, assets, env, header })
}

/// Runs the session on `conn` and writes its log, aborted or not.
pub fn serve(mut prepared: Prepared, conn: &mut Connection) -> Result<SessionLog, CliError> {
    let outcome: SessionOutcome = run_session(conn, &mut prepared.env, prepared.header, prepared.settings.timeout);
    write_log(&prepared.settings.out, &outcome.log).map_err(config_err)?;
    match outcome.error {
        None => Ok(outcome.log),
        Some(e) => {
            warn!("session aborted after {} ticks: {e}", outcome.log.records.len());
            Err(agent_err(format!("{e} (partial log of {} ticks in {})", outcome.log.records.len(), prepared.settings.out.display())))
        }
    }
}

/// Accepts one agent on `listener` and serves it.
pub fn serve_listener(prepared: Prepared, listener: &TcpListener) -> Result<SessionLog, CliError> {
    let (stream, peer) = accept_timeout(listener, prepared.settings.timeout)
        .map_err(|e| agent_err(format!("no agent connected: {e}")))?;
    info!("agent connected from {peer}");
    let mut conn = Connection::tcp(stream).map_err(agent_err)?;
    serve(prepared, &mut conn)
}

struct AgentProcess {
    child: Child,
}

impl AgentProcess {
    fn spawn(cmd: &str) -> Result<(Self, Connection), CliError> {
        let mut child = Process::new("sh")
            .args(["-c", cmd])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| agent_err(format!("cannot start `{cmd}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = child.stdout.take().expect("piped");
        Ok((Self { child }, Connection::new(stdout, stdin, cmd)))
    }

    fn reap(mut self) {
        let deadline = Instant::now() + Duration::from_secs(2);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn with_agent<T>(
    settings_listen: &str,
    agent_cmd: Option<&str>,
    timeout: Duration,
    f: impl FnOnce(&mut Connection) -> Result<T, CliError>,
) -> Result<T, CliError> {
    match agent_cmd {
        Some(cmd) => {
            let (proc, mut conn) = AgentProcess::spawn(cmd)?;
            let out = f(&mut conn);
            drop(conn);
            proc.reap();
            out
        }
        None => {
            let listener = TcpListener::bind(settings_listen).map_err(|e| config_err(format!("cannot listen on {settings_listen}: {e}")))?;
            eprintln!("listening on {}", listener.local_addr().map_err(config_err)?);
            let (stream, peer) = accept_timeout(&listener, timeout).map_err(|e| agent_err(format!("no agent connected: {e}")))?;
            info!("agent connected from {peer}");
            let mut conn = Connection::tcp(stream).map_err(agent_err)?;
            f(&mut conn)
        }
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let prepared = prepare(args.settings()?)?;
    let s = prepared.settings.clone();
    let log = with_agent(&s.listen, s.agent_cmd.as_deref(), s.timeout, |conn| serve(prepared, conn))?;
    println!("session complete: {} ticks, log written to {}", log.records.len(), s.out.display());
    Ok(())
}

#[derive(Args, Debug, Default, Clone)]
pub struct EvalArgs {
    /// Registered scenario id.
    pub scenario: String,
    /// Scenario config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub assets: AssetArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub listen: Option<String>,
    /// Report path; the gaze CSV goes next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timeout_s: Option<f64>,
    #[arg(long, conflicts_with = "agent")]
    pub agent_cmd: Option<String>,
    /// Run a built-in agent in-process instead of serving one.
    #[arg(long)]
    pub agent: Option<Policy>,
}

/// Runs the scenario and writes its report. Returns the report and where
/// it went.
pub fn cmd_eval(args: &EvalArgs) -> Result<(HabituationReport, PathBuf), CliError> {
    let config = args.config.as_deref().map(load_json::<serde_json::Value>).transpose()?;
    let mut scenario = Scenario::from_id(&args.scenario, config).map_err(config_err)?;
    if let Some(seed) = args.seed {
        scenario.set_seed(seed);
    }
    scenario.validate().map_err(config_err)?;
    let assets = Assets::load(&AssetPaths {
        scene: args.assets.scene.clone(),
        schedule: args.assets.schedule.clone(),
        script: args.assets.script.clone(),
    })?;
    let world = assets.world(None)?;
    let timeout = timeout(args.timeout_s)?;
    let out = args.out.clone().unwrap_or_else(|| format!("{}_report.json", scenario.id()).into());

    let report = match args.agent {
        Some(policy) => {
            let seed = args.seed.unwrap_or(0);
            scenario.run(world, BuiltinAgent::new(policy, seed)).map_err(config_err)?
        }
        None => {
            let listen = args.listen.clone().unwrap_or_else(|| DEFAULT_LISTEN.into());
            with_agent(&listen, args.agent_cmd.as_deref(), timeout, |conn| {
                let mut agent = RemoteAgent::accept(conn, timeout).map_err(agent_err)?;
                let report = scenario.run(world, &mut agent).map_err(|e| match e {
                    sedro_core::eval::EvalError::Agent(a) => agent_err(a),
                    other => config_err(other),
                })?;
                agent.finish().map_err(agent_err)?;
                Ok(report)
            })?
        }
    };
    write_report(&report, &out).map_err(config_err)?;
    match report.novelty_preference {
        Some(p) => println!("novelty_preference: {p:.3}"),
        None => println!("novelty_preference: none"),
    }
    if report.flags.contains(&ReportFlag::NotHabituated) {
        println!("flag: not_habituated");
    }
    println!("report written to {} and {}", out.display(), csv_path(&out).display());
    Ok((report, out))
}

pub fn cmd_replay(path: &Path) -> Result<(), CliError> {
    let log = read_log(path).map_err(config_err)?;
    let report = replay_log(&log).map_err(config_err)?;
    if let Some((tick, d)) = report.divergence {
        return Err(CliError::Diverged { tick, detail: format!("{d:?}") });
    }
    let note = match log.status {
        LogStatus::Complete => "",
        LogStatus::Aborted => " (aborted session)",
        LogStatus::Truncated => " (log truncated)",
    };
    println!("verified, 0 divergences over {} ticks{note}", report.verified);
    Ok(())
}

pub fn cmd_inspect(path: &Path) -> Result<(), CliError> {
    let resolved = crate::assets::resolve(&crate::assets::data_dir(), path);
    let path = resolved.as_path();
    let bytes = std::fs::read(path).map_err(|source| AssetError::Io { path: path.into(), source })?;
    if bytes.starts_with(&LOG_MAGIC) {
        let log = SessionLog::decode(&bytes).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let h = &log.header;
        println!("session log, protocol v{}", h.protocol_version);
        println!("scene: {}\nschedule: {}", h.scene, h.schedule);
        if !h.script.is_empty() {
            println!("script: {}", h.script);
        }
        println!("seed: {}  time_scale: {}  age0: {}  caregiver: {}", h.seed, h.time_scale, h.age0, h.caregiver);
        println!("ticks: {} of {}  status: {:?}", log.records.len(), h.max_ticks, log.status);
        return Ok(());
    }
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|source| AssetError::Parse { path: path.into(), source })?;
    let has = |k: &str| value.get(k).is_some();
    if has("scene_id") {
        let assets = Assets::load(&AssetPaths { scene: Some(path.into()), ..Default::default() })?;
        let world = assets.world(None)?;
        let s = &assets.spec;
        println!("scene `{}` seed {}  objects: {}", s.scene_id, s.seed, s.objects.len());
        println!("gravity: {:?}  buoyancy: {}  umbilical: {}", s.gravity, s.buoyancy, s.umbilical);
        println!("caregiver: {}", assets.script.as_ref().map_or("none", |c| c.name.as_str()));
        println!("tick-0 state hash: {:016x}", world.state_hash());
    } else if has("stages") {
        let spec: ScheduleSpec = load_json(path)?;
        for st in &spec.stages {
            println!(
                "{:<12} days [{:>6}, {:>6})  acuity {:?}  strength {:?}  scene {}",
                st.id, st.start_day, st.end_day, st.acuity, st.strength, st.scene_id
            );
        }
    } else if has("links") {
        let spec: BodySpec = load_json(path)?;
        println!("body `{}`: {} links, {} channels", spec.name, spec.links.len(), spec.channels.len());
    } else if has("utterances") {
        let script: CaregiverScript = load_json(path)?;
        println!("caregiver `{}`: {} routines, {} utterances", script.name, script.routines.len(), script.utterances.len());
    } else {
        return Err(config_err(format!("{}: not a scene, schedule, body, caregiver script or session log", path.display())));
    }
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct AgentArgs {
    /// Server address.
    #[arg(long, required_unless_present = "stdio")]
    pub connect: Option<String>,
    /// Speak the protocol on stdin and stdout.
    #[arg(long, conflicts_with = "connect")]
    pub stdio: bool,
    #[arg(long, default_value = "zero")]
    pub policy: Policy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leave after this many ticks.
    #[arg(long)]
    pub max_ticks: Option<u64>,
}

/// Plays a built-in policy until the server says BYE. Returns ticks played.
pub fn cmd_agent(args: &AgentArgs) -> Result<u64, CliError> {
    let conn = match &args.connect {
        Some(addr) => Connection::connect(addr.as_str()).map_err(|e| agent_err(format!("cannot connect to {addr}: {e}")))?,
        None => Connection::stdio(),
    };
    let mut session = ClientSession::over(conn, SUPPORTED_VERSIONS).map_err(agent_err)?;
    let mut agent = BuiltinAgent::new(args.policy, args.seed);
    let played = match args.max_ticks {
        None => session.run(&mut agent).map_err(agent_err)?,
        Some(limit) => {
            let mut n = 0;
            while n < limit {
                let Some(step) = session.next_step().map_err(agent_err)? else { break };
                let a = sedro_core::eval::AgentLink::act(&mut agent, &step.events, &step.observation).unwrap_or_else(|e| match e {});
                session.act(&a).map_err(agent_err)?;
                n += 1;
            }
            session.close().map_err(agent_err)?;
            n
        }
    };
    info!("agent played {played} ticks");
    Ok(played)
}

fn run_command(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a).map(|_| ()),
        Command::Replay { log } => cmd_replay(log),
        Command::Inspect { path } => cmd_inspect(path),
        Command::Agent(a) => cmd_agent(a).map(|_| ()),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    match run_command(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

