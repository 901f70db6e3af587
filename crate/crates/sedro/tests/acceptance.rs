//! The headline acceptance criteria, run one after another (so wall-clock
//! limits are measured without contention), one PASS/FAIL line each.
//! Extra arguments filter criteria by name.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{asset, assets, assets_dir, bin};
use sedro::agents::{BuiltinAgent, Policy, RandomAgent};
use sedro::eval::Scenario;
use sedro::logfile::read_log;
use sedro::report::{read_report, write_report};
use sedro_core::caregiver::CaregiverCommand;
use sedro_core::eval::oracle::OracleMode;
use sedro_core::eval::{habituation_point, habituation_reached, AgentLink, HabituationCriterion};
use sedro_core::protocol::{
    decode_action, decode_hello, decode_observation, encode_action, encode_hello, encode_observation, Event, Frame,
    FrameType, OBS_PAYLOAD_LEN,
};
use sedro_core::scene::ObjectSpec;
use sedro_core::sensors::{apply_action, sense_retina, TOUCH_BYTES};
use sedro_core::world::load_scene;
use sedro_core::{Action, EnvOptions, Environment, Shape, DT};
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn env(age0: f64, caregiver: bool) -> Environment {
    assets().environment(None, EnvOptions { age0, caregiver, time_scale: 1.0 }).unwrap()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let agent = format!("{} agent --stdio --policy random --seed 4", bin());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(bin())
            .args(["run", "--max-ticks", "10000", "--seed", "11", "--age0", "120", "--agent-cmd", &agent, "--out"])
            .arg(&out)
            .env("SEDRO_DATA_DIR", assets_dir())
            .output()
            .unwrap();
        ensure(status.status.success(), || format!("run {name} failed: {}", String::from_utf8_lossy(&status.stderr)))?;
        Ok::<_, String>(std::fs::read(out).unwrap())
    };
    let a = run("a.sdlg")?;
    let b = run("b.sdlg")?;
    ensure(a == b, || "session logs differ".into())?;
    let log = read_log(&dir.path().join("a.sdlg")).unwrap();
    ensure(log.records.len() == 10_000, || format!("{} ticks logged", log.records.len()))?;
    let replay = Command::new(bin()).arg("replay").arg(dir.path().join("a.sdlg")).output().unwrap();
    let text = String::from_utf8_lossy(&replay.stdout);
    ensure(replay.status.success() && text.contains("0 divergences"), || format!("replay: {text}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("2 x 10000 ticks byte-identical ({} bytes), replay 0 divergences, {secs:.1} s", a.len()))
}

fn integrator() -> Outcome {
    let a = assets();
    let mut spec = a.spec.clone();
    spec.objects.clear();
    let mut ball = ObjectSpec::new(5, Shape::Sphere { radius: 0.05 }, [3.0, 3.0, 50.0]);
    ball.mass = 0.2;
    spec.objects.push(ball);
    let mut w = load_scene(&spec, a.model.clone(), None).unwrap();
    let z_body = w.body.root().position.z;
    let g = -spec.gravity[2];
    let mut worst = 0.0f64;
    for n in 1..=500u64 {
        w.step(&Action::zero(), &CaregiverCommand::default()).unwrap();
        let expected = g * DT * DT * (n * (n + 1)) as f64 / 2.0;
        for drop in [50.0 - w.object(5).unwrap().pose.position.z, z_body - w.body.root().position.z] {
            worst = worst.max((drop - expected).abs() / expected);
        }
    }
    ensure(worst <= 1e-9, || format!("relative error {worst:e}"))?;
    Ok(format!("sphere and body over 500 steps, worst relative error {worst:.2e}"))
}

fn sensor_contracts() -> Outcome {
    let mut e = env(10.0, true);
    let mut agent = RandomAgent::new(9);
    for _ in 0..1000 {
        let obs = e.observe();
        let payload = encode_observation(&obs);
        ensure(payload.len() == OBS_PAYLOAD_LEN && OBS_PAYLOAD_LEN == 4332, || format!("payload {}", payload.len()))?;
        let back = decode_observation(obs.tick, &payload).unwrap();
        let floats = back.proprio.iter().chain(&back.eye).chain(&back.vestibular).chain(&back.intero);
        ensure(floats.into_iter().all(|v| v.is_finite()), || format!("non-finite value at tick {}", obs.tick))?;
        let bits: Vec<u8> = (0..TOUCH_BYTES * 8).map(|i| back.touch.get(i) as u8).collect();
        ensure(bits.iter().all(|b| *b <= 1) && bits.len() == 128, || "touch not binary".into())?;
        let energy = back.energy();
        ensure((0.0..=1.0).contains(&energy), || format!("energy {energy} at tick {}", obs.tick))?;
        let action = agent.act(&[], &back).unwrap();
        e.step(&action).map_err(|err| err.to_string())?;
    }
    Ok("1000 random-action ticks: finite, binary touch, energy in [0, 1], 4332-byte payloads".into())
}

fn gating() -> Outcome {
    let schedule: Value = serde_json::from_slice(&std::fs::read(asset("schedules/default.json")).unwrap()).unwrap();
    let stages = schedule["stages"].as_array().unwrap();
    let at = |day: f64, key: &str, end: bool| -> f64 {
        let s = stages.iter().find(|s| s[if end { "end_day" } else { "start_day" }].as_f64() == Some(day)).unwrap();
        s[key][end as usize].as_f64().unwrap()
    };
    let expected = at(0.0, "strength", false) / at(365.0, "strength", true);
    let young = env(0.0, false);
    let old = env(365.0, false);
    let model = assets().model;
    let mut agent = RandomAgent::new(1);
    let mut checked = 0;
    for t in 0..50 {
        let a = agent.act(&[], &sedro_core::Observation::blank(t)).unwrap();
        let ty = apply_action(&a, young.stage(), &model).torques;
        let to = apply_action(&a, old.stage(), &model).torques;
        for (y, o) in ty.iter().zip(&to) {
            if o.abs() > 1e-9 {
                let ratio = y.abs() / o.abs();
                ensure((ratio - expected).abs() < 1e-9, || format!("ratio {ratio} vs {expected}"))?;
                checked += 1;
            }
        }
    }
    let mut e = env(0.0, false);
    let mut look = Action::zero();
    look.eye = [0.6, 0.5, 0.0];
    for _ in 0..30 {
        e.step(&look).unwrap();
    }
    let counts: Vec<usize> = [0.0, 90.0, 180.0, 270.0, 365.0]
        .iter()
        .map(|age| sense_retina(e.world(), e_schedule_acuity(*age)).0.distinct_colors())
        .collect();
    ensure(counts.windows(2).all(|w| w[0] <= w[1]) && counts[4] > counts[0], || format!("fovea counts {counts:?}"))?;
    Ok(format!("torque ratio {expected:.4} on {checked} channels, fovea distinct values {counts:?}"))
}

fn e_schedule_acuity(age: f64) -> f64 {
    assets().schedule.stage_at(age).unwrap().acuity_factor
}

fn homeostasis() -> Outcome {
    let mut fed = env(30.0, true);
    let day = 24 * 3600 * 50u64;
    let mut lowest = 1.0f64;
    for _ in 0..day {
        fed.step(&Action::zero()).map_err(|e| e.to_string())?;
        lowest = lowest.min(fed.world().intero.energy);
        ensure(lowest > 0.0, || format!("starved at tick {}", fed.tick()))?;
    }
    let mut alone = env(30.0, false);
    let limit = 800_000u64;
    while alone.world().intero.energy > 0.0 && alone.tick() < limit {
        alone.step(&Action::zero()).map_err(|e| e.to_string())?;
    }
    let empty_at = alone.tick();
    let target = 14_400 * 50;
    ensure(empty_at.abs_diff(target) <= 50, || format!("energy reached 0 at tick {empty_at}, expected {target} +- 50"))?;
    Ok(format!("24 h with caregiver, lowest energy {lowest:.4}; alone, empty at tick {empty_at} ({} s)", empty_at / 50))
}

/// Direct evaluation of the rule: habituated at the first trial n with
/// n >= min_trials and mean(last window) < ratio * mean(first window).
fn brute_force(times: &[f64], c: &HabituationCriterion) -> Option<usize> {
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (1..=times.len().min(c.max_trials)).find(|&n| {
        n >= c.min_trials && n >= c.window && mean(&times[n - c.window..n]) < c.ratio * mean(&times[..c.window])
    })
}

fn habituation() -> Outcome {
    let c = HabituationCriterion::default();
    let geometric: Vec<f64> = (1..=c.max_trials).map(|k| 60.0 * 0.7f64.powi(k as i32 - 1)).collect();
    let oracle = brute_force(&geometric, &c);
    ensure(oracle == Some(6), || format!("oracle says {oracle:?}"))?;
    let found = habituation_point(&geometric, &c);
    ensure(found == oracle, || format!("criterion says {found:?}"))?;
    ensure(!habituation_reached(&geometric[..5], &c), || "fired before trial 6".into())?;
    for v in [0.5, 10.0, 30.0, 60.0] {
        let constant = vec![v; c.max_trials];
        for n in 1..=c.max_trials {
            ensure(!habituation_reached(&constant[..n], &c), || format!("constant {v} fired at {n}"))?;
        }
    }
    Ok("60*0.7^(k-1) habituates at trial 6 (brute force agrees); constants never fire through 14 trials".into())
}

fn rod_and_box() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config: Value = serde_json::from_slice(&std::fs::read(asset("experiments/rod_and_box.json")).unwrap()).unwrap();
    let scenario = Scenario::from_id("rod_and_box", Some(config)).unwrap();
    let mut parts = Vec::new();
    let mut run = |mode: OracleMode, name: &str| -> Result<(f64, f64, f64), String> {
        let start = Instant::now();
        let world = assets().world(None).unwrap();
        let report = scenario.run(world, BuiltinAgent::new(Policy::Oracle(mode), 0)).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("{name}.json"));
        write_report(&report, &path).map_err(|e| e.to_string())?;
        ensure(read_report(&path).ok().as_ref() == Some(&report), || "report round trip".into())?;
        let secs = start.elapsed().as_secs_f64();
        ensure(secs < 120.0, || format!("{name} took {secs:.1} s"))?;
        let (novel, familiar) = report.test_looking();
        let pref = report.novelty_preference.ok_or_else(|| format!("{name}: no preference, flags {:?}", report.flags))?;
        parts.push(format!("{name} {pref:.3} ({secs:.0} s)"));
        Ok((pref, novel, familiar))
    };
    let (fam, _, _) = run(OracleMode::Familiarity, "familiarity")?;
    let (nov, _, _) = run(OracleMode::Novelty, "novelty")?;
    let (sym, novel, familiar) = run(OracleMode::Symmetric, "symmetric")?;
    ensure(fam < 0.45, || format!("familiarity preference {fam:.3}"))?;
    ensure(nov > 0.55, || format!("novelty preference {nov:.3}"))?;
    ensure((novel - familiar).abs() <= DT + 1e-12, || format!("symmetric looks {novel} vs {familiar} (pref {sym:.3})"))?;
    Ok(parts.join(", "))
}

fn golden() -> Outcome {
    let dir = assets_dir().join("fixtures");
    let read = |f: &str| std::fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}"));
    let manifest: Value = serde_json::from_slice(&read("fixtures.json")?).unwrap();
    let hello = Frame::new(FrameType::Hello, 0, encode_hello(&[1])).encode();
    ensure(hello == read("hello_v1.bin")?, || "hello".into())?;
    let offered = decode_hello(&Frame::decode(&read("hello_v1_v2.bin")?).unwrap().payload).unwrap();
    ensure(offered == [1, 2], || "hello v1,v2".into())?;
    let mut n = 2;
    for e in manifest["valid"].as_array().unwrap() {
        let file = e["file"].as_str().unwrap();
        let raw = read(file)?;
        let f = Frame::decode(&raw).map_err(|err| format!("{file}: {err}"))?;
        let payload = match f.kind {
            FrameType::Obs => encode_observation(&decode_observation(f.tick, &f.payload).unwrap()),
            FrameType::Act => encode_action(&decode_action(&f.payload).unwrap()),
            FrameType::Event => Event::decode(&f.payload).unwrap().encode(),
            _ => f.payload.clone(),
        };
        ensure(Frame::new(f.kind, f.tick, payload).encode() == raw, || format!("{file} differs"))?;
        n += 1;
    }
    let mut m = 0;
    for e in manifest["malformed"].as_array().unwrap() {
        let file = e["file"].as_str().unwrap();
        let raw = read(file)?;
        let err = match e["stage"].as_str().unwrap() {
            "frame" => Frame::decode(&raw).err(),
            stage => {
                let f = Frame::decode(&raw).map_err(|err| format!("{file}: {err}"))?;
                match stage {
                    "hello" => decode_hello(&f.payload).err(),
                    "action" => decode_action(&f.payload).err(),
                    "observation" => decode_observation(0, &f.payload).err(),
                    _ => Event::decode(&f.payload).err(),
                }
            }
        };
        let code = err.map(|e| format!("{:?}", e.code()));
        ensure(code.as_deref() == e["code"].as_str(), || format!("{file}: got {code:?}"))?;
        m += 1;
    }
    Ok(format!("{n} valid frames bit-exact, {m} malformed frames give their codes"))
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 8] = [
        ("determinism", determinism),
        ("integrator", integrator),
        ("sensor_contracts", sensor_contracts),
        ("developmental_gating", gating),
        ("homeostasis", homeostasis),
        ("habituation_criterion", habituation),
        ("rod_and_box", rod_and_box),
        ("protocol_golden_vectors", golden),
    ];
    assert!(Path::new(&assets_dir()).is_dir());
    let mut failed = Vec::new();
    for (name, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(name);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("{} criteria failed: {}", failed.len(), failed.join(", "));
        std::process::exit(1);
    }
}
