mod common;

use common::*;
use proptest::prelude::*;
use sedro_core::caregiver::{caregiver_policy, emit_utterance, Behavior, Interaction};
use sedro_core::protocol::Event;
use sedro_core::sensors::DEFAULT_DECAY_RATE;
use sedro_core::{Action, Environment, DT};

fn vocal(level: f64) -> Action {
    let mut a = Action::zero();
    a.muscle[model().vocal_channel.unwrap()] = level;
    a
}

fn behavior(env: &Environment) -> Behavior {
    env.world().caregiver.as_ref().unwrap().behavior
}

#[test]
fn hunger_sends_an_idle_caregiver_to_approach() {
    let mut env = environment(30.0, true);
    env.world_mut().intero.energy = 0.2;
    assert_eq!(behavior(&env), Behavior::Idle);
    let w = env.world();
    let (next, cmd) = caregiver_policy(w, w.caregiver.as_ref().unwrap(), env.stage(), DT);
    assert_eq!(next.behavior, Behavior::Approach);
    assert!(cmd.velocity.norm() > 0.0);
    env.step(&Action::zero()).unwrap();
    assert_eq!(behavior(&env), Behavior::Approach);
    assert!(env.take_events().contains(&Event::CaregiverBehavior { behavior: Behavior::Approach.code() }));
}

#[test]
fn sated_quiet_agent_keeps_caregiver_idle() {
    // the first scheduled routine fires no earlier than 20 s in
    let mut env = environment(30.0, true);
    let home = env.world().caregiver.as_ref().unwrap().position;
    for _ in 0..500 {
        env.step(&Action::zero()).unwrap();
        assert_eq!(behavior(&env), Behavior::Idle);
    }
    assert!((env.world().caregiver.as_ref().unwrap().position - home).norm() < 1e-12);
}

#[test]
fn sustained_vocalization_triggers_respond() {
    let mut env = environment(30.0, true);
    let face = |env: &Environment| {
        let w = env.world();
        (w.caregiver.as_ref().unwrap().position - w.eye_pose().position).norm()
    };
    let start = face(&env);
    let mut entered = None;
    for t in 0..60u64 {
        env.step(&vocal(0.8)).unwrap();
        let events = env.take_events();
        if behavior(&env) == Behavior::Respond {
            entered = Some(t);
            assert!(events.contains(&Event::Utterance { tokens: vec![101, 7, 7, 42] }));
            break;
        }
    }
    // 50 ticks of output above threshold, seen one tick after it is produced
    assert_eq!(entered, Some(50));
    for _ in 0..20 {
        env.step(&vocal(0.8)).unwrap();
    }
    assert!(face(&env) < start);
}

#[test]
fn brief_or_quiet_vocalization_is_ignored() {
    let mut env = environment(30.0, true);
    for t in 0..300u64 {
        let level = if t % 40 < 30 { 0.8 } else { 0.0 };
        env.step(&vocal(level)).unwrap();
        assert_eq!(behavior(&env), Behavior::Idle);
    }
    let mut env = environment(30.0, true);
    for _ in 0..300 {
        env.step(&vocal(0.5)).unwrap();
        assert_eq!(behavior(&env), Behavior::Idle);
    }
}

#[test]
fn first_shipped_utterance_is_read_back() {
    let raw: serde_json::Value = serde_json::from_str(CAREGIVER).unwrap();
    let first: Vec<u32> = raw["utterances"][0].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as u32).collect();
    let (tokens, cursor) = emit_utterance(&script(), 0);
    assert_eq!(tokens, first);
    assert_eq!(tokens, [101, 7, 7, 42]);
    assert_eq!(cursor, 1);
}

#[test]
fn feeding_raises_energy_at_the_scripted_rate() {
    let mut env = environment(30.0, true);
    env.world_mut().intero.energy = 0.25;
    let mut fed_ticks = 0u64;
    let mut stopped = false;
    for _ in 0..(60 * 50 * 10) {
        let before = env.world().intero.energy;
        let was_feeding = behavior(&env) == Behavior::Feed;
        env.step(&Action::zero()).unwrap();
        let after = env.world().intero.energy;
        let delta = after - before;
        // caregiver action never lowers energy below plain decay
        assert!(delta >= -DEFAULT_DECAY_RATE * DT - 1e-15, "delta {delta}");
        if was_feeding && behavior(&env) == Behavior::Feed {
            fed_ticks += 1;
            let expected = (0.05 - DEFAULT_DECAY_RATE) * DT;
            assert!((delta - expected).abs() < 1e-12, "delta {delta} vs {expected}");
        }
        if fed_ticks > 0 && behavior(&env) == Behavior::Idle {
            assert!(after >= 0.95 - 1e-12);
            stopped = true;
            break;
        }
    }
    assert!(stopped, "feeding never finished");
    // 0.7 of energy at 0.05/s less decay takes about 14 s
    assert!((fed_ticks as f64 * DT - 0.7 / (0.05 - DEFAULT_DECAY_RATE)).abs() < 1.0, "fed {fed_ticks} ticks");
}

#[test]
fn talk_routine_fires_in_its_window() {
    let mut env = environment(30.0, true);
    let mut talks = Vec::new();
    for _ in 0..(200 * 50) {
        env.step(&Action::zero()).unwrap();
        for e in env.take_events() {
            if let Event::CaregiverBehavior { behavior } = e {
                if behavior == Behavior::Talk.code() {
                    talks.push(env.tick() - 1);
                }
            }
        }
    }
    assert!(talks.len() >= 2, "{talks:?}");
    // offset 20 s plus up to 15 s jitter, then every 90 s
    assert!((1000..=1750).contains(&talks[0]), "{talks:?}");
    assert!((5500..=6250).contains(&talks[1]), "{talks:?}");
}

#[test]
fn newborn_caregiver_never_shows_toys() {
    let mut env = environment(0.0, true);
    for _ in 0..(400 * 50) {
        env.step(&Action::zero()).unwrap();
        assert_ne!(behavior(&env), Behavior::ShowToy);
    }
}

#[test]
fn without_caregiver_there_are_no_caregiver_events() {
    let mut env = environment(30.0, false);
    env.world_mut().intero.energy = 0.1;
    for _ in 0..200 {
        env.step(&vocal(1.0)).unwrap();
        for e in env.take_events() {
            assert!(!matches!(e, Event::CaregiverBehavior { .. } | Event::Utterance { .. }));
        }
    }
    assert!(env.world().caregiver.is_none());
}

fn trace(seed: u64, energy: f64, ticks: u64) -> Vec<(Behavior, Option<Interaction>)> {
    let mut env = environment(120.0, true);
    env.world_mut().intero.energy = energy;
    let mut out = Vec::new();
    for t in 0..ticks {
        let mut a = random_action(seed, t);
        a.muscle.iter_mut().for_each(|m| *m *= 0.3);
        let w = env.world();
        let (_, cmd) = caregiver_policy(w, w.caregiver.as_ref().unwrap(), env.stage(), DT);
        env.step(&a).unwrap();
        out.push((behavior(&env), cmd.interact));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn behavior_follows_the_graph_and_is_deterministic(seed in any::<u64>(), energy in 0.0f64..1.0) {
        let a = trace(seed, energy, 400);
        let b = trace(seed, energy, 400);
        prop_assert_eq!(&a, &b);
        let mut prev = Behavior::Idle;
        for (now, interact) in &a {
            prop_assert!(prev.can_transition(*now), "{:?} -> {:?}", prev, now);
            if let Some(Interaction::Feed(x)) = interact {
                prop_assert!(*x >= 0.0);
            }
            prev = *now;
        }
    }
}
