use proptest::prelude::*;
use sedro::report::{csv_path, read_report, write_report};
use sedro_core::eval::{HabituationCriterion, HabituationReport, ReportFlag, Trial, TrialEnd};
use sedro_core::DT;

fn trial(index: usize, stimulus: &str, start_tick: u64, gaze: Vec<bool>) -> Trial {
    let on = gaze.iter().filter(|g| **g).count();
    Trial {
        index,
        stimulus_id: stimulus.into(),
        start_tick,
        looking_time: on as f64 * DT,
        ended_by: if gaze.len() >= 250 { TrialEnd::Cap } else { TrialEnd::LookAway },
        gaze,
    }
}

fn report(hab: Vec<Vec<bool>>, test: Vec<Vec<bool>>) -> HabituationReport {
    let mut tick = 100;
    let mut make = |gazes: Vec<Vec<bool>>, stim: &dyn Fn(usize) -> &'static str| {
        gazes
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                let t = trial(i + 1, stim(i), tick, g);
                tick += t.ticks() as u64 + 100;
                t
            })
            .collect::<Vec<_>>()
    };
    let habituation_trials = make(hab, &|_| "occluded_rod");
    let test_trials = make(test, &|i| if i % 2 == 0 { "broken_rod" } else { "complete_rod" });
    HabituationReport {
        scenario: "rod_and_box".into(),
        seed: 0,
        criterion: HabituationCriterion::default(),
        habituation_trials,
        habituated_at: None,
        test_trials,
        novelty_preference: None,
        flags: vec![ReportFlag::NotHabituated],
    }
}

#[test]
fn unhabituated_report_keeps_an_explicit_null() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let r = report(vec![vec![true, false, true]; 3], vec![vec![false; 4]; 2]);
    write_report(&r, &path).unwrap();
    let raw = std::fs::read_to_string(&path).unwrap();
    assert!(raw.contains("\"habituated_at\": null"), "{raw}");
    assert!(raw.contains("\"not_habituated\""), "{raw}");
    let csv = std::fs::read_to_string(csv_path(&path)).unwrap();
    assert_eq!(csv.lines().next(), Some("phase,trial,stimulus_id,tick,gaze"));
    assert_eq!(csv.lines().count(), 1 + 3 * 3 + 2 * 4);
    assert!(csv.lines().nth(1).unwrap().starts_with("habituation,1,occluded_rod,100,1"));
    assert_eq!(read_report(&path).unwrap(), r);
}

#[test]
fn csv_rows_for_unknown_trials_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    write_report(&report(vec![vec![true]], vec![]), &path).unwrap();
    std::fs::write(csv_path(&path), "phase,trial,stimulus_id,tick,gaze\ntest,4,broken_rod,9,1\n").unwrap();
    let err = read_report(&path).unwrap_err();
    assert!(err.to_string().contains("test #4"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reports_round_trip(
        hab in prop::collection::vec(prop::collection::vec(any::<bool>(), 1..40), 0..6),
        test in prop::collection::vec(prop::collection::vec(any::<bool>(), 1..40), 0..4),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let r = report(hab, test);
        write_report(&r, &path).unwrap();
        let rows = std::fs::read_to_string(csv_path(&path)).unwrap().lines().count() - 1;
        prop_assert_eq!(rows, r.trials().map(Trial::ticks).sum::<usize>());
        prop_assert_eq!(read_report(&path).unwrap(), r);
    }
}
