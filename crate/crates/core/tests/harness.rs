use exsel_core::harness::{
    check_trace, check_trace_by_id, renaming_violations, run_experiment, CheckContext, ExperimentConfig, HarnessError,
    Mode, Seeds, Suite,
};
use exsel_core::renaming::{Algorithm, Profile, RenamingSetup};
use exsel_core::repository::{RepoAlgorithm, Repository};
use exsel_core::simcore::{
    Decision, Event, EventKind, EventValue, ExecutionTrace, RegisterId, SeededRandom, Slot, Value, WithCrashes,
};

fn event(seq: u64, slot: u32, kind: EventKind, reg: Option<u64>, val: EventValue) -> Event {
    Event {
        seq,
        slot: Slot(slot),
        kind,
        reg,
        val,
        step: 1,
    }
}

fn trace(events: Vec<Event>, n: usize) -> ExecutionTrace {
    let mut t = ExecutionTrace::new(n);
    t.events = events;
    t.recount(n);
    t
}

#[test]
fn empty_trace_has_no_violations() {
    let t = ExecutionTrace::new(3);
    for suite in [Suite::Renaming, Suite::Deposits, Suite::Commits] {
        assert!(check_trace(&t, suite, &CheckContext::default()).is_empty());
    }
    let ctx = CheckContext::for_repository(&Repository::new(RepoAlgorithm::Altruistic, 3).unwrap().layout);
    assert!(check_trace(&t, Suite::All, &ctx).is_empty());
}

#[test]
fn duplicate_name_is_flagged_at_second_decide() {
    let t = trace(
        vec![
            event(0, 1, EventKind::Read, Some(0), EventValue::Value(Value::Null)),
            event(1, 1, EventKind::Decide, None, EventValue::Decision(Decision::Name(5))),
            event(2, 2, EventKind::Decide, None, EventValue::Decision(Decision::Name(5))),
        ],
        2,
    );
    let v = check_trace(&t, Suite::Renaming, &CheckContext::default());
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].event, 2);
    assert_eq!(v[0].invariant, "renaming");
}

#[test]
fn duplicate_winner_is_flagged() {
    let win = || {
        EventValue::Decision(Decision::Win {
            register: RegisterId(0),
        })
    };
    let t = trace(
        vec![
            event(0, 1, EventKind::Decide, Some(0), win()),
            event(1, 2, EventKind::Decide, Some(0), win()),
        ],
        2,
    );
    let v = check_trace(&t, Suite::Renaming, &CheckContext::default());
    assert_eq!(v.iter().map(|v| v.event).collect::<Vec<_>>(), vec![1]);
}

#[test]
fn persistence_overwrite_is_flagged_at_the_write() {
    let layout = Repository::new(RepoAlgorithm::Selfish, 2).unwrap().layout;
    let r1 = layout.dedicated(1);
    let ctx = CheckContext::for_repository(&layout);
    let t = trace(
        vec![
            event(
                0,
                1,
                EventKind::Write,
                Some(r1.0 as u64),
                EventValue::Value(Value::Int(7)),
            ),
            event(
                1,
                1,
                EventKind::Decide,
                Some(r1.0 as u64),
                EventValue::Decision(Decision::Ack { register: r1, value: 7 }),
            ),
            event(
                2,
                2,
                EventKind::Write,
                Some(r1.0 as u64),
                EventValue::Value(Value::Int(9)),
            ),
        ],
        2,
    );
    let v = check_trace(&t, Suite::Persistence, &ctx);
    assert!(!v.is_empty());
    assert_eq!(v[0].event, 2);
    assert!(v.iter().all(|v| v.invariant == "persistence"));
}

#[test]
fn suites_without_context_report_it() {
    let v = check_trace(&ExecutionTrace::new(1), Suite::Persistence, &CheckContext::default());
    assert_eq!(v.len(), 1);
    assert!(v[0].message.contains("context lacks"), "{}", v[0]);
}

#[test]
fn unknown_suite_id_is_an_error() {
    let err = check_trace_by_id(&ExecutionTrace::new(1), "no-such-suite", &CheckContext::default()).unwrap_err();
    assert!(matches!(err, HarnessError::UnknownSuite(s) if s == "no-such-suite"));
    assert!(
        check_trace_by_id(&ExecutionTrace::new(1), "commits", &CheckContext::default())
            .unwrap()
            .is_empty()
    );
}

#[test]
fn repository_runs_pass_every_suite() {
    for algo in [RepoAlgorithm::Selfish, RepoAlgorithm::Altruistic, RepoAlgorithm::Naming] {
        let repo = Repository::new(algo, 3).unwrap();
        let scripts: Vec<Vec<u64>> = (0..3).map(|p| (0..20).map(|i| p * 100 + i).collect()).collect();
        for seed in 0..5 {
            let mut sched = WithCrashes::random(SeededRandom::new(seed), 3, 2, 200, seed);
            let (_, t) = repo.run(&scripts, &mut sched, repo.limits()).unwrap();
            let v = check_trace(&t, Suite::All, &CheckContext::for_repository(&repo.layout));
            assert!(v.is_empty(), "{algo:?} seed {seed}: {:?}", v);
        }
    }
}

#[test]
fn renaming_violations_catch_out_of_range_names() {
    let setup = RenamingSetup::new(Algorithm::Ma, 3, 64, &Profile::scaled()).unwrap();
    let originals = setup.originals(1);
    let mut sched = SeededRandom::new(1);
    let (mut outcome, t) = setup.run(&originals, &mut sched, Default::default()).unwrap();
    assert!(renaming_violations(&outcome, &t).is_empty());
    outcome.assignments[0].name = Some(outcome.range_bound + 1);
    let v = renaming_violations(&outcome, &t);
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].invariant, "range");
}

#[test]
fn adaptive_grid_writes_four_hundred_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Algorithm::Adaptive, vec![1, 2, 4, 8], vec![64]);
    cfg.seeds = Seeds { start: 0, count: 100 };
    cfg.output.csv = Some(dir.path().join("out/rows.csv"));
    cfg.output.summary = Some(dir.path().join("out/summary.json"));
    let result = run_experiment(&cfg).unwrap();
    assert_eq!(result.violation_count(), 0);
    let text = std::fs::read_to_string(dir.path().join("out/rows.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "algo,k,N,n,seed,max_steps,max_name,range_bound,registers_used,violations"
    );
    assert_eq!(lines.count(), 400);
    for row in &result.rows {
        assert!(row.max_name <= row.range_bound, "{row:?}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"], 400);
    assert_eq!(summary["report"]["points"].as_array().unwrap().len(), 4);
    assert!(result.summary.report.fitted_c > 0.0);
}

#[test]
fn experiments_are_deterministic() {
    let mut cfg = ExperimentConfig::new(Algorithm::Polylog, vec![2, 4], vec![256, 4096]);
    cfg.seeds = Seeds { start: 7, count: 15 };
    cfg.repetitions = 2;
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.rows.len(), 2 * 2 * 30);
    assert_eq!(a.csv().unwrap(), b.csv().unwrap());
    assert_eq!(a.summary_json().unwrap(), b.summary_json().unwrap());
}

#[test]
fn exhaustive_compete_has_one_winner() {
    let mut cfg = ExperimentConfig::new(Algorithm::Compete, vec![2, 3], vec![64]);
    cfg.mode = Mode::Exhaustive {
        step_bound: 6,
        crash_budget: 1,
    };
    let result = run_experiment(&cfg).unwrap();
    assert_eq!(result.violation_count(), 0);
    for stats in &result.summary.exhaustive {
        assert!(stats.traces > 0);
        assert!(stats.max_winners <= 1, "{stats:?}");
        assert!(stats.line.ends_with("unique in all"), "{}", stats.line);
    }
}

#[test]
fn bad_configs_are_rejected() {
    let bad = [
        r#"{"algorithm":"ma","k":[]}"#,
        r#"{"algorithm":"basic","k":[8],"N":[4]}"#,
        r#"{"algorithm":"ma","k":[2],"profile":"nope"}"#,
        r#"{"algorithm":"ma","k":[2],"seeds":{"start":0,"count":0}}"#,
        r#"{"algorithm":"ma","k":[2],"bogus":1}"#,
        r#"{"algorithm":"ma","k":[9],"mode":{"kind":"exhaustive","step_bound":5,"crash_budget":0}}"#,
    ];
    for text in bad {
        let r = ExperimentConfig::from_json(text).and_then(|c| c.validate());
        assert!(matches!(r, Err(HarnessError::Config(_))), "{text}: {r:?}");
    }
    let ok = ExperimentConfig::from_json(r#"{"algorithm":"ma","k":[2],"profile":{"c_w":2.0}}"#).unwrap();
    ok.validate().unwrap();
}
