use std::collections::{BTreeMap, BTreeSet};

use exsel_core::renaming::{Algorithm, Profile};
use exsel_core::simcore::*;
use exsel_core::storecollect::*;
use proptest::prelude::*;

fn setup(backend: Algorithm, k: u64) -> StoreCollect {
    StoreCollect::new(backend, k, 64.max(k), &Profile::scaled()).unwrap()
}

fn store(p: u32, v: u64) -> ScriptOp {
    ScriptOp {
        process: p,
        request: Request::Store(v),
    }
}

fn collect(p: u32) -> ScriptOp {
    ScriptOp {
        process: p,
        request: Request::Collect,
    }
}

fn control_registers(sc: &StoreCollect) -> BTreeSet<u64> {
    (0..sc.layout.intervals)
        .map(|i| sc.layout.control(i).0 as u64)
        .collect()
}

/// Control flags only ever receive 1.
fn assert_flags_monotone(sc: &StoreCollect, trace: &ExecutionTrace) {
    let controls = control_registers(sc);
    for e in &trace.events {
        if e.kind == EventKind::Write && e.reg.is_some_and(|r| controls.contains(&r)) {
            assert_eq!(
                e.value(),
                Some(Value::Int(1)),
                "control flag rewritten at event {}",
                e.seq
            );
        }
    }
}

/// Visibility and freshness, checked against the per-process store history
/// rebuilt from the records: for each collect, every process with a store
/// decided before the collect's first event appears, with a value no older
/// than its last such store and no newer than a store begun before the
/// collect finished.
fn assert_collects_regular(records: &[OpRecord]) {
    let mut history: BTreeMap<u32, Vec<&OpRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.kind == OpKind::Store) {
        history.entry(r.process).or_default().push(r);
    }
    for c in records.iter().filter(|r| r.kind == OpKind::Collect) {
        let (Some(start), Some(end)) = (c.first_event, c.decided_at) else {
            continue;
        };
        let got: BTreeMap<u64, u64> = c.result.clone().unwrap().into_iter().collect();
        for (&p, stores) in &history {
            let oldest = stores.iter().rposition(|s| s.decided_at.is_some_and(|d| d < start));
            let newest = stores.iter().rposition(|s| s.first_event.is_some_and(|f| f < end));
            match got.get(&(p as u64)) {
                Some(v) => {
                    let idx = stores
                        .iter()
                        .position(|s| s.value == Some(*v))
                        .unwrap_or_else(|| panic!("collect {} returned unknown value {v} for {p}", c.request));
                    assert!(
                        oldest.is_none_or(|o| idx >= o),
                        "collect {} saw a stale value for {p}",
                        c.request
                    );
                    assert!(
                        newest.is_some_and(|n| idx <= n),
                        "collect {} saw a future value for {p}",
                        c.request
                    );
                }
                None => assert!(oldest.is_none(), "collect {} missed completed store by {p}", c.request),
            }
        }
    }
}

#[test]
fn solo_adaptive_store_uses_name_one() {
    let sc = setup(Algorithm::Adaptive, 2);
    let run = sc.run_sequential(&[store(1, 42)]).unwrap();
    let rec = &run.records[0];
    assert_eq!(rec.register, Some(sc.layout.register_of(1).0));
    let flag = sc.layout.control(0).0 as u64;
    let flag_writes: Vec<_> = run
        .trace
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Write && e.reg == Some(flag))
        .collect();
    assert_eq!(flag_writes.len(), 1);
    assert_eq!(flag_writes[0].value(), Some(Value::Int(1)));
}

#[test]
fn second_store_is_one_step() {
    for backend in [Algorithm::Polylog, Algorithm::AlmostAdaptive, Algorithm::Adaptive] {
        let sc = setup(backend, 3);
        let run = sc
            .run_sequential(&[store(1, 1), store(2, 2), store(1, 3), store(2, 4)])
            .unwrap();
        assert_eq!(run.records[2].steps, 1, "{backend}");
        assert_eq!(run.records[3].steps, 1, "{backend}");
        assert_eq!(run.records[0].register, run.records[2].register);
    }
}

#[test]
fn concurrent_first_stores_land_in_distinct_registers() {
    let sc = setup(Algorithm::Adaptive, 3);
    let ops = [store(1, 10), store(2, 20), store(3, 30)];
    for seed in 0..200 {
        let run = sc
            .run(&ops, &mut SeededRandom::new(seed), RunLimits::default())
            .unwrap();
        let regs: BTreeSet<_> = run.records.iter().map(|r| r.register.expect("stored")).collect();
        assert_eq!(regs.len(), 3, "seed {seed}");
        assert_flags_monotone(&sc, &run.trace);
    }
}

#[test]
fn empty_collect_reads_one_flag() {
    let sc = setup(Algorithm::Adaptive, 2);
    let run = sc.run_sequential(&[collect(1)]).unwrap();
    assert_eq!(run.records[0].steps, 1);
    assert_eq!(run.records[0].result, Some(vec![]));
}

#[test]
fn collect_returns_completed_stores() {
    let sc = setup(Algorithm::Adaptive, 3);
    let ops = [store(1, 5), store(2, 6), collect(3)];
    let run = sc.run_sequential(&ops).unwrap();
    // Oracle: the stores whose decision precedes the collect's first event.
    let start = run.records[2].first_event.unwrap();
    let expected: Vec<(u64, u64)> = run
        .trace
        .events
        .iter()
        .filter(|e| e.seq < start)
        .filter_map(|e| match e.decision() {
            Some(Decision::Stored { value, .. }) => Some((e.slot.0 as u64, *value)),
            _ => None,
        })
        .collect();
    assert_eq!(expected, vec![(1, 5), (2, 6)]);
    assert_eq!(run.records[2].result, Some(expected));
}

#[test]
fn collect_reads_follow_layout_arithmetic() {
    let sc = setup(Algorithm::Adaptive, 4);
    let ops = [store(1, 1), store(2, 2), store(3, 3), store(4, 4), collect(1)];
    let run = sc.run_sequential(&ops).unwrap();
    let used = run.records[..4]
        .iter()
        .map(|r| {
            let reg = r.register.unwrap();
            let name = (1..=sc.layout.capacity())
                .find(|&x| sc.layout.register_of(x).0 == reg)
                .unwrap();
            CollectLayout::interval_of(name)
        })
        .max()
        .unwrap()
        + 1;
    let c = &run.records[4];
    assert_eq!(c.steps, sc.layout.collect_reads(used));
    assert!(c.steps <= 2 + 4 + 8 + 3);
    assert_eq!(c.result.as_ref().unwrap().len(), 4);
}

#[test]
fn store_to_collect_handoff_across_backends() {
    for backend in [Algorithm::Polylog, Algorithm::AlmostAdaptive, Algorithm::Adaptive] {
        let sc = setup(backend, 2);
        let ops = [store(1, 7), collect(2), store(1, 8), collect(2)];
        let run = sc.run_sequential(&ops).unwrap();
        assert_eq!(run.records[1].result, Some(vec![(1, 7)]), "{backend}");
        assert_eq!(run.records[3].result, Some(vec![(1, 8)]), "{backend}");
        assert_collects_regular(&run.records);
    }
}

#[test]
fn rejects_foreign_backends_and_processes() {
    assert!(StoreCollect::new(Algorithm::Ma, 3, 8, &Profile::scaled()).is_err());
    let sc = setup(Algorithm::Adaptive, 2);
    assert!(sc.simulation(&[store(3, 1)]).is_err());
}

fn script(k: u32, len: usize) -> impl Strategy<Value = Vec<ScriptOp>> {
    prop::collection::vec((1..=k, any::<bool>()), 1..=len).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (p, is_store))| if is_store { store(p, i as u64 + 1) } else { collect(p) })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn concurrent_collects_are_regular(ops in script(4, 30), seed in any::<u64>()) {
        let sc = setup(Algorithm::Adaptive, 4);
        let run = sc.run(&ops, &mut SeededRandom::new(seed), RunLimits::default()).unwrap();
        prop_assert_eq!(run.end, RunEnd::AllHalted);
        assert_collects_regular(&run.records);
        assert_flags_monotone(&sc, &run.trace);
    }

    #[test]
    fn sequential_collects_see_latest_values(ops in script(5, 50)) {
        let sc = setup(Algorithm::Polylog, 5);
        let run = sc.run_sequential(&ops).unwrap();
        let mut latest: BTreeMap<u64, u64> = BTreeMap::new();
        for (op, rec) in ops.iter().zip(&run.records) {
            match op.request {
                Request::Store(v) => {
                    latest.insert(op.process as u64, v);
                }
                Request::Collect => {
                    let expected: Vec<_> = latest.iter().map(|(&p, &v)| (p, v)).collect();
                    prop_assert_eq!(rec.result.clone(), Some(expected));
                }
            }
        }
    }
}
