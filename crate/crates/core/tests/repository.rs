use std::collections::{BTreeMap, BTreeSet};

use exsel_core::repository::*;
use exsel_core::simcore::*;

fn spread(n: usize, per: usize) -> Vec<Vec<u64>> {
    (0..n)
        .map(|p| (0..per as u64).map(|i| (p as u64 + 1) * 1_000_000 + i).collect())
        .collect()
}

/// Every dedicated register is written at most once, and every ack names a
/// register written earlier with the acked value by the same process.
fn assert_persistent(layout: &RepoLayout, trace: &ExecutionTrace) {
    let mut written: BTreeMap<u64, (Slot, Value)> = BTreeMap::new();
    for e in &trace.events {
        let Some(reg) = e.reg else { continue };
        if e.kind == EventKind::Write {
            if let Some(i) = layout.dedicated_index(RegisterId(reg as usize)) {
                let prev = written.insert(i, (e.slot, e.value().unwrap()));
                assert!(prev.is_none(), "R_{i} written twice, again at event {}", e.seq);
            }
        }
        if let Some(Decision::Ack { register, value }) = e.decision() {
            let i = layout.dedicated_index(*register).unwrap();
            assert_eq!(
                written.get(&i),
                Some(&(e.slot, Value::Int(*value))),
                "ack at event {}",
                e.seq
            );
        }
    }
}

fn assert_exclusive_deposits(report: &RepositoryReport) {
    let regs: BTreeSet<u64> = report.deposits.iter().map(|d| d.index).collect();
    assert_eq!(regs.len(), report.deposits.len(), "two acks on one register");
}

// ---- query ----

#[test]
fn query_follows_the_script() {
    let mut s = RequestScript::new(1, [42]);
    assert_eq!(s.query().unwrap(), Some(42));
    s.ack();
    assert_eq!(s.query().unwrap(), None);
    assert_eq!(s.query().unwrap(), None);
}

#[test]
fn query_before_ack_is_pipelining() {
    let mut s = RequestScript::new(2, [1, 2]);
    s.query().unwrap();
    assert!(matches!(s.query(), Err(RepositoryError::Pipelining(2))));
}

// ---- verify_list ----

fn verify(n: usize, state: LocalNamingState, occupied: &[u64]) -> (LocalNamingState, u64) {
    let layout = RepoLayout::new(n);
    let mut memory = layout.memory();
    for &i in occupied {
        memory.write(layout.dedicated(i), Value::Int(0)).unwrap();
    }
    let mut v = VerifyList::new(layout, state);
    drive(&mut v, &mut memory, Slot(1)).unwrap()
}

#[test]
fn verify_keeps_an_empty_list() {
    let (state, steps) = verify(2, LocalNamingState::new(2), &[]);
    assert_eq!(state.list(), vec![1, 2, 3]);
    assert_eq!(state.pointer(), 4);
    assert_eq!(steps, 3);
}

#[test]
fn verify_replaces_an_occupied_entry() {
    let start = LocalNamingState::from_parts(vec![1, 2, 3], 4);
    let (state, _) = verify(2, start, &[2]);
    assert_eq!(state.list(), vec![1, 3, 4]);
    assert_eq!(state.pointer(), 5);
}

#[test]
fn verify_replaces_a_fully_occupied_list() {
    let (state, steps) = verify(2, LocalNamingState::new(2), &[1, 2, 3]);
    assert_eq!(state.list(), vec![4, 5, 6]);
    assert_eq!(state.pointer(), 7);
    // three checks plus one read per fresh index
    assert_eq!(steps, 6);
}

#[test]
fn verify_skips_occupied_registers_past_the_pointer() {
    let (state, _) = verify(2, LocalNamingState::new(2), &[1, 4, 5]);
    assert_eq!(state.list(), vec![2, 3, 6]);
    assert_eq!(state.pointer(), 7);
}

// ---- choose_by_rank ----

#[test]
fn rank_with_empty_snapshot_is_smallest() {
    assert_eq!(
        choose_by_rank(Slot(1), &[Value::Null, Value::Null], &[1, 2, 3]),
        Some(1)
    );
}

#[test]
fn rank_example_for_two_processes() {
    let view = [Value::Int(1), Value::Int(1)];
    assert_eq!(choose_by_rank(Slot(2), &view, &[1, 2, 3]), Some(3));
    assert_eq!(choose_by_rank(Slot(1), &view, &[1, 2, 3]), Some(2));
}

#[test]
fn rank_worst_case_uses_the_last_entry() {
    for n in 2..=6usize {
        let list: Vec<u64> = (1..=2 * n as u64 - 1).collect();
        // slots 1..n-1 hold distinct entries, slot n duplicates slot n-1
        let mut view: Vec<Value> = (1..n as u64).map(Value::Int).collect();
        view.push(Value::Int(n as u64 - 1));
        assert_eq!(
            choose_by_rank(Slot(n as u32), &view, &list),
            list.last().copied(),
            "n={n}"
        );
    }
}

// ---- selfish ----

#[test]
fn selfish_solo_single_process_uses_r1() {
    let repo = Repository::new(RepoAlgorithm::Selfish, 1).unwrap();
    let (report, trace) = repo.run(&[vec![9]], &mut RoundRobin::default(), repo.limits()).unwrap();
    assert_eq!(report.deposits.len(), 1);
    assert_eq!(report.deposits[0].index, 1);
    // update, scan, read R_1, write R_1
    assert_eq!(trace.steps(Slot(1)), 4);
}

#[test]
fn selfish_two_processes_exhaustive() {
    let repo = Repository::new(RepoAlgorithm::Selfish, 2).unwrap();
    let sim = repo.simulation(&[vec![1], vec![2]]).unwrap();
    let mut both = 0u64;
    let stats = explore(&sim, &ExploreConfig::new(9, 0), |s| {
        let report = repo.report(s, RunEnd::ScheduleExhausted);
        assert_exclusive_deposits(&report);
        assert_persistent(&repo.layout, s.trace());
        both += u64::from(report.deposits.len() == 2);
    })
    .unwrap();
    assert!(stats.traces > 1000);
    assert!(both > 0);
}

#[test]
fn selfish_waste_with_two_crashes() {
    let repo = Repository::new(RepoAlgorithm::Selfish, 3).unwrap();
    let mut scripts = spread(3, 50);
    scripts[0] = (0..10_000).collect();
    for seed in 0..4 {
        let plan = vec![(20 + seed * 7, Slot(2)), (45 + seed * 11, Slot(3))];
        let mut sched = WithCrashes::new(SeededRandom::new(seed), plan);
        let (report, trace) = repo.run(&scripts, &mut sched, repo.limits()).unwrap();
        assert_eq!(report.end, RunEnd::AllHalted);
        assert_eq!(report.deposits.iter().filter(|d| d.slot == 1).count(), 10_000);
        assert_exclusive_deposits(&report);
        assert_persistent(&repo.layout, &trace);
        assert!(report.unused.len() <= 2, "seed {seed}: {:?}", report.unused);
    }
}

// ---- altruistic ----

#[test]
fn altruistic_solo_helps_itself() {
    let repo = Repository::new(RepoAlgorithm::Altruistic, 1).unwrap();
    let (report, trace) = repo
        .run(&[vec![5, 6]], &mut RoundRobin::default(), repo.limits())
        .unwrap();
    assert_eq!(report.end, RunEnd::Quiescent);
    let help = repo.layout.help(Slot(1), Slot(1)).0 as u64;
    let first_name = trace
        .events
        .iter()
        .find(|e| e.kind == EventKind::Write && e.reg == Some(help))
        .and_then(|e| e.value())
        .and_then(|v| v.as_int());
    assert_eq!(first_name, Some(report.deposits[0].index));
    assert_eq!(report.deposits.iter().map(|d| d.value).collect::<Vec<_>>(), vec![5, 6]);
}

#[test]
fn altruistic_survives_a_crashed_peer() {
    let repo = Repository::new(RepoAlgorithm::Altruistic, 2).unwrap();
    let scripts = spread(2, 30);
    for seed in 0..10 {
        let mut sched = WithCrashes::new(SeededRandom::new(seed), vec![(0, Slot(2))]);
        let (report, trace) = repo.run(&scripts, &mut sched, repo.limits()).unwrap();
        assert_eq!(report.end, RunEnd::Quiescent);
        assert_eq!(report.deposits.len(), 30);
        assert_persistent(&repo.layout, &trace);
        assert!(report.waste <= report.waste_bound);
    }
}

#[test]
fn altruistic_full_help_then_crash() {
    let repo = Repository::new(RepoAlgorithm::Altruistic, 3).unwrap();
    let scripts = spread(3, 40);
    for seed in 0..10 {
        let run = repo.run_full_help_then_crash(&scripts, Slot(1), seed).unwrap();
        let r = &run.report;
        assert_eq!(r.end, RunEnd::Quiescent);
        assert_eq!(r.deposits.iter().filter(|d| d.slot == 1).count(), 40, "seed {seed}");
        assert_exclusive_deposits(r);
        assert_persistent(&repo.layout, &run.trace);
        assert!(r.waste <= 6, "seed {seed}: {r:?}");
        assert!(r.unused.len() <= 6, "seed {seed}: {:?}", r.unused);
        // Every remaining deposit finds a parked name within a row of reads.
        assert!(run.survivor_steps <= run.survivor_acks * 10 + 20);
    }
}

/// Crashed processes can leave proposals in `W` that block the survivor's
/// smallest entries forever; a survivor of rank `r` then skips `r - 1` free
/// entries on every round. Slots 1 and 2 crash proposing 2 and 3, slot 3
/// never uses 2, 3, 4 or 5.
#[test]
fn selfish_rank_skipping_behind_crashed_proposals() {
    let repo = Repository::new(RepoAlgorithm::Selfish, 3).unwrap();
    let scripts = vec![vec![1], vec![2], (100..400).collect()];
    let mut sim = repo.simulation(&scripts).unwrap();
    // both propose 1, collide, choose 2 and 3 by rank, publish them, crash
    for s in [1, 2, 1, 2, 1, 2] {
        sim.apply(Directive::Activate(Slot(s))).unwrap();
    }
    sim.apply(Directive::Crash(Slot(1))).unwrap();
    sim.apply(Directive::Crash(Slot(2))).unwrap();
    assert_eq!(
        sim.memory().scan(repo.layout.w).unwrap(),
        vec![Value::Int(2), Value::Int(3), Value::Null]
    );
    let end = sim.run(&mut RoundRobin::default(), repo.limits()).unwrap();
    let report = repo.report(&sim, end);
    assert_eq!(report.deposits.len(), 300);
    assert_eq!(report.unused, vec![2, 3, 4, 5]);
    assert_persistent(&repo.layout, sim.trace());
}

#[test]
fn selfish_random_crashes_waste_at_most_twice_n_minus_one() {
    let repo = Repository::new(RepoAlgorithm::Selfish, 3).unwrap();
    let scripts = spread(3, 200);
    for seed in 0..40 {
        let mut sched = WithCrashes::random(SeededRandom::new(seed), 3, 2, 2_000, seed);
        let (report, trace) = repo.run(&scripts, &mut sched, repo.limits()).unwrap();
        assert_exclusive_deposits(&report);
        assert_persistent(&repo.layout, &trace);
        assert!(report.unused.len() <= 4, "seed {seed}: {:?}", report.unused);
    }
}

#[test]
fn altruistic_random_crashes_stay_within_bound() {
    let repo = Repository::new(RepoAlgorithm::Altruistic, 3).unwrap();
    let scripts = spread(3, 100);
    for seed in 0..20 {
        let mut sched = WithCrashes::random(SeededRandom::new(seed), 3, 2, 2_000, seed);
        let (report, trace) = repo.run(&scripts, &mut sched, repo.limits()).unwrap();
        assert_eq!(report.end, RunEnd::Quiescent);
        assert_exclusive_deposits(&report);
        assert_persistent(&repo.layout, &trace);
        // parked names plus blocked and rank-skipped ones
        assert!(report.waste <= 6 + 4, "seed {seed}: {report:?}");
    }
}

// ---- unbounded naming ----

#[test]
fn naming_solo_commits_in_order() {
    let repo = Repository::new(RepoAlgorithm::Naming, 2).unwrap();
    let scripts = vec![vec![0; 3], vec![]];
    let (report, _) = repo.run(&scripts, &mut RoundRobin::default(), repo.limits()).unwrap();
    assert_eq!(report.commits.iter().map(|c| c.name).collect::<Vec<_>>(), vec![1, 2, 3]);
}

#[test]
fn naming_two_processes_exhaustive() {
    let repo = Repository::new(RepoAlgorithm::Naming, 2).unwrap();
    let sim = repo.simulation(&[vec![0; 2], vec![0; 2]]).unwrap();
    let mut commits = 0u64;
    explore(&sim, &ExploreConfig::new(10, 0), |s| {
        let names: Vec<u64> = s
            .trace()
            .decisions()
            .filter_map(|(_, d)| match d {
                Decision::Commit(x) => Some(*x),
                _ => None,
            })
            .collect();
        let distinct: BTreeSet<_> = names.iter().collect();
        assert_eq!(distinct.len(), names.len(), "{names:?}");
        commits += names.len() as u64;
    })
    .unwrap();
    assert!(commits > 0);
}

fn naming_run(seed: u64, plan: Vec<(u64, Slot)>) -> RepositoryReport {
    let repo = Repository::new(RepoAlgorithm::Naming, 3).unwrap();
    let scripts = vec![vec![0; 167], vec![0; 167], vec![0; 166]];
    let mut sched = WithCrashes::new(SeededRandom::new(seed), plan);
    let (report, _) = repo.run(&scripts, &mut sched, repo.limits()).unwrap();
    let names: BTreeSet<u64> = report.commits.iter().map(|c| c.name).collect();
    assert_eq!(names.len(), report.commits.len());
    report
}

#[test]
fn naming_without_crashes_skips_at_most_n_minus_one() {
    for seed in 0..20 {
        let report = naming_run(seed, vec![]);
        assert_eq!(report.commits.len(), 500);
        assert!(report.unused.len() <= 2, "seed {seed}: {:?}", report.unused);
    }
}

#[test]
fn naming_with_first_slot_surviving_skips_at_most_n_minus_one() {
    for seed in 0..20 {
        let plan = vec![(100 + seed * 31, Slot(2)), (300 + seed * 17, Slot(3))];
        let report = naming_run(seed, plan);
        assert!(report.unused.len() <= 2, "seed {seed}: {:?}", report.unused);
    }
}

#[test]
fn naming_with_any_survivor_skips_at_most_twice_n_minus_one() {
    for seed in 0..20 {
        let plan = WithCrashes::random(SeededRandom::new(seed), 3, 2, 1_500, seed)
            .plan()
            .to_vec();
        let report = naming_run(seed, plan);
        assert!(report.unused.len() <= 4, "seed {seed}: {:?}", report.unused);
    }
}
