use serde_json::{json, Value as Json};
use std::error::Error;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use exsel_core::expander::{
    build_lossless_expander, quarter, unique_neighbor_matching, verify_expansion, BipartiteGraph, ExpanderParams,
    Verdict, VerifyMode,
};
use exsel_core::harness::{
    check_trace, renaming_violations, run_experiment, run_renaming_seed, CheckContext, ExperimentConfig, Mode,
    ProfileSpec, SchedulerChoice, Seeds, Suite,
};
use exsel_core::renaming::{Algorithm, Profile, RenamingSetup};
use exsel_core::repository::{RepoAlgorithm, Repository};
use exsel_core::simcore::{
    explore, parse_crash_plan, ExecutionTrace, ExploreConfig, RoundRobin, RunLimits, Scheduler, Scripted, SeededRandom,
    WithCrashes,
};
use exsel_core::storecollect::{parse_ops, ScriptOrder, StoreCollect};

use crate::output::Report;
use crate::{
    BenchArgs, CheckArgs, Cli, CollectArgs, Command, ExpanderCommand, ExploreArgs, Global, ModeArgs, RenameArgs,
    RepositoryArgs,
};

type Result<T> = std::result::Result<T, Box<dyn Error>>;

pub fn run(cli: &Cli) -> Result<ExitCode> {
    let g = &cli.global;
    let report = match &cli.command {
        Command::Rename(a) => rename(g, a)?,
        Command::Explore(a) => explore_cmd(g, a)?,
        Command::Expander { command } => expander(g, command)?,
        Command::CollectDemo(a) => collect_demo(g, a)?,
        Command::Repository(a) => repository(g, a)?,
        Command::Bench(a) => bench(g, a)?,
        Command::Check(a) => check(a)?,
    };
    report.emit(g)
}

fn profile(g: &Global) -> Result<Profile> {
    let name = g.profile.as_deref().unwrap_or("scaled");
    Profile::by_name(name).ok_or_else(|| format!("unknown profile `{name}` (expected scaled or paper)").into())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn scheduler_choice(s: &str) -> Result<SchedulerChoice> {
    match s {
        "random" => Ok(SchedulerChoice::Random),
        "round-robin" => Ok(SchedulerChoice::RoundRobin),
        _ => Err(format!("unknown scheduler `{s}` (expected random or round-robin)").into()),
    }
}

fn violation_lines(out: &mut String, violations: &[exsel_core::harness::Violation]) {
    for v in violations {
        let _ = writeln!(out, "  violation: {v}");
    }
}

fn rename(g: &Global, a: &RenameArgs) -> Result<Report> {
    let algo: Algorithm = a.algo.parse()?;
    let setup = RenamingSetup::new(algo, a.k, a.n_names, &profile(g)?)?;
    let (outcome, trace) = match &a.schedule {
        Some(path) => {
            let mut sched = Scripted::parse(&read(path)?)?;
            setup.run(&setup.originals(g.seed), &mut sched, RunLimits::default())?
        }
        None => run_renaming_seed(
            &setup,
            g.seed,
            scheduler_choice(&a.scheduler)?,
            a.crashes.min(a.k - 1),
            a.crash_horizon,
        )?,
    };
    let violations = renaming_violations(&outcome, &trace);
    let mut human = format!(
        "{algo} k={} N={}: max name {} of {}, max steps {}, {} registers\n",
        a.k,
        a.n_names,
        outcome.max_name.map_or("-".into(), |x| x.to_string()),
        outcome.range_bound,
        outcome.max_steps(),
        outcome.registers_used
    );
    for x in &outcome.assignments {
        let name = x.name.map_or("-".into(), |n| n.to_string());
        let state = if x.crashed { " (crashed)" } else { "" };
        let _ = writeln!(human, "  slot {} original {} -> {name}{state}", x.slot.0, x.original);
    }
    violation_lines(&mut human, &violations);
    let doc = json!({ "outcome": outcome, "violations": violations });
    Ok(Report::new("rename", doc, human)
        .file("trace.jsonl", trace.to_jsonl())
        .violations(violations.len()))
}

fn explore_cmd(g: &Global, a: &ExploreArgs) -> Result<Report> {
    if let Ok(algo) = a.algo.parse::<RepoAlgorithm>() {
        return explore_repository(a, algo);
    }
    let algo: Algorithm = a.algo.parse()?;
    let mut cfg = ExperimentConfig::new(algo, vec![a.k], vec![a.n_names]);
    cfg.mode = Mode::Exhaustive {
        step_bound: a.step_bound,
        crash_budget: a.crash_budget,
    };
    cfg.seeds = Seeds {
        start: g.seed,
        count: 1,
    };
    if let Some(p) = &g.profile {
        cfg.profile = ProfileSpec::Named(p.clone());
    }
    let result = run_experiment(&cfg)?;
    let stats = &result.summary.exhaustive[0];
    let mut human = format!(
        "{algo} k={} step bound {} crash budget {}\n{}\n",
        a.k, a.step_bound, a.crash_budget, stats.line
    );
    for v in &result.summary.violations {
        violation_lines(&mut human, &v.violations);
    }
    let doc = json!({ "stats": stats, "row": result.rows[0], "violations": result.summary.violations });
    Ok(Report::new("explore", doc, human).violations(result.violation_count()))
}

fn explore_repository(a: &ExploreArgs, algo: RepoAlgorithm) -> Result<Report> {
    let n = a.k as usize;
    let repo = Repository::new(algo, n)?;
    let scripts: Vec<Vec<u64>> = (0..n as u64)
        .map(|p| (0..a.requests).map(|i| (p + 1) * 1000 + i).collect())
        .collect();
    let sim = repo.simulation(&scripts)?;
    let ctx = CheckContext::for_repository(&repo.layout);
    let (mut violating, mut first) = (0u64, None);
    let stats = explore(&sim, &ExploreConfig::new(a.step_bound, a.crash_budget), |s| {
        let found = check_trace(s.trace(), Suite::All, &ctx);
        if !found.is_empty() {
            violating += 1;
            first.get_or_insert(found);
        }
    })?;
    let line = format!("traces: {}, violating: {violating}", stats.traces);
    let mut human = format!(
        "{} n={n} step bound {} crash budget {}\n{line}\n",
        algo.name(),
        a.step_bound,
        a.crash_budget
    );
    let first = first.unwrap_or_default();
    violation_lines(&mut human, &first);
    let doc = json!({
        "algo": algo,
        "n": n,
        "traces": stats.traces,
        "violating": violating,
        "first_violations": first,
        "line": line,
    });
    Ok(Report::new("explore", doc, human).violations(violating as usize))
}

fn verify_mode(m: ModeArgs, seed: u64) -> VerifyMode {
    match m.sampled {
        Some(trials) => VerifyMode::Sampled { trials, seed },
        None => VerifyMode::exact(),
    }
}

fn load_graph(path: &Path) -> Result<BipartiteGraph> {
    Ok(BipartiteGraph::from_text(&read(path)?)?)
}

fn verdict_line(v: &Verdict) -> String {
    match v {
        Verdict::Pass {
            subsets_checked,
            statistical,
        } => format!(
            "pass: {subsets_checked} subsets{}",
            if *statistical { " (sampled)" } else { "" }
        ),
        Verdict::Fail { witness, neighbors } => format!("fail: subset {witness:?} has {neighbors} neighbors"),
    }
}

fn expander(g: &Global, cmd: &ExpanderCommand) -> Result<Report> {
    match cmd {
        ExpanderCommand::Build {
            v,
            l,
            delta,
            w,
            attempts,
            mode,
        } => {
            let prof = profile(g)?;
            let params = match (delta, w) {
                (Some(d), Some(w)) => ExpanderParams::explicit(*v, *l, *d, *w, quarter())?,
                _ => prof.params(*v, *l)?,
            };
            let graph = build_lossless_expander(
                &params,
                g.seed,
                attempts.unwrap_or(prof.max_attempts),
                verify_mode(*mode, g.seed),
            )?;
            let text = graph.to_text();
            let doc = json!({ "params": params, "seed": g.seed, "graph": text });
            let human = if g.out.is_some() {
                format!(
                    "built |V|={} |W|={} delta={} L={}\n",
                    graph.v_size(),
                    graph.w_size(),
                    graph.delta(),
                    graph.l()
                )
            } else {
                text.clone()
            };
            Ok(Report::new("expander", doc, human).file("graph.txt", text))
        }
        ExpanderCommand::Verify { graph, mode } => {
            let gr = load_graph(graph)?;
            let verdict = verify_expansion(&gr, gr.l(), quarter(), verify_mode(*mode, g.seed))?;
            let human = verdict_line(&verdict) + "\n";
            let failed = !verdict.passed();
            Ok(Report::new("expander", json!({ "verdict": verdict }), human).violations(failed as usize))
        }
        ExpanderCommand::Matching { graph, subset } => {
            let gr = load_graph(graph)?;
            let xs = subset
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| format!("bad subset `{subset}`: {e}"))?;
            if let Some(x) = xs.iter().find(|&&x| x >= gr.v_size()) {
                return Err(format!("input {x} outside 0..{}", gr.v_size()).into());
            }
            let matching = unique_neighbor_matching(&gr, &xs);
            let human = format!(
                "{} of {} inputs matched\n{}",
                matching.len(),
                xs.len(),
                matching
                    .iter()
                    .map(|(v, w)| format!("  {v} -> {w}\n"))
                    .collect::<String>()
            );
            let doc = json!({ "subset": xs, "matching": matching, "matched": matching.len() });
            Ok(Report::new("expander", doc, human))
        }
    }
}

fn collect_demo(g: &Global, a: &CollectArgs) -> Result<Report> {
    let backend: Algorithm = a.backend.parse()?;
    let text = if Path::new(&a.ops).is_file() {
        read(Path::new(&a.ops))?
    } else {
        a.ops.clone()
    };
    let ops = parse_ops(&text)?;
    let sc = StoreCollect::new(backend, a.k, a.n_names, &profile(g)?)?;
    let run = match a.scheduler.as_str() {
        "sequential" => sc.run(&ops, &mut ScriptOrder::new(&ops), RunLimits::default())?,
        "random" => sc.run(&ops, &mut SeededRandom::new(g.seed), RunLimits::default())?,
        other => return Err(format!("unknown scheduler `{other}` (expected sequential or random)").into()),
    };
    let ctx = CheckContext::for_store_collect(&sc, &ops);
    let mut violations = check_trace(&run.trace, Suite::Collect, &ctx);
    violations.extend(check_trace(&run.trace, Suite::Flags, &ctx));
    violations.sort_by_key(|v| v.event);
    let mut human = format!("{} requests on {backend} k={}\n", run.records.len(), a.k);
    for r in &run.records {
        let what = match (&r.value, &r.result) {
            (Some(v), _) => format!("S {} {v}", r.process),
            (None, Some(res)) => format!("C {} -> {res:?}", r.process),
            (None, None) => format!("C {} (incomplete)", r.process),
        };
        let _ = writeln!(human, "  {what}  [{} steps]", r.steps);
    }
    violation_lines(&mut human, &violations);
    let doc = json!({ "records": run.records, "end": run.end, "violations": violations });
    Ok(Report::new("collect-demo", doc, human)
        .file("trace.jsonl", run.trace.to_jsonl())
        .violations(violations.len()))
}

fn deposit_scripts(spec: &str, n: usize) -> Result<Vec<Vec<u64>>> {
    if let Ok(count) = spec.parse::<u64>() {
        return Ok((0..n as u64)
            .map(|p| (0..count).map(|i| (p + 1) * 1_000_000 + i).collect())
            .collect());
    }
    let text = read(Path::new(spec))?;
    let scripts = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|v| v.parse::<u64>().map_err(|e| format!("bad deposit value `{v}`: {e}")))
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if scripts.len() != n {
        return Err(format!("{spec}: {} script lines for {n} processes", scripts.len()).into());
    }
    Ok(scripts)
}

fn repository(g: &Global, a: &RepositoryArgs) -> Result<Report> {
    let algo: RepoAlgorithm = a.algo.parse()?;
    let repo = Repository::new(algo, a.n)?;
    let scripts = deposit_scripts(&a.deposits, a.n)?;
    let plan = match &a.crash_script {
        Some(p) => parse_crash_plan(&read(p)?)?,
        None => Vec::new(),
    };
    if let Some((_, s)) = plan.iter().find(|(_, s)| s.0 as usize > a.n) {
        return Err(format!("crash script names slot {} of {}", s.0, a.n).into());
    }
    let mut sched: Box<dyn Scheduler> = match scheduler_choice(&a.scheduler)? {
        SchedulerChoice::Random => Box::new(WithCrashes::new(SeededRandom::new(g.seed), plan)),
        SchedulerChoice::RoundRobin => Box::new(WithCrashes::new(RoundRobin::default(), plan)),
    };
    let (report, trace) = repo.run(&scripts, &mut sched, repo.limits())?;
    let violations = check_trace(&trace, Suite::All, &CheckContext::for_repository(&repo.layout));
    let mut human = format!(
        "{} n={}: {} deposits, {} commits, frontier {}, waste {} (bound {}), unused {:?}\n",
        algo.name(),
        a.n,
        report.deposits.len(),
        report.commits.len(),
        report.frontier,
        report.waste,
        report.waste_bound,
        report.unused
    );
    for p in &report.processes {
        let _ = writeln!(
            human,
            "  slot {}{}: {} ops, {} steps, max {} per op",
            p.slot,
            if p.crashed { " (crashed)" } else { "" },
            p.operations,
            p.steps,
            p.max_op_steps
        );
    }
    violation_lines(&mut human, &violations);
    let doc = json!({ "report": report, "violations": violations });
    Ok(Report::new("repository", doc, human)
        .file("trace.jsonl", trace.to_jsonl())
        .violations(violations.len()))
}

fn bench(g: &Global, a: &BenchArgs) -> Result<Report> {
    let mut cfg = ExperimentConfig::from_json(&read(&a.config)?)?;
    if let Some(p) = &g.profile {
        cfg.profile = ProfileSpec::Named(p.clone());
    }
    if let Some(dir) = &g.out {
        cfg.output.csv.get_or_insert_with(|| dir.join("rows.csv"));
        cfg.output.traces.get_or_insert_with(|| dir.join("traces"));
    }
    let result = run_experiment(&cfg)?;
    let report = &result.summary.report;
    let mut human = format!(
        "{}: {} rows, {} violations, fitted C = {:.3}\n",
        report.algo,
        result.rows.len(),
        result.violation_count(),
        report.fitted_c
    );
    for p in &report.points {
        let _ = writeln!(
            human,
            "  k={} N={}: max steps {} (declared {:.1}, ratio {:.2}, lower bound {:.2}), max name {} of {}",
            p.k, p.n_names, p.max_steps, p.declared, p.ratio, p.lower_bound, p.max_name, p.range_bound
        );
    }
    for s in &result.summary.exhaustive {
        let _ = writeln!(human, "  k={} N={}: {}", s.k, s.n_names, s.line);
    }
    for v in &result.summary.violations {
        let path = v
            .trace
            .as_ref()
            .map_or(String::new(), |p| format!(" ({})", p.display()));
        let _ = writeln!(human, "  seed {} k={} N={}{path}:", v.seed, v.k, v.n_names);
        violation_lines(&mut human, &v.violations);
    }
    let doc = serde_json::to_value(&result.summary)?;
    Ok(Report::new("summary", doc, human).violations(result.violation_count()))
}

fn check(a: &CheckArgs) -> Result<Report> {
    let suite: Suite = a.suite.parse()?;
    let text = read(&a.trace)?;
    let trace = ExecutionTrace::read_jsonl(text.as_bytes(), None)?;
    let ctx: CheckContext = match &a.context {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        None => CheckContext::default(),
    };
    let violations = check_trace(&trace, suite, &ctx);
    let mut human = format!(
        "{} events, suite {suite}: {} violations\n",
        trace.len(),
        violations.len()
    );
    violation_lines(&mut human, &violations);
    let doc: Json = json!({ "suite": suite, "events": trace.len(), "violations": violations });
    Ok(Report::new("check", doc, human).violations(violations.len()))
}
