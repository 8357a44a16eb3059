use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn exsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exsel"))
        .args(args)
        .output()
        .expect("spawn exsel")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

/// Every file under `dir`, sorted by name, with contents.
fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn rename_reports_outcome() {
    let o = exsel(&["rename", "--algo", "ma", "--k", "4", "--seed", "5", "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["outcome"]["range_bound"], 10);
    assert!(v["outcome"]["max_name"].as_u64().unwrap() <= 10);
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn rename_follows_a_schedule_script() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("s.txt");
    fs::write(&script, "# slot 1 runs alone\nA 1\nA 1\nA 1\nA 1\nA 1\nA 1\nX 2\n").unwrap();
    let o = exsel(&[
        "rename",
        "--algo",
        "compete",
        "--k",
        "2",
        "--schedule",
        script.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["outcome"]["assignments"][0]["name"], 1);
    assert_eq!(v["outcome"]["assignments"][1]["crashed"], true);
}

#[test]
fn configuration_errors_exit_two() {
    for args in [
        &["rename", "--algo", "nope", "--k", "2"][..],
        &["rename", "--algo", "basic", "--k", "8", "--N", "4"],
        &["rename", "--algo", "ma", "--k", "2", "--profile", "huge"],
        &["repository", "--algo", "selfish", "--n", "0"],
        &["collect-demo", "--k", "2", "--ops", "S 1"],
        &["check", "--trace", "/nonexistent/trace.jsonl"],
        &["rename"],
    ] {
        let o = exsel(args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn check_flags_a_double_name() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let lines = [
        r#"{"seq":0,"slot":1,"kind":"decide","reg":null,"val":{"decision":{"name":5}},"step":1}"#,
        r#"{"seq":1,"slot":2,"kind":"decide","reg":null,"val":{"decision":{"name":5}},"step":1}"#,
    ];
    fs::write(&trace, lines.join("\n") + "\n").unwrap();
    let t = trace.to_str().unwrap();
    let o = exsel(&["check", "--trace", t, "--suite", "renaming", "--json"]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["violations"][0]["event"], 1);
    assert_eq!(code(&exsel(&["check", "--trace", t, "--suite", "commits"])), 0);
    assert_eq!(code(&exsel(&["check", "--trace", t, "--suite", "bogus"])), 2);
}

#[test]
fn rename_trace_checks_clean() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = exsel(&[
        "rename",
        "--algo",
        "adaptive",
        "--k",
        "5",
        "--crashes",
        "2",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 0);
    let trace = dir.path().join("trace.jsonl");
    let o = exsel(&["check", "--trace", trace.to_str().unwrap(), "--suite", "all"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn expander_build_verify_and_match() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = exsel(&[
        "expander", "build", "--v", "32", "--l", "3", "--delta", "8", "--w", "96", "--seed", "1", "--out", out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let graph = dir.path().join("graph.txt");
    let g = graph.to_str().unwrap();
    let v = json(&exsel(&["expander", "verify", "--graph", g, "--exact", "--json"]));
    assert_eq!(v["verdict"]["pass"]["subsets_checked"], 5488);
    let v = json(&exsel(&[
        "expander", "matching", "--graph", g, "--subset", "3,4,30", "--json",
    ]));
    assert!(v["matched"].as_u64().unwrap() >= 2);
    assert_eq!(
        code(&exsel(&["expander", "matching", "--graph", g, "--subset", "32"])),
        2
    );
}

#[test]
fn collect_demo_returns_completed_stores() {
    let o = exsel(&[
        "collect-demo",
        "--k",
        "3",
        "--ops",
        "S 1 5; S 2 7; C 3; S 1 6; C 2",
        "--json",
    ]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let recs = v["records"].as_array().unwrap();
    assert_eq!(recs[2]["result"], serde_json::json!([[1, 5], [2, 7]]));
    assert_eq!(recs[3]["steps"], 1);
    assert_eq!(recs[4]["result"], serde_json::json!([[1, 6], [2, 7]]));
}

#[test]
fn repository_reports_waste_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let crashes = dir.path().join("crash.txt");
    fs::write(&crashes, "200 2\n").unwrap();
    let o = exsel(&[
        "repository",
        "--algo",
        "selfish",
        "--n",
        "3",
        "--deposits",
        "40",
        "--crash-script",
        crashes.to_str().unwrap(),
        "--seed",
        "4",
        "--json",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let r = &v["report"];
    assert_eq!(r["processes"][1]["crashed"], true);
    assert!(r["deposits"].as_array().unwrap().len() >= 80);
    assert!(r["waste"].as_u64().unwrap() <= 4);
    assert!(r["processes"][0]["histogram"].as_object().is_some());
}

#[test]
fn explore_covers_renaming_and_naming() {
    let v = json(&exsel(&[
        "explore",
        "--algo",
        "compete",
        "--k",
        "2",
        "--step-bound",
        "6",
        "--json",
    ]));
    assert_eq!(v["stats"]["traces"], 382);
    assert_eq!(v["stats"]["max_winners"], 1);
    let o = exsel(&["explore", "--algo", "naming", "--k", "2", "--step-bound", "8", "--json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["violating"], 0);
}

#[test]
fn bench_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"algorithm":"snapshot","k":[1,2,3],"seeds":{"start":0,"count":20}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = exsel(&[
        "bench",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("rows.csv")).unwrap();
    assert_eq!(csv.lines().count(), 61);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"], 60);
    fs::write(&cfg, r#"{"algorithm":"snapshot","k":[0]}"#).unwrap();
    assert_eq!(code(&exsel(&["bench", "--config", cfg.to_str().unwrap()])), 2);
}

/// Runs `args` twice with the same `--out` directory, emptied in between,
/// and compares stdout and every written file byte for byte.
pub fn assert_deterministic(args: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = || {
        let _ = fs::remove_dir_all(&out);
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--json", "--out", out.to_str().unwrap()]);
        let o = exsel(&full);
        (o, files(&out))
    };
    let ((oa, fa), (ob, fb)) = (run(), run());
    assert_eq!(code(&oa), code(&ob), "{args:?}");
    assert!(oa.stdout == ob.stdout, "{args:?}: stdout differs");
    assert!(!fa.is_empty(), "{args:?} wrote nothing");
    assert!(fa == fb, "{args:?}: output files differ");
}

#[test]
fn commands_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"algorithm":"polylog","k":[2,4],"N":[256],"seeds":{"start":3,"count":10}}"#,
    )
    .unwrap();
    let trace = dir.path().join("t.jsonl");
    let o = exsel(&[
        "rename",
        "--algo",
        "basic",
        "--k",
        "3",
        "--N",
        "256",
        "--seed",
        "9",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    fs::rename(dir.path().join("trace.jsonl"), &trace).unwrap();
    let o = exsel(&[
        "expander",
        "build",
        "--v",
        "32",
        "--l",
        "3",
        "--delta",
        "8",
        "--w",
        "96",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let graph = dir.path().join("graph.txt");
    let graph = graph.to_str().unwrap();
    let cfg = cfg.to_str().unwrap();
    let trace = trace.to_str().unwrap();
    for args in [
        &[
            "rename",
            "--algo",
            "efficient",
            "--k",
            "5",
            "--crashes",
            "3",
            "--seed",
            "11",
        ][..],
        &[
            "explore",
            "--algo",
            "compete",
            "--k",
            "2",
            "--step-bound",
            "6",
            "--crash-budget",
            "1",
        ],
        &[
            "expander", "build", "--v", "32", "--l", "3", "--delta", "8", "--w", "96", "--seed", "2",
        ],
        &[
            "expander",
            "verify",
            "--graph",
            graph,
            "--sampled",
            "500",
            "--seed",
            "3",
        ],
        &["expander", "matching", "--graph", graph, "--subset", "1,2,3"],
        &[
            "expander",
            "verify",
            "--graph",
            graph,
            "--sampled",
            "500",
            "--seed",
            "3",
        ],
        &["expander", "matching", "--graph", graph, "--subset", "1,2,3"],
        &[
            "collect-demo",
            "--k",
            "4",
            "--ops",
            "S 1 1; S 2 2; C 3; S 4 4; C 1",
            "--scheduler",
            "random",
            "--seed",
            "6",
        ],
        &[
            "repository",
            "--algo",
            "altruistic",
            "--n",
            "3",
            "--deposits",
            "20",
            "--seed",
            "8",
        ],
        &["bench", "--config", cfg],
        &["check", "--trace", trace, "--suite", "all"],
    ] {
        assert_deterministic(args);
    }
}
