// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn poco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poco")).args(args).output().unwrap()
}

fn target(name: &str) -> String {
    let p: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../targets").join(name);
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(poco(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(poco(&[]).status.code(), Some(1));
    assert_eq!(poco(&["parse"]).status.code(), Some(1));
    assert_eq!(poco(&["--help"]).status.code(), Some(0));
}

#[test]
fn diagnostics_name_file_line_and_column() {
    let d = tempfile::tempdir().unwrap();
    let f = d.path().join("bad.gl");
    fs::write(&f, "fn main(input) {\n  let x = 1\n}\n").unwrap();
    let o = poco(&["parse", s(&f)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(&format!("{}:3:1:", f.display())), "{err}");
    assert_eq!(poco(&["parse", "/nonexistent.gl"]).status.code(), Some(2));
}

#[test]
fn parse_prints_the_guard_table() {
    let o = poco(&["parse", &target("foo.gl")]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["guards"].as_array().unwrap().len(), 5);
    assert_eq!(v["guards"][2]["line"], 5);
}

#[test]
fn instrument_writes_program_guards_and_hierarchy() {
    let d = tempfile::tempdir().unwrap();
    let o = poco(&["instrument", &target("xmlentry.gl"), "-o", s(d.path())]);
    assert!(o.status.success());
    let gl = fs::read_to_string(d.path().join("instrumented.gl")).unwrap();
    assert!(gl.contains("TOG_1 ||"));
    let h: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("hierarchy.json")).unwrap()).unwrap();
    assert_eq!(h["schema_version"], 1);
    assert!(h["root_children"].as_array().is_some());
}

#[test]
fn show_config_reflects_precedence() {
    let d = tempfile::tempdir().unwrap();
    let c = d.path().join("c.toml");
    fs::write(&c, "budget = 123\nenergy = 5\n").unwrap();
    let out = stdout(&poco(&["--show-config", "--config", s(&c), "--energy", "9"]));
    assert!(out.contains("budget = 123"), "{out}");
    assert!(out.contains("energy = 9"), "{out}");
    assert!(out.contains("executions = 200000"), "{out}");
    fs::write(&c, "nonsense = 1\n").unwrap();
    assert_eq!(poco(&["--show-config", "--config", s(&c)]).status.code(), Some(2));
}

#[test]
fn faulting_baseline_is_a_precondition_violation() {
    let d = tempfile::tempdir().unwrap();
    let prog = d.path().join("div.gl");
    fs::write(&prog, "fn main(input) { let a = 10 / input[0]; }\n").unwrap();
    let corpus = d.path().join("c");
    fs::create_dir(&corpus).unwrap();
    fs::write(corpus.join("z"), [0u8]).unwrap();
    let o = poco(&["poco", s(&prog), s(&corpus), "-o", s(&d.path().join("out"))]);
    assert_eq!(o.status.code(), Some(3));
    let empty = d.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = poco(&["poco", s(&prog), s(&empty), "-o", s(&d.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty corpus"));
}

#[test]
fn poco_then_fuzz_through_files() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("p");
    assert!(poco(&["poco", &target("foo.gl"), &target("foo_corpus"), "-o", s(&out)])
        .status
        .success());
    let delta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("delta.json")).unwrap()).unwrap();
    assert_eq!(delta["seeds"][0]["id"], "s2");
    let tog: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("toggles.json")).unwrap()).unwrap();
    assert_eq!(tog["disabled"], serde_json::json!([]));

    let f = d.path().join("f");
    let sel = out.join("selected.json");
    let o = poco(&[
        "fuzz",
        &target("foo.gl"),
        &target("foo_corpus"),
        "--manifest",
        s(&sel),
        "--executions",
        "20000",
        "-o",
        s(&f),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(f.join("report.json")).unwrap()).unwrap();
    let idx = report["crashes"][0]["exec_index"].as_u64().unwrap();
    let crash = fs::read(f.join("crashes").join(format!("hello_{idx}"))).unwrap();
    assert_eq!(&crash[..5], b"hello");
    assert!(!report["crashes"][0].as_object().unwrap().contains_key("wall_us"));
}

#[test]
fn run_accepts_a_single_seed_and_toggles() {
    let d = tempfile::tempdir().unwrap();
    let t = d.path().join("t.json");
    fs::write(&t, r#"{"schema_version":1,"disabled":[0]}"#).unwrap();
    let o = poco(&[
        "run",
        &target("foo.gl"),
        &format!("{}/s2", target("foo_corpus")),
        "--toggles",
        s(&t),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["outcomes"][0]["verdict"], "bug");
    assert_eq!(v["outcomes"][0]["detail"], "hello");
    fs::write(&t, r#"{"schema_version":1,"disabled":[9]}"#).unwrap();
    assert_eq!(
        poco(&["run", &target("foo.gl"), &target("foo_corpus"), "--toggles", s(&t)])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn report_formats_and_wall_clock_requirement() {
    let d = tempfile::tempdir().unwrap();
    let trace = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/foo_trace.jsonl");
    let csv = stdout(&poco(&["report", s(&trace), "--format", "csv"]));
    assert_eq!(csv.lines().count(), 1 + 5 + 1);
    let json: serde_json::Value =
        serde_json::from_str(&stdout(&poco(&["report", s(&trace), "--format", "json"]))).unwrap();
    let sum: f64 = json["composition"]["percentages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .sum();
    assert!((sum - 100.0).abs() < 0.1);
    assert_eq!(poco(&["report", s(&trace), "--clock", "wall"]).status.code(), Some(2));

    let out = d.path().join("w");
    assert!(poco(&[
        "poco",
        &target("foo.gl"),
        &target("foo_corpus"),
        "--clock",
        "wall",
        "-o",
        s(&out)
    ])
    .status
    .success());
    assert!(poco(&["report", s(&out.join("trace.jsonl")), "--clock", "wall"])
        .status
        .success());
}

#[test]
fn eval_requires_distinct_sets() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("p");
    assert!(poco(&["poco", &target("foo.gl"), &target("foo_corpus"), "-o", s(&out)])
        .status
        .success());
    let m = format!("a={}", s(&out.join("selected.json")));
    let o = poco(&[
        "eval",
        &target("foo.gl"),
        &target("foo_corpus"),
        "--set",
        &m,
        "--set",
        &m,
        "--trials",
        "1",
        "--executions",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = poco(&[
        "eval",
        &target("foo.gl"),
        &target("foo_corpus"),
        "--set",
        &m,
        "--trials",
        "2",
        "--executions",
        "100",
    ]);
    assert!(o.status.success());
}
