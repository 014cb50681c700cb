//! End-to-end tests of the `rbn` binary: model parsing, JSON output shapes,
//! exit codes, and the canonical-form round trip.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rbn"))
}

fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary must run")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout must be JSON ({}): {}",
            e,
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn write_temp(content: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(content.as_bytes()).unwrap();
    f
}

#[test]
fn reach_reports_a_replayable_two_step_run() {
    let model = models_dir().join("ex1.rbn");
    let out = run(&[
        "reach",
        "--model",
        model.to_str().unwrap(),
        "--from",
        "three",
        "--to",
        "two_and_q3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["reachable"], true);
    assert_eq!(v["steps"], 2);
    assert_eq!(v["run"][0], serde_json::json!([3, 0, 0]));
    assert_eq!(v["target"], serde_json::json!([2, 0, 1]));
}

#[test]
fn unreachable_target_exits_one() {
    let model = models_dir().join("ex1.rbn");
    let f = write_temp(
        "rbn tiny\nstates q1 q2 q3\nalphabet a b\n\
         trans q1 !a q1\ntrans q1 ?a q2\ntrans q2 !b q1\ntrans q2 ?b q3\n\
         cube two { q1:[2,2] }\ncube q3up { q1:[0,inf] q2:[0,inf] q3:[1,inf] }\n",
    );
    let out = run(&[
        "reach",
        "--model",
        f.path().to_str().unwrap(),
        "--from",
        "two",
        "--to",
        "q3up",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["reachable"], false);
    let _ = model;
}

#[test]
fn parse_error_reports_location() {
    let f = write_temp("rbn broken\nstates q1\nalphabet a\ntrans q1 !c q1\n");
    let out = run(&["symgraph", "--model", f.path().to_str().unwrap(), "--index", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "parse");
    let message = err["error"]["message"].as_str().unwrap();
    assert!(message.contains("line 4"), "{}", message);
    assert!(message.contains("unknown letter 'c'"), "{}", message);
}

#[test]
fn cutoff_json_shape() {
    let model = models_dir().join("ex1.rbn");
    let out = run(&[
        "cutoff",
        "--model",
        model.to_str().unwrap(),
        "--init",
        "q1",
        "--fin",
        "q3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["polarity"], "positive");
    assert!(v["bound"].as_u64().unwrap() >= 3);
    assert!(v["witness"].is_null());
}

#[test]
fn symgraph_dot_has_no_edge_out_of_q3() {
    let model = models_dir().join("ex1.rbn");
    let out = run(&[
        "symgraph",
        "--model",
        model.to_str().unwrap(),
        "--index",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let dot = String::from_utf8(out.stdout).unwrap();
    let q3_node = dot
        .lines()
        .find(|l| l.contains("\"0 | {q3}\""))
        .expect("the {q3} node must be present")
        .trim()
        .split_whitespace()
        .next()
        .unwrap()
        .to_string();
    assert!(
        !dot.lines().any(|l| l.trim().starts_with(&format!("{} ->", q3_node))),
        "no outgoing edges at {{q3}}"
    );
}

#[test]
fn canonical_form_round_trips() {
    for file in ["ex1.rbn", "ex2.protocol", "gate.asms", "pair.ionet"] {
        let model = models_dir().join(file);
        let out = run(&["show", "--model", model.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", file);
        let canonical = String::from_utf8(out.stdout).unwrap();
        let f = write_temp(&canonical);
        let again = run(&["show", "--model", f.path().to_str().unwrap()]);
        assert_eq!(again.status.code(), Some(0), "{}", file);
        assert_eq!(
            canonical,
            String::from_utf8(again.stdout).unwrap(),
            "canonical form of {} must be a fixed point",
            file
        );
    }
}

/// The JSON constraint printed by poststar, read back as cubes, denotes the
/// same set as the library result on every configuration of size <= 4.
#[test]
fn poststar_json_reparses_to_the_same_set() {
    let model = models_dir().join("ex1.rbn");
    let out = run(&["poststar", "--model", model.to_str().unwrap(), "init"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let mut cubes = Vec::new();
    for cube in v["cubes"].as_array().unwrap() {
        let lower: Vec<u64> = cube["lower"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_u64().unwrap())
            .collect();
        let upper: Vec<Option<u64>> = cube["upper"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| if x == "inf" { None } else { Some(x.as_u64().unwrap()) })
            .collect();
        cubes.push(rbn_core::counting::Cube::from_u64(lower, upper));
    }
    let reparsed = rbn_core::counting::CountingConstraint::new(3, cubes);
    let mut r = rbn_core::model::Rbn::new(vec!["q1", "q2", "q3"], vec!["a", "b"]);
    for (s, k, l, t) in [(0, 0, 0, 0), (0, 1, 0, 1), (1, 0, 1, 0), (1, 1, 1, 2)] {
        r.add_transition(rbn_core::model::Transition {
            source: rbn_core::model::StateId(s),
            kind: if k == 0 {
                rbn_core::model::TransitionKind::Broadcast
            } else {
                rbn_core::model::TransitionKind::Receive
            },
            letter: rbn_core::model::Letter(l),
            target: rbn_core::model::StateId(t),
        })
        .unwrap();
    }
    let init = rbn_core::counting::CountingConstraint::from_cube(
        rbn_core::counting::Cube::from_u64(vec![0, 0, 0], vec![None, Some(0), Some(0)]),
    );
    let direct =
        rbn_core::closure::poststar(&r, &init, rbn_core::Budget::default()).unwrap();
    for size in 0..=4u64 {
        for c in rbn_core::model::Configuration::all_of_size(3, size) {
            assert_eq!(
                reparsed.contains(&c).unwrap(),
                direct.contains(&c).unwrap(),
                "{:?}",
                c.counts()
            );
        }
    }
}

#[test]
fn exit_codes_and_output_are_deterministic() {
    let model = models_dir().join("ex2.protocol");
    let args = [
        "simulate",
        "--model",
        model.to_str().unwrap(),
        "--input",
        "4",
        "--seed",
        "11",
        "--steps",
        "40",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), b.status.code());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn member_and_empty_exit_codes() {
    let model = models_dir().join("ex1.rbn");
    let m = model.to_str().unwrap();
    assert_eq!(
        run(&["member", "--model", m, "reachable_covering", "2,0,1"]).status.code(),
        Some(0)
    );
    assert_eq!(
        run(&["member", "--model", m, "reachable_covering", "q1=2"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["empty", "--model", m, "reachable_covering"]).status.code(), Some(1));
    let f = write_temp(
        "rbn dead\nstates p\nalphabet a\ncube none { p:[1,0] }\n",
    );
    assert_eq!(
        run(&["empty", "--model", f.path().to_str().unwrap(), "none"]).status.code(),
        Some(0)
    );
}

#[test]
fn budget_exhaustion_is_a_structured_error() {
    let model = models_dir().join("ex1.rbn");
    let out = bin()
        .args([
            "poststar",
            "--model",
            model.to_str().unwrap(),
            "--budget",
            "1",
            "init",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "budget");
}

#[test]
fn verify_protocol_uses_input_coordinates() {
    let model = models_dir().join("ex2.protocol");
    let m = model.to_str().unwrap();
    let ok = run(&["verify-protocol", "--model", m, "--phi0", "upto_one", "--phi1", "two_or_more"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(stdout_json(&ok)["computes"], true);
    let bad = run(&["verify-protocol", "--model", m, "--phi0", "upto_two", "--phi1", "three_or_more"]);
    assert_eq!(bad.status.code(), Some(1));
    let v = stdout_json(&bad);
    assert_eq!(v["computes"], false);
    assert!(v["counterexample"]["config"].is_array());
}

#[test]
fn asms_reach_and_register_cubes() {
    let model = models_dir().join("gate.asms");
    let m = model.to_str().unwrap();
    let hit = run(&["asms-reach", "--model", m, "--from", "boot_party", "--to", "all_done", "--sizes", "1..4"]);
    assert_eq!(hit.status.code(), Some(0));
    assert_eq!(stdout_json(&hit)["witness"]["register"], "go");
    let miss = run(&["asms-reach", "--model", m, "--from", "idlers_only", "--to", "all_done", "--sizes", "1..4"]);
    assert_eq!(miss.status.code(), Some(1));
}
