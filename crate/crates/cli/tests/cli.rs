use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dcmd_core::bundled;
use tempfile::TempDir;

fn dcmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcmd")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Runs the bundled mission once into a fresh directory.
fn mission() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = dcmd(&["run", "--scenario", "mission_fig6", "--seed", "42", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    (dir, out)
}

#[test]
fn run_reports_two_verified_hazards() {
    let (_dir, out) = mission();
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("hazards verified: 2/2"), "{summary}");
    assert!(summary.contains("known objects confirmed: 5/5"));
}

#[test]
fn run_without_seed_is_a_usage_error() {
    let o = dcmd(&["run", "--scenario", "mission_fig6"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seed"));
}

#[test]
fn corrupt_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"x\"\n[clock\n").unwrap();
    let o = dcmd(&["run", "--scenario", p(&path), "--seed", "1", "--out", p(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("does not parse"), "{}", stderr(&o));
}

#[test]
fn unconfirmed_known_object_fails_the_mission() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("unseen.toml");
    let extra = "\n[[a_priori]]\nidentity = \"cargo_truck9\"\nlabel = \"truck\"\n\
                 position = [3.0, 0.3, 0.1]\nheight = 0.13\nwidth = 0.33\narea = \"airfield\"\n";
    std::fs::write(&path, bundled::scenario_source("mission_fig6").unwrap().to_string() + extra).unwrap();
    let o = dcmd(&["run", "--scenario", p(&path), "--seed", "42", "--out", p(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).contains("cargo_truck9 in airfield: not confirmed"));
    assert!(dir.path().join("o/summary.json").exists());
}

#[test]
fn query_hazards_on_explorer_snapshot() {
    let (_dir, out) = mission();
    let o = dcmd(&[
        "query",
        "--snapshot",
        p(&out.join("dcmdobot3.dkb")),
        "--query",
        "match $o isa processed_image_object, has is_hazard true, has identity_name $n; fetch $n;",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("$n\n"));
    assert!(text.contains("\"armoured_humvee1\""), "{text}");
    assert!(text.contains("\"watchtower1\""), "{text}");
}

#[test]
fn query_matching_nothing_prints_header_only() {
    let (_dir, out) = mission();
    let o = dcmd(&[
        "query",
        "--snapshot",
        p(&out.join("dcmdobot1.dkb")),
        "--query",
        "match $o isa processed_image_object, has status \"no such status\"; fetch $o;",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "$o\n");
    assert!(stderr(&o).contains("0 row(s)"));
}

#[test]
fn malformed_query_shows_caret() {
    let (_dir, out) = mission();
    let o = dcmd(&["query", "--snapshot", p(&out.join("dcmdobot1.dkb")), "--query", "match $x isa; fetch $x;"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    let lines: Vec<&str> = err.lines().collect();
    assert!(lines[0].contains("syntax error at 1:13"), "{err}");
    assert_eq!(lines[1], "  match $x isa; fetch $x;");
    assert_eq!(lines[2], format!("  {}^", " ".repeat(12)));
}

#[test]
fn insert_is_saved_only_on_request() {
    let (_dir, out) = mission();
    let snap = out.join("dcmdobot2.dkb");
    let before = std::fs::read(&snap).unwrap();
    let insert = "insert $d isa general_class_document, has class_name \"kayak\";";
    assert_eq!(dcmd(&["query", "--snapshot", p(&snap), "--query", insert]).status.code(), Some(0));
    assert_eq!(std::fs::read(&snap).unwrap(), before);
    assert_eq!(dcmd(&["query", "--snapshot", p(&snap), "--query", insert, "--save"]).status.code(), Some(0));
    let o = dcmd(&[
        "query",
        "--snapshot",
        p(&snap),
        "--query",
        "match $d isa general_class_document, has class_name \"kayak\"; fetch $d;",
    ]);
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn validate_bundled_artifacts() {
    let o = dcmd(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("ok       scenario mission_fig6"));
}

#[test]
fn validate_reports_relation_without_roles() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.schema");
    std::fs::write(&path, "entity thing sub entity layer(upper);\nrelation link sub relation layer(upper);\n").unwrap();
    let o = dcmd(&["validate", "--schema", p(&path)]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(text.contains("invalid  schema"), "{text}");
    assert!(text.contains("link"), "{text}");
}

#[test]
fn validate_missing_file_exits_2() {
    let o = dcmd(&["validate", "--cpt", "/definitely/not/here.bn"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn replay_prints_timeline() {
    let (_dir, out) = mission();
    let o = dcmd(&["replay", "--log", p(&out.join("mission.log.jsonl"))]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("[14:49:00.00]\n"));
    assert!(text.contains("armoured_humvee1: verified_by_dcmdobot1"), "{text}");
    assert!(text.trim_end().ends_with("mission complete"));
}

#[test]
fn replay_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    std::fs::write(&path, "{not json}\n").unwrap();
    assert_eq!(dcmd(&["replay", "--log", p(&path)]).status.code(), Some(2));
}

#[test]
fn export_dumps_every_thing() {
    let (_dir, out) = mission();
    let o = dcmd(&["export", "--snapshot", p(&out.join("dcmdobot4.dkb"))]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let count: usize = text.lines().next().unwrap().strip_prefix("things: ").unwrap().parse().unwrap();
    let headers = text.lines().filter(|l| l.starts_with('#')).count();
    assert_eq!(count, headers);
    assert!(text.contains("  identity_name = \"watchtower1\""));
    assert!(text.contains("  whole -> #"));
}

#[test]
fn snapshot_with_wrong_schema_is_rejected() {
    let (dir, out) = mission();
    let schema = dir.path().join("other.schema");
    std::fs::write(&schema, "entity thing sub entity layer(upper);\n").unwrap();
    let o = dcmd(&["export", "--snapshot", p(&out.join("dcmdobot4.dkb")), "--schema", p(&schema)]);
    assert_eq!(o.status.code(), Some(2));
}
