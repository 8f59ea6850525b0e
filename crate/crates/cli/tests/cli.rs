use std::path::Path;
use std::process::{Command, Output};

fn mtrank(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtrank"))
        .current_dir(dir)
        .env_remove("MTRANK_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["frobnicate"],
        vec!["eval", "--ranker", "nonsense", "x"],
        vec!["--jobs", "0", "desk", "d"],
        vec!["train", "-o", "m.ckpt"],
    ] {
        assert_eq!(code(&mtrank(dir.path(), &args)), 64, "{args:?}");
    }
    assert_eq!(code(&mtrank(dir.path(), &["--help"])), 0);
}

#[test]
fn usage_errors_show_subcommand_help() {
    let dir = tempfile::tempdir().unwrap();
    let o = mtrank(dir.path(), &["sysrank", "--aggregate", "median", "x"]);
    assert_eq!(code(&o), 64);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Usage: mtrank sysrank"), "{err}");

    let o = mtrank(dir.path(), &["make-pairs", "--mode", "darr", "scores", "out"]);
    assert_eq!(code(&o), 64);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage: mtrank make-pairs"));
}

#[test]
fn results_do_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&mtrank(d, &["--seed", "2", "desk", "--size", "40", "d"])), 0);
    let args = ["train", "d/dev.samples", "--stages", "human", "--max-steps", "100", "-o", "m.ckpt"];
    assert_eq!(code(&mtrank(d, &args)), 0);
    let mut outs = Vec::new();
    for jobs in ["1", "4"] {
        let out = format!("sys{jobs}.json");
        let o = mtrank(d, &["--jobs", jobs, "sysrank", "--ranker", "builtin:m.ckpt", "d/darr.segments", "-o", &out]);
        assert_eq!(code(&o), 0);
        outs.push((o.stdout, std::fs::read(d.join(&out)).unwrap()));
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = mtrank(dir.path(), &["ingest-check", "--kind", "segments", "absent.jsonl"]);
    assert_eq!(code(&o), 2);
    let o = mtrank(dir.path(), &["eval", "--ranker", "builtin:absent.ckpt", "absent.samples"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn invalid_records_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.jsonl");
    std::fs::write(&p, "{\"format_version\":\"mtrank/1\",\"kind\":\"segments\"}\n{\"id\":1}\n").unwrap();
    let o = mtrank(dir.path(), &["ingest-check", "--kind", "segments", "bad.jsonl"]);
    assert_eq!(code(&o), 1);
    let o = mtrank(dir.path(), &["ingest-check", "--lenient", "--kind", "segments", "bad.jsonl"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));

    assert_eq!(code(&mtrank(dir.path(), &["--seed", "1", "desk", "--size", "10", "d"])), 0);
    let o = mtrank(dir.path(), &["ingest-check", "--kind", "samples", "d/ref.segments"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn unreachable_provider_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&mtrank(dir.path(), &["--seed", "1", "desk", "--size", "10", "d"])), 0);
    let o = mtrank(
        dir.path(),
        &["eval", "--ranker", "remote:http://127.0.0.1:9/rank", "--retries", "0", "--timeout-ms", "500", "d/dev.samples"],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn seed_env_matches_flag() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&mtrank(dir.path(), &["--seed", "5", "desk", "--size", "8", "a"])), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_mtrank"))
        .current_dir(dir.path())
        .env("MTRANK_SEED", "5")
        .args(["desk", "--size", "8", "b"])
        .output()
        .unwrap();
    assert!(o.status.success());
    for f in ["darr.segments", "nli.records", "challenge.jsonl"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
}

#[test]
fn outputs_get_manifests() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&mtrank(dir.path(), &["--seed", "3", "desk", "--size", "8", "d"])), 0);
    let o = mtrank(dir.path(), &["make-pairs", "--mode", "ref", "d/ref.segments", "ref.samples"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("ref.samples.manifest.json")).unwrap();
    let m: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(m["command"], "make-pairs");
    assert_eq!(m["seeds"]["seed"], 0);
    assert_eq!(m["inputs"][0]["path"], "d/ref.segments");
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}
