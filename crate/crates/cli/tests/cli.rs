use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

fn langexp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_langexp"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn error_line(out: &Output) -> Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let last = stderr.lines().last().expect("stderr is empty");
    serde_json::from_str(last).unwrap()
}

const MATCHES: &str = r#"{"prompt_id":"p1","model_a":"a","model_b":"b","outcome":"a_wins","vote_count":3}
"#;

fn mean_elo(path: &Path) -> f64 {
    let ratings: Vec<Value> = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    ratings
        .iter()
        .map(|r| r["elo"].as_f64().unwrap())
        .sum::<f64>()
        / ratings.len() as f64
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = langexp(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("tok"));
}

#[test]
fn unknown_subcommand_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(langexp(dir.path(), &["frobnicate"]).status.code(), Some(1));
}

#[test]
fn missing_input_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = langexp(
        dir.path(),
        &["sft", "metrics", "-i", "nope.jsonl", "-o", "metrics.json"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = error_line(&out);
    assert_eq!(err["exit_code"], 1);
    assert!(err["message"].as_str().unwrap().contains("nope.jsonl"));
    assert!(!dir.path().join("metrics.json").exists());
}

#[test]
fn malformed_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.jsonl"), "{not json\n").unwrap();
    let out = langexp(dir.path(), &["sft", "metrics", "-i", "bad.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["exit_code"], 2);
}

#[test]
fn stdout_when_no_output_flag() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("sft/sft_20.jsonl");
    let out = langexp(
        dir.path(),
        &["sft", "metrics", "-i", input.to_str().unwrap()],
    );
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["sample_count"], 20);
}

#[test]
fn flag_beats_config_beats_default() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("m.jsonl"), MATCHES).unwrap();
    std::fs::write(
        d.join("cfg.toml"),
        "seed = 3\n[arena.elo]\ninitial = 1500.0\npermutations = 1\n",
    )
    .unwrap();

    assert!(
        langexp(d, &["arena", "elo", "-i", "m.jsonl", "-o", "default.json"])
            .status
            .success()
    );
    assert!(langexp(
        d,
        &[
            "--config-file",
            "cfg.toml",
            "arena",
            "elo",
            "-i",
            "m.jsonl",
            "-o",
            "cfg.json"
        ]
    )
    .status
    .success());
    let args = [
        "--config-file",
        "cfg.toml",
        "arena",
        "elo",
        "-i",
        "m.jsonl",
        "--initial",
        "1200",
        "-o",
        "flag.json",
    ];
    assert!(langexp(d, &args).status.success());

    assert!((mean_elo(&d.join("default.json")) - 1000.0).abs() < 1e-9);
    assert!((mean_elo(&d.join("cfg.json")) - 1500.0).abs() < 1e-9);
    assert!((mean_elo(&d.join("flag.json")) - 1200.0).abs() < 1e-9);
}

#[test]
fn bad_config_value_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("m.jsonl"), MATCHES).unwrap();
    std::fs::write(d.join("cfg.toml"), "[arena.elo]\nk = \"fast\"\n").unwrap();
    let out = langexp(
        d,
        &["--config-file", "cfg.toml", "arena", "elo", "-i", "m.jsonl"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_audit_writes_report_and_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let good = r#"{"seed_id":"s","prompt":[{"role":"user","text":"hi"}],"chosen":"hello","rejected":"bye","provenance":{"candidate_index":0,"temperature":0.7,"top_p":0.9,"policy":"on_policy"}}"#;
    let bad = good.replace(r#""rejected":"bye""#, r#""rejected":"""#);
    std::fs::write(d.join("t.jsonl"), format!("{good}\n{bad}\n")).unwrap();

    let out = langexp(d, &["pref", "audit", "-i", "t.jsonl", "-o", "audit.json"]);
    assert_eq!(out.status.code(), Some(2));
    let report: Value =
        serde_json::from_slice(&std::fs::read(d.join("audit.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["flagged_count"], 1);

    let out = langexp(d, &["pref", "audit", "-i", "t.jsonl", "--tolerance", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn mixture_verify_reports_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sources = fixture("mixture/sources.json");
    let args = [
        "mixture",
        "plan",
        "--sources",
        sources.to_str().unwrap(),
        "--total-tokens",
        "1000",
        "--lang",
        "ar=0.45,en=0.55",
        "-o",
        "plan.json",
    ];
    assert!(langexp(d, &args).status.success());

    std::fs::write(
        d.join("exact.json"),
        r#"{"en":550,"ar-natural":225,"ar-translated":225}"#,
    )
    .unwrap();
    std::fs::write(
        d.join("skewed.json"),
        r#"{"en":700,"ar-natural":150,"ar-translated":150}"#,
    )
    .unwrap();
    let verify = |counts: &str| {
        langexp(
            d,
            &[
                "mixture",
                "verify",
                "--plan",
                "plan.json",
                "--counts",
                counts,
            ],
        )
    };
    assert_eq!(verify("exact.json").status.code(), Some(0));
    let out = verify("skewed.json");
    assert_eq!(out.status.code(), Some(2));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn tokenizer_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = fixture("corpus/en_train.jsonl");
    let args = [
        "tok",
        "train",
        "-i",
        corpus.to_str().unwrap(),
        "--vocab-size",
        "400",
        "-o",
        "tok.json",
    ];
    assert!(langexp(d, &args).status.success());
    let out = langexp(
        d,
        &["tok", "encode", "-m", "tok.json", "--text", "the cat <s>"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!out.stdout.is_empty());
}
