use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn run(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autocut"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--log-level", "error"])
        .env("AUTOCUT_JUDGE_ENDPOINT", "http://127.0.0.1:9/unreachable")
        .env_remove("AUTOCUT_JUDGE_TOKEN")
        .output()
        .unwrap()
}

fn ok(config: &Path, out: &Path, args: &[&str]) -> String {
    let o = run(config, out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn fixture_config() -> PathBuf {
    fixtures().join("config.toml")
}

/// Fixture config rewritten into `dir` with absolute inputs and `replace` applied.
fn config_in(dir: &Path, replace: &[(&str, &str)]) -> PathBuf {
    let mut text = std::fs::read_to_string(fixture_config()).unwrap();
    let fx = fixtures();
    text = text
        .replace("\"catalog\"", &format!("{:?}", fx.join("catalog")))
        .replace("\"eval_set.json\"", &format!("{:?}", fx.join("eval_set.json")))
        .replace("\"cassette.jsonl\"", &format!("{:?}", fx.join("cassette.jsonl")));
    for (from, to) in replace {
        assert!(text.contains(from), "{from}");
        text = text.replace(from, to);
    }
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

const PIPELINE: &[&[&str]] = &[
    &["ingest"],
    &["filter"],
    &["stats"],
    &["train-quantizer", "--modality", "video"],
    &["train-quantizer", "--modality", "audio"],
    &["encode", "--modality", "video"],
    &["encode", "--modality", "audio"],
    &["index", "build"],
    &["segment"],
    &["build-align"],
    &["build-sft"],
    &["edit", "--photo-id", "7000000"],
];

#[test]
fn config_errors_exit_2() {
    let out = tempfile::tempdir().unwrap();
    let missing = out.path().join("absent.toml");
    assert_eq!(code(&run(&missing, out.path(), &["stats"])), 2);
    let bad = out.path().join("bad.toml");
    std::fs::write(&bad, "seed = \"seven\"").unwrap();
    assert_eq!(code(&run(&bad, out.path(), &["stats"])), 2);
    let o = run(&fixture_config(), out.path(), &["evaluate", "--replay", "/nonexistent/cassette.jsonl"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("\"exit_code\":2"), "{err}");
    // clap usage errors share the code
    assert_eq!(code(&run(&fixture_config(), out.path(), &["train-quantizer", "--modality", "smell"])), 2);
    let o = run(&fixture_config(), out.path(), &["edit", "--strategy", "sideways"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn data_errors_exit_3() {
    let out = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_autocut"))
        .args(["stats", "--config"])
        .arg(fixture_config())
        .args(["--catalog", "/nonexistent/catalog", "--log-level", "error", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
    // encoding before any quantizer exists
    assert_eq!(code(&run(&fixture_config(), out.path(), &["encode", "--modality", "video"])), 3);
}

#[test]
fn live_judge_against_a_dead_endpoint_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cassette = dir.path().join("fresh.jsonl");
    let config = config_in(
        dir.path(),
        &[
            ("replay = true", "replay = false\nattempts = 1\nbackoff_ms = 1\ntimeout_secs = 2"),
            (&format!("{:?}", fixtures().join("cassette.jsonl")), &format!("{cassette:?}")),
        ],
    );
    let o = run(&config, &dir.path().join("out"), &["evaluate"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("out/report.json").exists());
}

#[test]
fn dry_run_writes_nothing_anywhere() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_in(dir.path(), &[]);
    let out = dir.path().join("out");
    for args in PIPELINE {
        ok(&config, &out, args);
    }
    let edl = out.join("edits/7000000.edl.json");
    let before = snapshot(dir.path());
    let vector = dir.path().join("q.txt");
    std::fs::write(&vector, vec!["0.5"; 32].join(" ")).unwrap();
    let before_with_vector = snapshot(dir.path());
    let mut all: Vec<Vec<&str>> = PIPELINE.iter().map(|a| a.to_vec()).collect();
    let edl_s = edl.to_str().unwrap();
    let vector_s = vector.to_str().unwrap();
    all.push(vec!["index", "query", "--vector-file", vector_s]);
    all.push(vec!["render-script", "--edl", edl_s]);
    all.push(vec!["evaluate"]);
    for args in &all {
        let mut a = args.clone();
        a.push("--dry-run");
        let stdout = ok(&config, &out, &a);
        let plan: serde_json::Value = serde_json::from_str(&stdout).unwrap_or_else(|e| panic!("{args:?}: {e}\n{stdout}"));
        assert!(plan.is_object(), "{args:?}");
    }
    assert_eq!(snapshot(dir.path()), before_with_vector);
    assert_eq!(before.len() + 1, before_with_vector.len());
}

#[test]
fn query_render_and_native_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_in(dir.path(), &[]);
    let out = dir.path().join("out");
    for args in PIPELINE {
        ok(&config, &out, args);
    }
    let vector = dir.path().join("q.json");
    std::fs::write(&vector, serde_json::to_string(&vec![0.25f32; 32]).unwrap()).unwrap();
    let text = ok(&config, &out, &["index", "query", "--vector-file", vector.to_str().unwrap(), "--k", "3", "--kind", "frame"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["hits"].as_array().unwrap().len(), 3);
    // wrong dimension is a data error
    std::fs::write(&vector, "[1.0, 2.0]").unwrap();
    assert_eq!(code(&run(&config, &out, &["index", "query", "--vector-file", vector.to_str().unwrap()])), 3);

    let edl = out.join("edits/7000000.edl.json");
    ok(&config, &out, &["render-script", "--edl", edl.to_str().unwrap()]);
    let render = std::fs::read_dir(out.join("render")).unwrap().count();
    assert!(render >= 2, "{render} render files");

    ok(&config, &out, &["evaluate", "--no-judge"]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert!(report["csa"].is_number());
    assert!(report["wcd"].is_number());
    assert!(report["vsc"].is_null() && report["sq"].is_null() && report["mss"].is_null());
    assert!(out.join("logs/evaluate.jsonl").exists());
}
