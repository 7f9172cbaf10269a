mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;
use tempfile::TempDir;

use common::workspace_file;

fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stylerag"));
    for (k, _) in std::env::vars() {
        if k.starts_with("STYLERAG_") {
            c.env_remove(k);
        }
    }
    c.env("STYLERAG_LOG", "warn");
    c
}

fn run(c: &mut Command) -> Output {
    c.output().expect("spawn stylerag")
}

fn ok_json(c: &mut Command) -> Value {
    let out = run(c);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_code(out: &Output) -> String {
    assert!(!out.status.success());
    let last = String::from_utf8_lossy(&out.stderr)
        .lines()
        .last()
        .unwrap_or_default()
        .to_string();
    let v: Value = serde_json::from_str(&last).unwrap_or_else(|_| panic!("stderr: {last}"));
    v["error"].as_str().unwrap().to_string()
}

/// Database built once from the small bundled manifest.
fn sample_db() -> &'static Path {
    static DB: OnceLock<TempDir> = OnceLock::new();
    DB.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let out = run(cli()
            .args(["build-db", "--dim", "32", "--out"])
            .arg(dir.path())
            .arg("--manifest")
            .arg(workspace_file("data/sample_manifest.json")));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        dir
    })
    .path()
}

/// Database built once from the full bundled synthetic manifest.
fn synthetic_db() -> &'static Path {
    static DB: OnceLock<TempDir> = OnceLock::new();
    DB.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let out = run(cli()
            .args(["build-db", "--out"])
            .arg(dir.path())
            .arg("--manifest")
            .arg(workspace_file("data/synthetic_manifest.json")));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        dir
    })
    .path()
}

fn index(db: &Path) -> PathBuf {
    db.join("index.asrx")
}

fn query(db: &Path) -> Command {
    let mut c = cli();
    c.arg("query")
        .arg("--index")
        .arg(index(db))
        .arg("--script")
        .arg(workspace_file("data/sample_script.json"));
    c
}

fn csv(out: &Output) -> Vec<(usize, f64)> {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("probes,k,recall,mean_latency_us"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn build_db_writes_every_artifact() {
    let db = sample_db();
    for f in [
        "index.asrx",
        "records.jsonl",
        "clips.jsonl",
        "segments.jsonl",
        "report.json",
    ] {
        assert!(db.join(f).is_file(), "{f} missing");
    }
    let report: Value = serde_json::from_slice(&std::fs::read(db.join("report.json")).unwrap()).unwrap();
    let t = &report["totals"];
    assert!(t["accepted"].as_u64().unwrap() > 0);
    assert_eq!(
        t["drafts"],
        t["accepted"].as_u64().unwrap() + t["rejected"].as_u64().unwrap()
    );
    assert!(t["accepted_duration_s"].as_f64().unwrap() <= t["segment_duration_s"].as_f64().unwrap());
    assert_eq!(report["index"]["mode"], "clustered");
}

#[test]
fn build_db_rejects_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    std::fs::write(&m, r#"{"version":1,"entries":[]}"#).unwrap();
    let out = run(cli()
        .args(["build-db", "--manifest"])
        .arg(&m)
        .arg("--out")
        .arg(dir.path().join("db")));
    assert_eq!(error_code(&out), "EmptyInput");
}

#[test]
fn query_defaults_to_three_prompts() {
    let b = ok_json(query(sample_db()).args(["--position", "1"]));
    let prompts = b["prompts"].as_array().unwrap();
    assert_eq!(prompts.len(), 3);
    assert_eq!(b["concatenation_manifest"].as_array().unwrap().len(), 3);
    let scores: Vec<f64> = prompts.iter().map(|p| p["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    let total: f64 = prompts.iter().map(|p| p["clip"]["duration_s"].as_f64().unwrap()).sum();
    assert!((b["total_duration_s"].as_f64().unwrap() - total).abs() < 1e-9);
}

#[test]
fn query_k_and_modes() {
    let one = ok_json(query(sample_db()).args(["--position", "0", "--k", "1"]));
    assert_eq!(one["prompts"].as_array().unwrap().len(), 1);
    let five = ok_json(query(sample_db()).args(["--position", "0", "--k", "5", "--probes", "exhaustive"]));
    assert_eq!(five["prompts"].as_array().unwrap().len(), 5);
    for mode in ["only-profile", "only_emotion", "profile+emotion"] {
        let b = ok_json(query(sample_db()).args(["--position", "3", "--mode", mode]));
        assert_eq!(b["prompts"].as_array().unwrap().len(), 3);
    }
    let out = run(query(sample_db()).args(["--position", "0", "--mode", "loud"]));
    assert_eq!(error_code(&out), "InvalidArgument");
    let out = run(query(sample_db()).args(["--position", "9"]));
    assert_eq!(error_code(&out), "PositionOutOfRange");
}

#[test]
fn explicit_clip_skips_search() {
    let first = ok_json(query(sample_db()).args(["--position", "0", "--k", "1"]));
    let id = first["prompts"][0]["clip"]["clip_id"].as_str().unwrap().to_string();
    let b = ok_json(query(sample_db()).args(["--position", "2", "--explicit-clip", &id]));
    let prompts = b["prompts"].as_array().unwrap();
    assert_eq!(prompts.len(), 1);
    assert_eq!(prompts[0]["clip"]["clip_id"], id.as_str());
    let out = run(query(sample_db()).args(["--position", "2", "--explicit-clip", "nope"]));
    assert_eq!(error_code(&out), "UnknownClipId");
}

#[test]
fn user_preference_file() {
    let dir = tempfile::tempdir().unwrap();
    let pref = dir.path().join("pref.json");
    std::fs::write(&pref, r#"{"age_band":"senior","gender":"male","free_text":"gravelly"}"#).unwrap();
    let with = ok_json(
        query(sample_db())
            .args(["--position", "1", "--probes", "exhaustive", "--pref-file"])
            .arg(&pref),
    );
    let without = ok_json(
        query(sample_db())
            .args(["--position", "1", "--probes", "exhaustive", "--pref-file"])
            .arg(&pref)
            .args(["--include-user", "false"]),
    );
    assert_eq!(with["prompts"].as_array().unwrap().len(), 3);
    assert_ne!(with["prompts"][0]["score"], without["prompts"][0]["score"]);
}

#[test]
fn synthesize_with_mock_backend() {
    let mut c = cli();
    c.arg("synthesize")
        .arg("--index")
        .arg(index(sample_db()))
        .arg("--script")
        .arg(workspace_file("data/sample_script.json"))
        .args([
            "--position",
            "1",
            "--timbre-uri",
            "file:///voice.wav",
            "--synthesizer",
            "mock",
        ]);
    let v = ok_json(&mut c);
    let d = &v["result"]["descriptor"];
    assert_eq!(d["K_style_clips"], 3);
    assert_eq!(d["timbre_clip_uri"], "file:///voice.wav");
    assert_eq!(d["text"], "The harbor, the boats were late again.");
    assert_eq!(d["style_clip_uris"].as_array().unwrap().len(), 3);
    assert!(v["result"]["audio_uri"].as_str().unwrap().starts_with("mock://synth/"));
}

#[test]
fn config_precedence_three_layers() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("stylerag.conf");
    std::fs::write(&conf, "# retrieval\nk = 5\nprobes = exhaustive\n").unwrap();
    let count = |c: &mut Command| ok_json(c)["prompts"].as_array().unwrap().len();

    assert_eq!(count(query(sample_db()).args(["--position", "0"])), 3);
    assert_eq!(
        count(query(sample_db()).args(["--position", "0", "--config"]).arg(&conf)),
        5
    );
    assert_eq!(
        count(
            query(sample_db())
                .args(["--position", "0"])
                .env("STYLERAG_CONFIG", &conf)
        ),
        5
    );
    assert_eq!(
        count(
            query(sample_db())
                .args(["--position", "0", "--config"])
                .arg(&conf)
                .env("STYLERAG_K", "2")
        ),
        2
    );
    assert_eq!(
        count(
            query(sample_db())
                .args(["--position", "0", "--k", "1", "--config"])
                .arg(&conf)
                .env("STYLERAG_K", "2")
        ),
        1
    );
    std::fs::write(&conf, "k = many\n").unwrap();
    let out = run(query(sample_db()).args(["--position", "0", "--config"]).arg(&conf));
    assert_eq!(error_code(&out), "InvalidArgument");
}

#[test]
fn rebuild_index_from_records() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["records.jsonl", "index.asrx"] {
        std::fs::copy(sample_db().join(f), dir.path().join(f)).unwrap();
    }
    let s = ok_json(
        cli()
            .arg("--db-dir")
            .arg(dir.path())
            .args(["rebuild-index", "--index-mode", "exact"]),
    );
    assert_eq!(s["mode"], "exact");
    let b = ok_json(query(dir.path()).args(["--position", "0"]));
    let reference = ok_json(query(sample_db()).args(["--position", "0", "--probes", "exhaustive"]));
    assert_eq!(b["prompts"], reference["prompts"]);

    let out = run(cli().arg("--db-dir").arg(dir.path()).arg("eval-recall"));
    assert_eq!(error_code(&out), "InvalidArgument");
}

#[test]
fn eval_recall_sweep() {
    let rows = csv(&run(cli().arg("eval-recall").arg("--index").arg(index(synthetic_db()))));
    assert!(rows.len() >= 3);
    assert!(rows.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1), "{rows:?}");
    let last = rows.last().unwrap();
    assert_eq!(last.1, 1.0);

    let report: Value = serde_json::from_slice(&std::fs::read(synthetic_db().join("report.json")).unwrap()).unwrap();
    let c = report["index"]["n_clusters"].as_u64().unwrap() as usize;
    assert_eq!(last.0, c);
    let all = csv(&run(cli()
        .arg("eval-recall")
        .arg("--index")
        .arg(index(synthetic_db()))
        .arg("--probes")
        .arg(format!("{c},{}", c + 5))));
    assert!(all.iter().all(|r| r.1 == 1.0));
}

/// Measured on the bundled 2143-record index (46 clusters) with the default
/// sampled queries: recall@3 = 1.00 at 7 probes.
#[test]
fn eval_recall_golden_at_default_probes() {
    let report: Value = serde_json::from_slice(&std::fs::read(synthetic_db().join("report.json")).unwrap()).unwrap();
    assert!(report["totals"]["accepted"].as_u64().unwrap() >= 2000);
    let c = report["index"]["n_clusters"].as_u64().unwrap() as f64;
    let p = c.sqrt().ceil() as usize;
    let rows = csv(&run(cli()
        .arg("eval-recall")
        .arg("--index")
        .arg(index(synthetic_db()))
        .arg("--probes")
        .arg(p.to_string())));
    assert_eq!(rows.len(), 1);
    assert!((rows[0].1 - 1.00).abs() <= 0.02, "recall {}", rows[0].1);
}

#[test]
fn eval_recall_with_query_file() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.jsonl");
    let dim = 32;
    let lines: Vec<String> = (0..5)
        .map(|i| serde_json::to_string(&(0..dim).map(|j| ((i * 7 + j) % 5) as f64 - 2.0).collect::<Vec<_>>()).unwrap())
        .collect();
    std::fs::write(&q, lines.join("\n")).unwrap();
    let rows = csv(&run(cli()
        .arg("eval-recall")
        .arg("--index")
        .arg(index(sample_db()))
        .arg("--queries")
        .arg(&q)));
    assert_eq!(rows.last().unwrap().1, 1.0);
}

#[test]
fn bundled_manifest_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    ok_json(cli().arg("gen-manifest").arg("--out").arg(&out));
    let a: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let b: Value =
        serde_json::from_slice(&std::fs::read(workspace_file("data/synthetic_manifest.json")).unwrap()).unwrap();
    assert_eq!(a, b);
    let segments: usize = a["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["segments"].as_array().unwrap().len())
        .sum();
    assert!(segments >= 2000);
    let speakers: std::collections::BTreeSet<&str> = a["entries"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|e| e["segments"].as_array().unwrap())
        .map(|s| s["speaker_id"].as_str().unwrap())
        .collect();
    assert_eq!(speakers.len(), 30);
}

#[test]
fn unreachable_embedder_is_reported() {
    let out = run(query(sample_db()).args([
        "--position",
        "0",
        "--embedder-emotion",
        "http://127.0.0.1:9",
        "--timeout-ms",
        "300",
    ]));
    assert_eq!(error_code(&out), "EndpointUnavailable");
}
