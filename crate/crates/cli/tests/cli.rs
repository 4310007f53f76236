mod common;

use std::fs;
use std::path::Path;

use common::{read_data, stderr, synthetic, voc, write_workdir, SPEED};
use voc_core::analytics::FittedModel;
use voc_core::corpus::{load_document, load_records, persist_document, persist_records, read_manifest, Review};
use voc_core::extraction::ReviewExtraction;
use voc_cli::snapshot::{fit_models, Snapshot, SnapshotConfig};
use voc_core::whatif::{simulate_uplift, UpliftConfig};

fn two_reviews(dir: &Path) {
    let mk = |id: &str, text: &str| Review {
        review_id: id.into(),
        store_id: "s1".into(),
        reviewer_id: "u1".into(),
        date: chrono::NaiveDate::from_ymd_opt(2019, 4, 2).unwrap(),
        stars: 4,
        text: text.into(),
        state: "PA".into(),
        reviewer_join_year: 2012,
        reviewer_elite_years: 0,
    };
    let reviews = vec![
        mk("a", "The caramel latte was absolutely delicious. Free wifi is fast."),
        mk("b", "The barista was rude. The line was slow and the wait was long."),
    ];
    persist_records(&reviews, &dir.join("reviews.jsonl")).unwrap();
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = voc(dir.path(), &["extract", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(voc(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(voc(dir.path(), &["simulate"]).status.code(), Some(2));
    assert_eq!(voc(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn extract_replays_from_cache() {
    let warm = tempfile::tempdir().unwrap();
    two_reviews(warm.path());
    let o = voc(warm.path(), &["--backend", "lexicon", "extract", "--taxonomy", "builtin"]);
    assert!(o.status.success(), "{}", stderr(&o));

    // fresh directory, same reviews, cache only
    let cold = tempfile::tempdir().unwrap();
    two_reviews(cold.path());
    fs::copy(warm.path().join("llm_cache.jsonl"), cold.path().join("llm_cache.jsonl")).unwrap();
    let o = voc(cold.path(), &["--backend", "replay", "extract", "--taxonomy", "builtin"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let got: Vec<ReviewExtraction> = load_records(&cold.path().join("extractions.jsonl")).unwrap();
    assert_eq!(got.len(), 2);
    assert_eq!(
        fs::read(warm.path().join("extractions.jsonl")).unwrap(),
        fs::read(cold.path().join("extractions.jsonl")).unwrap()
    );
    let m = read_manifest(&cold.path().join("manifest.jsonl")).unwrap();
    assert_eq!(m[0].counts["extractions"], 2);
    assert_eq!(m[0].counts["cache_hits"], m[0].counts["llm_calls"]);
    assert!(m[0].artifacts.contains_key("extractions.jsonl"));
}

#[test]
fn failures_name_the_step() {
    let dir = tempfile::tempdir().unwrap();
    let o = voc(dir.path(), &["extract", "--taxonomy", "builtin"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("extract/load-reviews"), "{}", stderr(&o));

    two_reviews(dir.path());
    let o = voc(dir.path(), &["extract", "--taxonomy", "builtin"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("extract/llm-backend") && stderr(&o).contains("VOC_API_KEY"), "{}", stderr(&o));

    let o = voc(dir.path(), &["--backend", "replay", "extract", "--taxonomy", "builtin"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("extract/reviews"), "{}", stderr(&o));
    let failures: Vec<voc_core::extraction::ExtractionFailure> =
        load_records(&dir.path().join("failures.jsonl")).unwrap();
    assert_eq!(failures.len(), 2);

    let m = read_manifest(&dir.path().join("manifest.jsonl")).unwrap();
    let steps: Vec<Option<&str>> = m.iter().map(|e| e.failed_step.as_deref()).collect();
    assert_eq!(steps, [Some("extract/load-reviews"), Some("extract/llm-backend"), Some("extract/reviews")]);
    assert!(m.iter().all(|e| e.command == "extract"));
}

#[test]
fn validate_writes_agreement_report() {
    let dir = tempfile::tempdir().unwrap();
    let s = synthetic(40, 3, 2018..=2019);
    let gold = dir.path().join("gold.jsonl");
    let same = dir.path().join("same.jsonl");
    let empty = dir.path().join("blank.jsonl");
    persist_records(&s.extractions, &gold).unwrap();
    persist_records(&s.extractions, &same).unwrap();
    let blanked: Vec<ReviewExtraction> = s
        .extractions
        .iter()
        .map(|e| ReviewExtraction { attributes: Default::default(), ..e.clone() })
        .collect();
    persist_records(&blanked, &empty).unwrap();
    let args = ["validate", "--taxonomy", "builtin", "--gold", gold.to_str().unwrap(), "--run", same.to_str().unwrap()];
    let o = voc(dir.path(), &[&args[..], &["--run", empty.to_str().unwrap(), "--resamples", "50"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let report = read_data(&dir.path().join("agreement.json"));
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let same_row = rows.iter().find(|r| r["variant"] == "same").unwrap();
    assert_eq!(same_row["mention"]["raw_agreement"]["value"], 1.0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("mention alpha"));
}

#[test]
fn analyze_and_simulate_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let s = synthetic(600, 21, 2014..=2019);
    write_workdir(dir.path(), &s);
    let o = voc(dir.path(), &["analyze"]);
    assert!(o.status.success(), "{}", stderr(&o));

    // library path on the same inputs gives the same model bytes
    let cfg = SnapshotConfig::default();
    let [_, feature] = fit_models(&s.extractions, &s.reviews, &s.taxonomy, &cfg);
    let lib_model = dir.path().join("lib_model.json");
    persist_document(&feature.unwrap().model, &lib_model).unwrap();
    assert_eq!(fs::read(&lib_model).unwrap(), fs::read(dir.path().join("model_feature.json")).unwrap());

    let o = voc(dir.path(), &["simulate", "--feature", SPEED]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model: FittedModel<f64> = load_document(&dir.path().join("model_feature.json")).unwrap();
    let direct =
        simulate_uplift(&s.extractions, &s.reviews, &s.taxonomy, &model, SPEED, None, &UpliftConfig::default()).unwrap();
    assert_eq!(read_data(&dir.path().join("impact.json")), serde_json::to_value(&direct).unwrap());
    assert_eq!(String::from_utf8_lossy(&o.stdout), direct.to_tsv());

    let o = voc(dir.path(), &["simulate", "--feature", SPEED, "--store", "s1", "--store", "s3", "--mentions-only"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stores: Vec<String> = read_data(&dir.path().join("impact.json"))["stores"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["store_id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(stores, ["s1", "s3"]);

    let o = voc(dir.path(), &["simulate", "--feature", "Latte Art"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("simulate/run") && stderr(&o).contains("Latte Art"));

    let snap = Snapshot::load(&dir.path().join("snapshot.json")).unwrap();
    assert!(snap.body.feature_model.is_some() && snap.body.attribute_model.is_some());
    assert!(snap.body.perceptual_map.map.is_some(), "{:?}", snap.body.perceptual_map.unavailable);
    assert_eq!(snap.body.built_at, "2023-11-14T22:13:20Z");
}

#[test]
fn consolidate_with_merge_map() {
    let dir = tempfile::tempdir().unwrap();
    let o = voc(dir.path(), &["ingest", "--source", common::yelp_fixture().to_str().unwrap(), "--category", "Coffee & Tea"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = voc(dir.path(), &["--backend", "lexicon", "discover", "--batches", "2", "--batch-size", "15"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let map = serde_json::json!({
        "groups": [
            {"canonical": "Customer Service", "kind": "attribute", "members": []},
            {"canonical": "Coffee & Beverage", "kind": "attribute", "members": []},
            {"canonical": "Staff Friendliness", "kind": "feature", "members": [], "attach_to": ["Customer Service"]},
            {"canonical": "Coffee Taste", "kind": "feature", "members": [], "attach_to": ["Coffee & Beverage"]},
        ],
    });
    let map_path = dir.path().join("merge.json");
    fs::write(&map_path, map.to_string()).unwrap();
    let o = voc(dir.path(), &["consolidate", "--merge-map", map_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = read_data(&dir.path().join("taxonomy.json"));
    let names: Vec<&str> = t["attributes"].as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["Customer Service", "Coffee & Beverage"]);
    assert!(dir.path().join("consolidation_trace.json").exists());

    let bad = serde_json::json!({"groups": [
        {"canonical": "Customer Service", "kind": "attribute"},
        {"canonical": "Wifi", "kind": "feature", "attach_to": ["Nowhere"]},
    ]});
    fs::write(&map_path, bad.to_string()).unwrap();
    let o = voc(dir.path(), &["consolidate", "--merge-map", map_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("consolidate/apply") && stderr(&o).contains("Nowhere"), "{}", stderr(&o));
}

fn full_pipeline(dir: &Path) {
    let src = common::yelp_fixture();
    let steps: Vec<Vec<&str>> = vec![
        vec!["ingest", "--source", src.to_str().unwrap(), "--category", "Coffee & Tea", "--sample", "50", "--seed", "3"],
        vec!["--backend", "lexicon", "discover", "--batches", "2", "--batch-size", "20", "--seed", "5"],
        vec!["consolidate", "--builtin"],
        vec!["--backend", "lexicon", "extract", "--seed", "9"],
        vec!["analyze", "--allow-partial"],
    ];
    for args in steps {
        let o = voc(dir, &args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn pipeline_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    full_pipeline(a.path());
    full_pipeline(b.path());
    let mut names: Vec<String> =
        fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    for must in ["reviews.jsonl", "candidates.json", "taxonomy.json", "extractions.jsonl", "snapshot.json", "manifest.jsonl"] {
        assert!(names.iter().any(|n| n == must), "{must} missing from {names:?}");
    }
    for n in &names {
        assert_eq!(fs::read(a.path().join(n)).unwrap(), fs::read(b.path().join(n)).unwrap(), "{n} differs");
    }
    let m = read_manifest(&a.path().join("manifest.jsonl")).unwrap();
    let cmds: Vec<&str> = m.iter().map(|e| e.command.as_str()).collect();
    assert_eq!(cmds, ["ingest", "discover", "consolidate", "extract", "analyze"]);
    assert_eq!(m[0].counts["sampled"], 50);
}

#[test]
fn serve_reports_busy_port_and_bad_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let s = synthetic(200, 5, 2016..=2019);
    write_workdir(dir.path(), &s);
    assert!(voc(dir.path(), &["analyze", "--allow-partial"]).status.success());

    let held = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = held.local_addr().unwrap().to_string();
    let o = voc(dir.path(), &["serve", "--bind", &addr]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("serve/bind"), "{}", stderr(&o));

    let path = dir.path().join("snapshot.json");
    let text = fs::read_to_string(&path).unwrap().replacen("\"n_reviews\":200", "\"n_reviews\":201", 1);
    fs::write(&path, text).unwrap();
    let o = voc(dir.path(), &["serve", "--bind", "127.0.0.1:0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("serve/load-snapshot") && stderr(&o).contains("integrity"), "{}", stderr(&o));
}
