#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voc_core::corpus::{persist_document, persist_records, Review, Store};
use voc_core::extraction::{AttributeMention, FeatureMention, ReviewExtraction};
use voc_core::taxonomy::Taxonomy;
use voc_core::Sentiment5;

pub const SPEED: &str = "Service Efficiency & Speed/Wait Time";

pub struct Synthetic {
    pub taxonomy: Taxonomy,
    pub stores: Vec<Store>,
    pub reviews: Vec<Review>,
    pub extractions: Vec<ReviewExtraction>,
}

fn store(id: &str, coords: Option<(f64, f64)>) -> Store {
    Store {
        store_id: id.into(),
        name: "Starbucks".into(),
        city: "Philadelphia".into(),
        state: "PA".into(),
        latitude: coords.map(|c| c.0),
        longitude: coords.map(|c| c.1),
        categories: vec!["Coffee & Tea".into()],
    }
}

/// Random mentions over the bundled taxonomy; stars follow the mentioned
/// sentiments plus noise. One sentence per mentioned attribute.
pub fn synthetic(n: usize, seed: u64, years: RangeInclusive<i32>) -> Synthetic {
    let taxonomy = Taxonomy::coffee_shop();
    let stores: Vec<Store> = (0..5)
        .map(|i| store(&format!("s{i}"), (i != 4).then_some((39.9 + i as f64 * 0.01, -75.1 - i as f64 * 0.01))))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reviews = Vec::new();
    let mut extractions = Vec::new();
    for i in 0..n {
        let id = format!("r{i:04}");
        let store_ix = rng.random_range(0..stores.len());
        let mut attributes = BTreeMap::new();
        let mut sentences = Vec::new();
        let mut signal = 0.0;
        for a in taxonomy.attributes() {
            if !rng.random_bool(0.45) {
                continue;
            }
            let idx = BTreeSet::from([sentences.len()]);
            let s = Sentiment5::ALL[rng.random_range(0..5)];
            // store-specific tilt so the perceptual map has structure
            signal += (f64::from(s.score()) - 3.0) * (0.3 + 0.1 * store_ix as f64);
            let mut features = BTreeMap::new();
            for f in &a.features {
                if rng.random_bool(0.35) {
                    let fs = Sentiment5::ALL[rng.random_range(0..5)];
                    signal += (f64::from(fs.score()) - 3.0) * 0.2;
                    features.insert(f.clone(), FeatureMention { sentiment: fs, sentence_indices: idx.clone() });
                }
            }
            sentences.push(format!("The {} was {:?} here.", a.name.to_lowercase(), s));
            attributes.insert(
                a.name.clone(),
                AttributeMention { sentiment: s, sentence_indices: idx, features, other_feature_sentences: BTreeSet::new() },
            );
        }
        let other = if attributes.is_empty() {
            sentences.push("Nothing much to say.".into());
            BTreeSet::from([0])
        } else {
            BTreeSet::new()
        };
        let stars = (3.0 + signal * 0.3 + rng.random_range(-1.0..1.0)).round().clamp(1.0, 5.0) as u8;
        let year = rng.random_range(years.clone());
        reviews.push(Review {
            review_id: id.clone(),
            store_id: stores[store_ix].store_id.clone(),
            reviewer_id: format!("u{i}"),
            date: NaiveDate::from_ymd_opt(year, rng.random_range(1..=12), rng.random_range(1..=28)).unwrap(),
            stars,
            text: sentences.join(" "),
            state: "PA".into(),
            reviewer_join_year: rng.random_range(2008..=2013),
            reviewer_elite_years: rng.random_range(0..4),
        });
        extractions.push(ReviewExtraction {
            review_id: id,
            overall: Sentiment5::Neutral,
            n_sentences: sentences.len(),
            attributes,
            other_attribute_sentences: other,
            reasoning: Default::default(),
        });
    }
    Synthetic { taxonomy, stores, reviews, extractions }
}

/// Lays the corpus out as `voc extract` would have left it.
pub fn write_workdir(dir: &Path, s: &Synthetic) {
    persist_records(&s.reviews, &dir.join("reviews.jsonl")).unwrap();
    persist_records(&s.stores, &dir.join("stores.jsonl")).unwrap();
    persist_records(&s.extractions, &dir.join("extractions.jsonl")).unwrap();
    persist_document(&s.taxonomy, &dir.join("taxonomy.json")).unwrap();
}

pub fn voc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voc"))
        .arg("--workdir")
        .arg(dir)
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("VOC_API_KEY")
        .env_remove("VOC_WORKDIR")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn yelp_fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/yelp")
}

pub fn read_data(path: &Path) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["data"].clone()
}
