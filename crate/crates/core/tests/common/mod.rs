#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use chrono::NaiveDate;
use voc_core::corpus::{ingest_reviews, IngestFilter, Review, ReviewSet, SourceLayout};
use voc_core::extraction::{AttributeMention, FeatureMention, ReviewExtraction};
use voc_core::llm::mock::ScriptedBackend;
use voc_core::llm::{LlmClient, ResponseCache};
use voc_core::Sentiment5;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Coffee-shop reviews from the Yelp-layout fixture.
pub fn yelp_reviews() -> ReviewSet {
    let filter = IngestFilter { category: Some("Coffee & Tea".into()), ..Default::default() };
    ingest_reviews(&fixture("yelp"), &SourceLayout::default(), &filter).expect("fixture ingests")
}

pub fn review(id: &str, store: &str, text: &str) -> Review {
    Review {
        review_id: id.into(),
        store_id: store.into(),
        reviewer_id: format!("u-{id}"),
        date: NaiveDate::from_ymd_opt(2019, 5, 1).unwrap(),
        stars: 3,
        text: text.into(),
        state: "PA".into(),
        reviewer_join_year: 2012,
        reviewer_elite_years: 0,
    }
}

pub type Spec<'a> = (&'a str, Sentiment5, &'a [(&'a str, Sentiment5)]);

/// Hand-built extraction: attribute `i` covers sentence `i`.
pub fn extraction(id: &str, mentions: &[Spec<'_>]) -> ReviewExtraction {
    let mut attributes = BTreeMap::new();
    for (i, &(name, s, feats)) in mentions.iter().enumerate() {
        let idx = BTreeSet::from([i]);
        attributes.insert(
            name.to_string(),
            AttributeMention {
                sentiment: s,
                sentence_indices: idx.clone(),
                features: feats
                    .iter()
                    .map(|&(f, fs)| (f.to_string(), FeatureMention { sentiment: fs, sentence_indices: idx.clone() }))
                    .collect(),
                other_feature_sentences: BTreeSet::new(),
            },
        );
    }
    ReviewExtraction {
        review_id: id.into(),
        overall: Sentiment5::Neutral,
        n_sentences: mentions.len().max(1),
        other_attribute_sentences: if mentions.is_empty() { BTreeSet::from([0]) } else { BTreeSet::new() },
        attributes,
        reasoning: Default::default(),
    }
}

pub fn client(backend: ScriptedBackend) -> LlmClient {
    LlmClient::new(Arc::new(backend), ResponseCache::in_memory())
}

pub const JOHN: &str = "The caramel latte was absolutely delicious. \
The big table by the window is a perfect workspace for my laptop. \
Free wifi is fast and there are outlets everywhere.";

pub const MELISSA: &str = "Asked for a Puppachino and they gave the rudest response and refused as if I was lying... \
And then forgot to add hazelnut to my latte which tasted GROSS. \
Never going here again. \
TERRIBLE demeaning customer service.";

fn a4(sentence_no: usize, text: &str, attrs: &[&str]) -> String {
    serde_json::json!({ format!("Sentence {sentence_no}"): {
        "sentence": text, "reasoning": "scripted", "attributes": attrs,
    }})
    .to_string()
}

fn a6(sentence_no: usize, feats: &[&str]) -> String {
    serde_json::json!({ format!("Sentence {sentence_no}"): {
        "sentence": "", "reasoning": "scripted", "features": feats,
    }})
    .to_string()
}

fn scores(pairs: &[(&str, &str)]) -> String {
    let obj: serde_json::Map<String, serde_json::Value> = pairs
        .iter()
        .map(|&(k, s)| (k.to_string(), serde_json::json!({"reasoning_sentiment": "scripted", "sentiment": s})))
        .collect();
    serde_json::Value::Object(obj).to_string()
}

const A3: &str = "Task: Review Sentiment Classification";
const A4: &str = "Task: Sentence Attribute Assignment";
const A5: &str = "Task: Sentence Attribute Sentiment";
const A6: &str = "Task: Sentence Feature Assignment";
const A7: &str = "Task: Sentence Feature Sentiment";

fn a6_needles(attribute: &str, sentence_no: usize) -> [String; 3] {
    [A6.to_string(), format!("feature(s) of {attribute} that"), format!("\"Sentence {sentence_no}\"")]
}

/// Scripted answers reproducing the reference coding of John's review.
pub fn john_backend() -> ScriptedBackend {
    ScriptedBackend::new()
        .on_contains(A3, r#"{"reasoning": "praises drink, seating and wifi", "sentiment": "Strongly Positive"}"#)
        .on_all([A4, "caramel latte"], a4(1, "", &["Coffee & Beverage"]))
        .on_all([A4, "workspace"], a4(2, "", &["Store Comfort & Layout"]))
        .on_all([A4, "Free wifi"], a4(3, "", &["Digital Services & Technology"]))
        .on_contains(
            A5,
            scores(&[
                ("Coffee & Beverage", "Strongly Positive"),
                ("Store Comfort & Layout", "Strongly Positive"),
                ("Digital Services & Technology", "Strongly Positive"),
            ]),
        )
        .on_all(a6_needles("Coffee & Beverage", 1), a6(1, &["Coffee & Beverage Taste"]))
        .on_all(a6_needles("Store Comfort & Layout", 2), a6(2, &["Workspace Quality"]))
        .on_all(a6_needles("Digital Services & Technology", 3), a6(3, &["Wifi Connectivity & Power Outlets"]))
        .on_contains(
            A7,
            scores(&[
                ("Coffee & Beverage Taste", "Strongly Positive"),
                ("Workspace Quality", "Strongly Positive"),
                ("Wifi Connectivity & Power Outlets", "Strongly Positive"),
            ]),
        )
}

pub const STAFF: &str = "Management, Staff Friendliness, Expertise & Professionalism";

/// Scripted answers following the reference reading of Melissa's review.
pub fn melissa_backend() -> ScriptedBackend {
    ScriptedBackend::new()
        .on_contains(A3, r#"{"reasoning": "angry", "sentiment": "Strongly Negative"}"#)
        .on_all([A4, "Puppachino"], a4(1, "", &["Customer Service", "Coffee & Beverage"]))
        .on_all([A4, "hazelnut"], a4(2, "", &["Customer Service", "Coffee & Beverage"]))
        .on_all([A4, "Never going"], a4(3, "", &["Other Attributes"]))
        .on_all([A4, "TERRIBLE"], a4(4, "", &["Customer Service"]))
        .on_contains(
            A5,
            scores(&[("Customer Service", "Strongly Negative"), ("Coffee & Beverage", "Negative")]),
        )
        .on_all(a6_needles("Customer Service", 1), a6(1, &[STAFF]))
        .on_all(a6_needles("Customer Service", 2), a6(2, &["Order Accuracy"]))
        .on_all(a6_needles("Customer Service", 4), a6(4, &[STAFF]))
        .on_all(a6_needles("Coffee & Beverage", 1), a6(1, &["Coffee & Beverage Selection"]))
        .on_all(a6_needles("Coffee & Beverage", 2), a6(2, &["Coffee & Beverage Taste"]))
        .on_contains(
            A7,
            scores(&[
                (STAFF, "Strongly Negative"),
                ("Order Accuracy", "Negative"),
                ("Coffee & Beverage Selection", "Negative"),
                ("Coffee & Beverage Taste", "Strongly Negative"),
            ]),
        )
}
