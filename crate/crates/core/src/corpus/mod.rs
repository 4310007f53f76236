//! Review corpus: record types, Yelp-layout ingest, sentence splitting and
//! artifact persistence.

mod ingest;
mod manifest;
mod persist;
mod sentences;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use ingest::{ingest_reviews, IngestError, IngestFilter, IngestStats, ReviewSet, SourceLayout};
pub use manifest::{append_manifest, file_sha256, read_manifest, ManifestEntry};
pub use persist::{
    load_document, load_records, persist_document, persist_records, Artifact,
    PersistError, SCHEMA_VERSION,
};
pub use sentences::{split_sentences, Sentence, SentenceError, SentenceSplitter};

/// One review from the corpus, with reviewer metadata joined in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub store_id: String,
    pub reviewer_id: String,
    pub date: NaiveDate,
    pub stars: u8,
    pub text: String,
    /// Region code of the store.
    pub state: String,
    pub reviewer_join_year: i32,
    /// Elite years held strictly before the review year.
    pub reviewer_elite_years: u32,
}

impl Review {
    pub fn validate(&self) -> Result<(), String> {
        if !(1..=5).contains(&self.stars) {
            return Err(format!("stars {} outside 1..=5", self.stars));
        }
        if self.text.trim().is_empty() {
            return Err("empty review text".into());
        }
        Ok(())
    }
}

/// Store (business) metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Store {
    pub store_id: String,
    pub name: String,
    pub city: String,
    pub state: String,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
    pub categories: Vec<String>,
}

impl Artifact for Review {
    const KIND: &'static str = "review";
}

impl Artifact for Store {
    const KIND: &'static str = "store";
}
