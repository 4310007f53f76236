//! Ingest of the Yelp open-dataset layout: line-delimited business, review and
//! user files, joined on business and user ids.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Review, Store};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("source file not found: {0}")]
    MissingFile(PathBuf),
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// File names inside the source directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceLayout {
    pub business_file: String,
    pub review_file: String,
    pub user_file: String,
}

impl Default for SourceLayout {
    fn default() -> Self {
        Self {
            business_file: "yelp_academic_dataset_business.json".into(),
            review_file: "yelp_academic_dataset_review.json".into(),
            user_file: "yelp_academic_dataset_user.json".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestFilter {
    /// Business must list this category (case-insensitive exact match).
    pub category: Option<String>,
    /// Business name must contain this string (case-insensitive).
    pub name_contains: Option<String>,
    /// Inclusive date window.
    pub date_from: Option<NaiveDate>,
    pub date_to: Option<NaiveDate>,
    /// Sample this many reviews without replacement; `None` keeps all.
    pub sample_size: Option<usize>,
    pub seed: u64,
}

impl IngestFilter {
    fn matches_store(&self, b: &BusinessRecord) -> bool {
        if let Some(cat) = &self.category {
            let cats = parse_categories(b.categories.as_deref());
            if !cats.iter().any(|c| c.eq_ignore_ascii_case(cat)) {
                return false;
            }
        }
        if let Some(frag) = &self.name_contains {
            if !b.name.to_lowercase().contains(&frag.to_lowercase()) {
                return false;
            }
        }
        true
    }

    fn in_window(&self, d: NaiveDate) -> bool {
        self.date_from.is_none_or(|f| d >= f) && self.date_to.is_none_or(|t| d <= t)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub malformed_lines: u64,
    /// Reviews whose business id is absent from the business file.
    pub unjoinable_store: u64,
    /// Reviews whose user id is absent from the user file.
    pub unjoinable_reviewer: u64,
    /// Reviews that parsed but violate record invariants.
    pub invalid_records: u64,
    pub outside_window: u64,
    pub matched: u64,
    pub sampled: u64,
}

impl IngestStats {
    /// Records dropped because of data problems (not because of the filter).
    pub fn skipped(&self) -> u64 {
        self.malformed_lines + self.unjoinable_store + self.unjoinable_reviewer + self.invalid_records
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewSet {
    pub reviews: Vec<Review>,
    pub stores: Vec<Store>,
    pub stats: IngestStats,
}

#[derive(Deserialize)]
struct BusinessRecord {
    business_id: String,
    #[serde(default)]
    name: String,
    #[serde(default)]
    city: String,
    #[serde(default)]
    state: String,
    #[serde(default)]
    latitude: Option<f64>,
    #[serde(default)]
    longitude: Option<f64>,
    #[serde(default)]
    categories: Option<String>,
}

#[derive(Deserialize)]
struct ReviewRecord {
    review_id: String,
    user_id: String,
    business_id: String,
    stars: f64,
    text: String,
    date: String,
}

#[derive(Deserialize)]
struct UserRecord {
    user_id: String,
    #[serde(default)]
    yelping_since: String,
    #[serde(default)]
    elite: serde_json::Value,
}

struct Reviewer {
    join_year: i32,
    elite_years: Vec<i32>,
}

fn parse_categories(s: Option<&str>) -> Vec<String> {
    s.unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(String::from)
        .collect()
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    let day = s.trim().get(..10)?;
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

fn parse_elite(v: &serde_json::Value) -> Vec<i32> {
    let mut years: Vec<i32> = match v {
        serde_json::Value::String(s) => s
            .split(',')
            .filter_map(|y| y.trim().parse().ok())
            .collect(),
        serde_json::Value::Array(a) => a
            .iter()
            .filter_map(|y| y.as_i64().map(|y| y as i32).or_else(|| y.as_str()?.trim().parse().ok()))
            .collect(),
        _ => Vec::new(),
    };
    // The public dump encodes 2020 as "20,20".
    years.retain(|y| (1990..=2100).contains(y));
    years.sort_unstable();
    years.dedup();
    years
}

fn for_each_line(
    path: &Path,
    mut f: impl FnMut(&str) -> bool,
    malformed: &mut u64,
) -> Result<(), IngestError> {
    if !path.exists() {
        return Err(IngestError::MissingFile(path.to_path_buf()));
    }
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        if !f(&line) {
            *malformed += 1;
        }
    }
    Ok(())
}

/// Reads the corpus under `source_dir`, keeps reviews of businesses that pass
/// `filter`, joins reviewer metadata and optionally samples without
/// replacement. Output keeps file order and is a pure function of the inputs
/// and the seed.
pub fn ingest_reviews(
    source_dir: &Path,
    layout: &SourceLayout,
    filter: &IngestFilter,
) -> Result<ReviewSet, IngestError> {
    let mut stats = IngestStats::default();

    let mut businesses: HashMap<String, BusinessRecord> = HashMap::new();
    for_each_line(
        &source_dir.join(&layout.business_file),
        |line| match serde_json::from_str::<BusinessRecord>(line) {
            Ok(b) => {
                businesses.insert(b.business_id.clone(), b);
                true
            }
            Err(_) => false,
        },
        &mut stats.malformed_lines,
    )?;

    let mut reviewers: HashMap<String, Reviewer> = HashMap::new();
    for_each_line(
        &source_dir.join(&layout.user_file),
        |line| match serde_json::from_str::<UserRecord>(line) {
            Ok(u) => {
                let join_year = parse_date(&u.yelping_since).map(|d| d.year()).unwrap_or(0);
                reviewers.insert(
                    u.user_id,
                    Reviewer {
                        join_year,
                        elite_years: parse_elite(&u.elite),
                    },
                );
                true
            }
            Err(_) => false,
        },
        &mut stats.malformed_lines,
    )?;

    let mut matched: Vec<Review> = Vec::new();
    let mut unjoinable_store = 0u64;
    let mut unjoinable_reviewer = 0u64;
    let mut invalid = 0u64;
    let mut outside = 0u64;
    for_each_line(
        &source_dir.join(&layout.review_file),
        |line| {
            let r: ReviewRecord = match serde_json::from_str(line) {
                Ok(r) => r,
                Err(_) => return false,
            };
            let Some(b) = businesses.get(&r.business_id) else {
                unjoinable_store += 1;
                return true;
            };
            if !filter.matches_store(b) {
                return true;
            }
            let Some(u) = reviewers.get(&r.user_id) else {
                unjoinable_reviewer += 1;
                return true;
            };
            let Some(date) = parse_date(&r.date) else {
                invalid += 1;
                return true;
            };
            if !filter.in_window(date) {
                outside += 1;
                return true;
            }
            let stars = r.stars.round();
            let review = Review {
                review_id: r.review_id,
                store_id: r.business_id,
                reviewer_id: r.user_id,
                date,
                stars: if (1.0..=5.0).contains(&stars) { stars as u8 } else { 0 },
                text: r.text,
                state: b.state.clone(),
                reviewer_join_year: u.join_year,
                reviewer_elite_years: u.elite_years.iter().filter(|&&y| y < date.year()).count()
                    as u32,
            };
            if review.validate().is_err() {
                invalid += 1;
                return true;
            }
            matched.push(review);
            true
        },
        &mut stats.malformed_lines,
    )?;
    stats.unjoinable_store = unjoinable_store;
    stats.unjoinable_reviewer = unjoinable_reviewer;
    stats.invalid_records = invalid;
    stats.outside_window = outside;
    stats.matched = matched.len() as u64;
    if unjoinable_store + unjoinable_reviewer > 0 {
        log::warn!(
            "skipped {unjoinable_store} reviews with unknown business and {unjoinable_reviewer} with unknown reviewer"
        );
    }

    let reviews = match filter.sample_size {
        Some(k) if k < matched.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(filter.seed);
            let mut idx = rand::seq::index::sample(&mut rng, matched.len(), k).into_vec();
            idx.sort_unstable();
            let mut slots: Vec<Option<Review>> = matched.into_iter().map(Some).collect();
            idx.into_iter()
                .map(|i| slots[i].take().expect("indices are distinct"))
                .collect()
        }
        _ => matched,
    };
    stats.sampled = reviews.len() as u64;

    let used: BTreeMap<&str, ()> = reviews.iter().map(|r| (r.store_id.as_str(), ())).collect();
    let stores = used
        .keys()
        .map(|id| {
            let b = &businesses[*id];
            Store {
                store_id: b.business_id.clone(),
                name: b.name.clone(),
                city: b.city.clone(),
                state: b.state.clone(),
                latitude: b.latitude,
                longitude: b.longitude,
                categories: parse_categories(b.categories.as_deref()),
            }
        })
        .collect();

    Ok(ReviewSet {
        reviews,
        stores,
        stats,
    })
}
