mod common;

use chrono::{Datelike, NaiveDate};
use voc_core::corpus::{ingest_reviews, IngestError, IngestFilter, SourceLayout};

fn ingest(filter: IngestFilter) -> voc_core::corpus::ReviewSet {
    ingest_reviews(&common::fixture("yelp"), &SourceLayout::default(), &filter).unwrap()
}

#[test]
fn category_filter_and_skip_counts() {
    let set = common::yelp_reviews();
    let s = &set.stats;
    // one bad business line, one bad review line
    assert_eq!(s.malformed_lines, 2);
    assert_eq!(s.unjoinable_store, 1);
    assert_eq!(s.unjoinable_reviewer, 0);
    assert_eq!(s.invalid_records, 1);
    assert_eq!(s.matched, 60);
    assert_eq!(s.sampled, 60);
    assert_eq!(s.skipped(), 4);
    let ids: Vec<&str> = set.stores.iter().map(|s| s.store_id.as_str()).collect();
    assert_eq!(ids, ["indie-1", "st-north", "st-plaza", "st-river"]);
    assert!(set.reviews.iter().all(|r| r.store_id != "bakery-1"));
    assert!(set.reviews.iter().all(|r| r.validate().is_ok()));
}

#[test]
fn no_filter_keeps_bakery() {
    let set = ingest(IngestFilter::default());
    assert_eq!(set.stats.matched, 64);
    let bakery = set.stores.iter().find(|s| s.store_id == "bakery-1").unwrap();
    assert_eq!(bakery.latitude, None);
}

#[test]
fn name_and_window() {
    let set = ingest(IngestFilter {
        category: Some("coffee & tea".into()),
        name_contains: Some("STARBUCKS".into()),
        date_from: NaiveDate::from_ymd_opt(2016, 1, 1),
        date_to: NaiveDate::from_ymd_opt(2017, 12, 31),
        ..Default::default()
    });
    assert!(!set.reviews.is_empty());
    for r in &set.reviews {
        assert!(r.store_id.starts_with("st-"));
        assert!(r.date >= NaiveDate::from_ymd_opt(2016, 1, 1).unwrap());
        assert!(r.date <= NaiveDate::from_ymd_opt(2017, 12, 31).unwrap());
    }
    // 45 valid Starbucks reviews plus the zero-star one, which the window drops first
    assert_eq!(set.stats.matched + set.stats.outside_window, 46);
}

#[test]
fn sampling_is_seeded() {
    let f = |seed| IngestFilter { category: Some("Coffee & Tea".into()), sample_size: Some(20), seed, ..Default::default() };
    let a = ingest(f(1));
    let b = ingest(f(1));
    let c = ingest(f(2));
    assert_eq!(a.reviews, b.reviews);
    assert_eq!(a.reviews.len(), 20);
    assert_ne!(a.reviews, c.reviews);
    assert_eq!(a.stats.sampled, 20);
}

#[test]
fn elite_years_count_only_earlier_years() {
    let set = common::yelp_reviews();
    for r in &set.reviews {
        assert!(r.reviewer_join_year >= 2004);
        assert!(r.reviewer_elite_years as i32 <= (r.date.year() - r.reviewer_join_year).max(0));
    }
}

#[test]
fn missing_source_file() {
    let dir = tempfile::tempdir().unwrap();
    let err = ingest_reviews(dir.path(), &SourceLayout::default(), &IngestFilter::default()).unwrap_err();
    assert!(matches!(err, IngestError::MissingFile(_)));
}
