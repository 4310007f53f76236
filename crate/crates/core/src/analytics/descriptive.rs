//! Mention rates, positive/negative shares and yearly trend series.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::corpus::Review;
use crate::extraction::ReviewExtraction;
use crate::scalar::Field;
use crate::sentiment::Sentiment3;
use crate::taxonomy::{Item, Level, Taxonomy};

/// Features mentioned in fewer reviews than this are left out of reports.
pub const FEATURE_REPORT_FLOOR: f64 = 0.03;
/// Periods with fewer reviews are flagged as low support.
pub const DEFAULT_MIN_SUPPORT: usize = 30;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub positive: usize,
    pub neutral: usize,
    pub negative: usize,
}

impl ClassCounts {
    pub fn add(&mut self, s: Sentiment3) {
        match s {
            Sentiment3::Positive => self.positive += 1,
            Sentiment3::Neutral => self.neutral += 1,
            Sentiment3::Negative => self.negative += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.positive + self.neutral + self.negative
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemStats<T> {
    pub item: Item,
    pub label: String,
    pub counts: ClassCounts,
    /// Fractions of all reviews.
    pub mention: T,
    pub positive: T,
    pub negative: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionStats<T> {
    pub level: Level,
    pub n_reviews: usize,
    pub report_floor: T,
    pub items: Vec<ItemStats<T>>,
}

impl<T: Field> MentionStats<T> {
    /// Items at or above the report floor.
    pub fn reported(&self) -> impl Iterator<Item = &ItemStats<T>> {
        self.items.iter().filter(|s| s.mention >= self.report_floor)
    }

    pub fn get(&self, label: &str) -> Option<&ItemStats<T>> {
        self.items.iter().find(|s| s.label == label)
    }
}

fn tally<'a>(
    extractions: impl IntoIterator<Item = &'a ReviewExtraction>,
    item: &Item,
) -> ClassCounts {
    let mut c = ClassCounts::default();
    for e in extractions {
        if let Some(s) = e.item_sentiment(item) {
            c.add(s.to_3pt());
        }
    }
    c
}

pub fn mention_stats<T: Field>(
    extractions: &[ReviewExtraction],
    taxonomy: &Taxonomy,
    level: Level,
    report_floor: T,
) -> Result<MentionStats<T>, AnalyticsError> {
    if extractions.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let n = T::from_count(extractions.len());
    let items = taxonomy
        .item_labels(level)
        .into_iter()
        .map(|(item, label)| {
            let counts = tally(extractions, &item);
            ItemStats {
                mention: T::from_count(counts.total()) / n,
                positive: T::from_count(counts.positive) / n,
                negative: T::from_count(counts.negative) / n,
                item,
                label,
                counts,
            }
        })
        .collect();
    Ok(MentionStats { level, n_reviews: extractions.len(), report_floor, items })
}

/// Positive and negative shares among non-neutral mentions. Both are `None`
/// when the group has no non-neutral mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shares<T> {
    pub counts: ClassCounts,
    pub share_pos: Option<T>,
    pub share_neg: Option<T>,
}

impl<T: Field> Shares<T> {
    pub fn from_counts(counts: ClassCounts) -> Self {
        let polar = counts.positive + counts.negative;
        if polar == 0 {
            return Self { counts, share_pos: None, share_neg: None };
        }
        let d = T::from_count(polar);
        Self {
            counts,
            share_pos: Some(T::from_count(counts.positive) / d),
            share_neg: Some(T::from_count(counts.negative) / d),
        }
    }

    pub fn is_defined(&self) -> bool {
        self.share_pos.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    None,
    Store,
    Year,
}

pub(crate) fn review_index(reviews: &[Review]) -> HashMap<&str, &Review> {
    reviews.iter().map(|r| (r.review_id.as_str(), r)).collect()
}

pub(crate) fn joined<'a>(
    extractions: &'a [ReviewExtraction],
    reviews: &'a [Review],
) -> Result<Vec<(&'a ReviewExtraction, &'a Review)>, AnalyticsError> {
    let index = review_index(reviews);
    extractions
        .iter()
        .map(|e| {
            index
                .get(e.review_id.as_str())
                .map(|&r| (e, r))
                .ok_or_else(|| AnalyticsError::MissingReview(e.review_id.clone()))
        })
        .collect()
}

/// Shares for one item, keyed by group (`"all"`, a store id or a year).
pub fn sentiment_shares<T: Field>(
    extractions: &[ReviewExtraction],
    reviews: &[Review],
    item: &Item,
    group_by: GroupBy,
) -> Result<BTreeMap<String, Shares<T>>, AnalyticsError> {
    let rows = joined(extractions, reviews)?;
    let mut groups: BTreeMap<String, ClassCounts> = BTreeMap::new();
    for (e, r) in rows {
        let key = match group_by {
            GroupBy::None => "all".to_string(),
            GroupBy::Store => r.store_id.clone(),
            GroupBy::Year => r.date.year().to_string(),
        };
        let c = groups.entry(key).or_default();
        if let Some(s) = e.item_sentiment(item) {
            c.add(s.to_3pt());
        }
    }
    Ok(groups.into_iter().map(|(k, c)| (k, Shares::from_counts(c))).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint<T> {
    pub period: i32,
    pub attribute: String,
    pub n_reviews: usize,
    pub mention: T,
    pub share_pos: Option<T>,
    pub share_neg: Option<T>,
    pub low_support: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries<T> {
    pub min_support: usize,
    pub points: Vec<TrendPoint<T>>,
}

impl<T: Field> TrendSeries<T> {
    pub fn for_attribute<'a>(&'a self, attribute: &'a str) -> impl Iterator<Item = &'a TrendPoint<T>> {
        self.points.iter().filter(move |p| p.attribute == attribute)
    }

    /// Periods where the negative share overtakes the positive share,
    /// comparing consecutive periods with defined shares.
    pub fn crossings(&self, attribute: &str) -> Vec<i32> {
        let mut out = Vec::new();
        let mut prev_neg_ahead: Option<bool> = None;
        for p in self.for_attribute(attribute) {
            let (Some(pos), Some(neg)) = (p.share_pos, p.share_neg) else {
                continue;
            };
            let ahead = neg > pos;
            if ahead && prev_neg_ahead == Some(false) {
                out.push(p.period);
            }
            prev_neg_ahead = Some(ahead);
        }
        out
    }

    /// Tab-separated `period, attribute, mention, share_pos, share_neg`.
    /// Undefined shares are left blank.
    pub fn to_tsv(&self) -> String {
        let f = |v: Option<T>| v.and_then(|v| v.to_f64()).map(|v| format!("{v:.6}")).unwrap_or_default();
        let mut s = String::from("period\tattribute\tmention\tshare_pos\tshare_neg\n");
        for p in &self.points {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                p.period,
                p.attribute,
                f(Some(p.mention)),
                f(p.share_pos),
                f(p.share_neg)
            );
        }
        s
    }
}

/// One point per calendar year and attribute. Years without reviews do not
/// appear.
pub fn trend_series<T: Field>(
    extractions: &[ReviewExtraction],
    reviews: &[Review],
    taxonomy: &Taxonomy,
    min_support: usize,
) -> Result<TrendSeries<T>, AnalyticsError> {
    let rows = joined(extractions, reviews)?;
    let mut by_year: BTreeMap<i32, Vec<&ReviewExtraction>> = BTreeMap::new();
    for (e, r) in rows {
        by_year.entry(r.date.year()).or_default().push(e);
    }
    let mut points = Vec::new();
    for attribute in taxonomy.attribute_names() {
        let item = Item::attribute(attribute);
        for (&year, exs) in &by_year {
            let counts = tally(exs.iter().copied(), &item);
            let shares = Shares::<T>::from_counts(counts);
            points.push(TrendPoint {
                period: year,
                attribute: attribute.to_string(),
                n_reviews: exs.len(),
                mention: T::from_count(counts.total()) / T::from_count(exs.len()),
                share_pos: shares.share_pos,
                share_neg: shares.share_neg,
                low_support: exs.len() < min_support,
            });
        }
    }
    Ok(TrendSeries { min_support, points })
}
