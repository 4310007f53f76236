//! One-level feature uplift simulation and the revenue proxy.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{column_name, Dummy, FittedModel};
use crate::corpus::Review;
use crate::extraction::ReviewExtraction;
use crate::scalar::Field;
use crate::sentiment::{Sentiment3, Sentiment5};
use crate::taxonomy::{Item, Level, Taxonomy};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WhatIfError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("unknown store `{0}`")]
    UnknownStore(String),
    #[error("no stores in scope")]
    EmptyScope,
    #[error("extraction for review `{0}` has no matching review record")]
    MissingReview(String),
    #[error("rating delta must be non-negative")]
    NegativeDelta,
    #[error("{0}")]
    Config(String),
}

/// Revenue change in percent for a rating delta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevenueRange<T> {
    pub low_pct: T,
    pub high_pct: T,
}

/// Revenue change per rating point: 5% to 9%.
pub fn default_revenue_rates<T: Field>() -> (T, T) {
    let hundred = T::from_count(100);
    (T::from_count(5) / hundred, T::from_count(9) / hundred)
}

/// `[delta * low, delta * high]` expressed in percent.
pub fn revenue_proxy<T: Field>(delta: T, low: T, high: T) -> Result<RevenueRange<T>, WhatIfError> {
    if delta < T::zero() {
        return Err(WhatIfError::NegativeDelta);
    }
    let hundred = T::from_count(100);
    Ok(RevenueRange { low_pct: delta * low * hundred, high_pct: delta * high * hundred })
}

/// Predicted rating change for one review when the feature moves up one
/// 3-point class. Positive and unmentioned stay put.
pub fn review_delta<T: Field>(sentiment: Option<Sentiment5>, neutral: T, positive: T) -> T {
    match sentiment.map(Sentiment5::to_3pt) {
        Some(Sentiment3::Negative) => neutral,
        Some(Sentiment3::Neutral) => positive - neutral,
        _ => T::zero(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpliftConfig<T> {
    /// Average over all of a store's reviews (unmentioned ones add zero)
    /// rather than only those mentioning the feature.
    pub include_non_mentioning: bool,
    pub bins: usize,
    pub revenue_rates: (T, T),
}

impl<T: Field> Default for UpliftConfig<T> {
    fn default() -> Self {
        Self { include_non_mentioning: true, bins: 10, revenue_rates: default_revenue_rates() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreImpact<T> {
    pub store_id: String,
    pub n_reviews: usize,
    pub n_mentions: usize,
    pub delta: T,
    pub revenue: RevenueRange<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary<T> {
    pub mean: T,
    /// Sample variance; zero for a single store.
    pub variance: T,
    pub sd: f64,
    pub min: T,
    pub max: T,
}

/// Fixed-width bins starting at `lower`; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram<T> {
    pub lower: T,
    pub width: T,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport<T> {
    pub feature: String,
    pub coef_neutral: T,
    pub coef_positive: T,
    pub stores: Vec<StoreImpact<T>>,
    pub summary: Summary<T>,
    pub histogram: Histogram<T>,
}

impl<T: Field> ImpactReport<T> {
    pub fn store(&self, id: &str) -> Option<&StoreImpact<T>> {
        self.stores.iter().find(|s| s.store_id == id)
    }

    /// Tab-separated rows keyed by (store_id, feature).
    pub fn to_tsv(&self) -> String {
        let f = |v: T| v.to_f64().map(|v| format!("{v:.6}")).unwrap_or_default();
        let mut s = String::from("store_id\tfeature\tn_reviews\tn_mentions\tdelta\trevenue_low_pct\trevenue_high_pct\n");
        for st in &self.stores {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                st.store_id,
                self.feature,
                st.n_reviews,
                st.n_mentions,
                f(st.delta),
                f(st.revenue.low_pct),
                f(st.revenue.high_pct)
            );
        }
        s
    }
}

fn summarize<T: Field>(values: &[T], bins: usize) -> (Summary<T>, Histogram<T>) {
    let n = T::from_count(values.len());
    let mean = values.iter().fold(T::zero(), |s, &v| s + v) / n;
    let variance = if values.len() > 1 {
        values.iter().fold(T::zero(), |s, &v| s + (v - mean) * (v - mean)) / (n - T::one())
    } else {
        T::zero()
    };
    let min = values.iter().copied().fold(values[0], |m, v| if v < m { v } else { m });
    let max = values.iter().copied().fold(values[0], |m, v| if v > m { v } else { m });
    let width = (max - min) / T::from_count(bins);
    let mut counts = vec![0; bins];
    for &v in values {
        let mut b = 0;
        while width > T::zero() && b + 1 < bins && min + width * T::from_count(b + 1) <= v {
            b += 1;
        }
        counts[b] += 1;
    }
    let sd = variance.to_f64().unwrap_or(f64::NAN).sqrt();
    (Summary { mean, variance, sd, min, max }, Histogram { lower: min, width, counts })
}

fn resolve_feature(taxonomy: &Taxonomy, feature: &str) -> Option<(Item, String)> {
    taxonomy.item_labels(Level::Feature).into_iter().find(|(_, label)| label == feature)
}

/// Per-store mean predicted rating change from improving `feature` one level
/// in every review that mentions it. `scope` limits the stores; `None`
/// covers every store with reviews.
pub fn simulate_uplift<T: Field>(
    extractions: &[ReviewExtraction],
    reviews: &[Review],
    taxonomy: &Taxonomy,
    model: &FittedModel<T>,
    feature: &str,
    scope: Option<&[String]>,
    cfg: &UpliftConfig<T>,
) -> Result<ImpactReport<T>, WhatIfError> {
    if cfg.bins == 0 {
        return Err(WhatIfError::Config("histogram needs at least one bin".into()));
    }
    let unknown = || WhatIfError::UnknownFeature(feature.to_string());
    let (item, label) = resolve_feature(taxonomy, feature).ok_or_else(unknown)?;
    let neutral = model.estimate(&column_name(&label, Dummy::Neutral)).ok_or_else(unknown)?;
    let positive = model.estimate(&column_name(&label, Dummy::Positive)).ok_or_else(unknown)?;

    let by_id: BTreeMap<&str, &ReviewExtraction> =
        extractions.iter().map(|e| (e.review_id.as_str(), e)).collect();
    // store -> (reviews, mentions, summed delta)
    let mut per_store: BTreeMap<&str, (usize, usize, T)> = BTreeMap::new();
    for r in reviews {
        let Some(e) = by_id.get(r.review_id.as_str()) else { continue };
        let acc = per_store.entry(r.store_id.as_str()).or_insert((0, 0, T::zero()));
        let s = e.item_sentiment(&item);
        acc.0 += 1;
        if s.is_some() {
            acc.1 += 1;
        }
        acc.2 = acc.2 + review_delta(s, neutral, positive);
    }
    let known: std::collections::HashSet<&str> = reviews.iter().map(|r| r.review_id.as_str()).collect();
    if let Some(e) = extractions.iter().find(|e| !known.contains(e.review_id.as_str())) {
        return Err(WhatIfError::MissingReview(e.review_id.clone()));
    }

    let ids: Vec<&str> = match scope {
        None => per_store.keys().copied().collect(),
        Some(list) => {
            let mut ids = Vec::with_capacity(list.len());
            for id in list {
                if !per_store.contains_key(id.as_str()) {
                    return Err(WhatIfError::UnknownStore(id.clone()));
                }
                ids.push(id.as_str());
            }
            ids.sort_unstable();
            ids.dedup();
            ids
        }
    };
    if ids.is_empty() {
        return Err(WhatIfError::EmptyScope);
    }

    let (low, high) = cfg.revenue_rates;
    let mut stores = Vec::with_capacity(ids.len());
    for id in ids {
        let (n_reviews, n_mentions, sum) = per_store[id];
        let denom = if cfg.include_non_mentioning { n_reviews } else { n_mentions };
        let delta = if denom == 0 { T::zero() } else { sum / T::from_count(denom) };
        let revenue = revenue_proxy(delta, low, high).unwrap_or(RevenueRange {
            low_pct: delta * low * T::from_count(100),
            high_pct: delta * high * T::from_count(100),
        });
        stores.push(StoreImpact { store_id: id.to_string(), n_reviews, n_mentions, delta, revenue });
    }
    let deltas: Vec<T> = stores.iter().map(|s| s.delta).collect();
    let (summary, histogram) = summarize(&deltas, cfg.bins);
    Ok(ImpactReport {
        feature: label,
        coef_neutral: neutral,
        coef_positive: positive,
        stores,
        summary,
        histogram,
    })
}
