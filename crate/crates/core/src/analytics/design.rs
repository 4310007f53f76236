//! Dummy-coded design matrices for rating regressions.

use std::collections::BTreeSet;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::descriptive::joined;
use super::linalg::{Matrix, Qr};
use super::ols::{fit_ols, FittedModel};
use super::AnalyticsError;
use crate::corpus::Review;
use crate::extraction::ReviewExtraction;
use crate::scalar::Real;
use crate::sentiment::Sentiment3;
use crate::taxonomy::{Item, Level, Taxonomy};

pub const INTERCEPT: &str = "(Intercept)";
/// Items mentioned in fewer reviews than this get no regressors.
pub const DEFAULT_MENTION_FLOOR: f64 = 0.03;
pub const DEFAULT_EXCLUDED_ATTRIBUTE: &str = "Environment & Sustainability";

/// Indicator levels per item; negative is the omitted reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dummy {
    Neutral,
    Positive,
    NotMentioned,
}

impl Dummy {
    pub const ALL: [Dummy; 3] = [Dummy::Neutral, Dummy::Positive, Dummy::NotMentioned];

    pub fn suffix(self) -> &'static str {
        match self {
            Dummy::Neutral => "neutral",
            Dummy::Positive => "positive",
            Dummy::NotMentioned => "not_mentioned",
        }
    }
}

pub fn column_name(label: &str, dummy: Dummy) -> String {
    format!("{label}:{}", dummy.suffix())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub level: Level,
    /// Store, review-year and join-year fixed effects plus elite years.
    pub controls: bool,
    pub mention_floor: f64,
    /// Attributes (and their features) left out entirely.
    pub exclude_attributes: Vec<String>,
}

impl DesignConfig {
    pub fn new(level: Level, controls: bool) -> Self {
        Self {
            level,
            controls,
            mention_floor: DEFAULT_MENTION_FLOOR,
            exclude_attributes: vec![DEFAULT_EXCLUDED_ATTRIBUTE.to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignItem {
    pub item: Item,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design<T> {
    pub x: Matrix<T>,
    /// Star ratings.
    pub y: Vec<T>,
    pub columns: Vec<String>,
    /// Store id per row.
    pub clusters: Vec<String>,
    pub review_ids: Vec<String>,
    pub items: Vec<DesignItem>,
    pub notes: Vec<String>,
}

impl<T: Real> Design<T> {
    /// OLS with store-clustered standard errors.
    pub fn fit(&self) -> Result<FittedModel<T>, AnalyticsError> {
        let mut m = fit_ols(&self.x, &self.y, Some(&self.clusters), &self.columns)?;
        let mut notes = self.notes.clone();
        notes.append(&mut m.notes);
        m.notes = notes;
        Ok(m)
    }
}

fn fixed_effect_block<K: Ord + Clone + std::fmt::Display>(
    prefix: &str,
    keys: &[K],
) -> Vec<(String, Vec<bool>)> {
    let levels: BTreeSet<&K> = keys.iter().collect();
    levels
        .into_iter()
        .skip(1)
        .map(|lvl| (format!("{prefix}:{lvl}"), keys.iter().map(|k| k == lvl).collect()))
        .collect()
}

pub fn build_design<T: Real>(
    extractions: &[ReviewExtraction],
    reviews: &[Review],
    taxonomy: &Taxonomy,
    cfg: &DesignConfig,
) -> Result<Design<T>, AnalyticsError> {
    if extractions.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let rows = joined(extractions, reviews)?;
    let n = rows.len();
    let mut notes = Vec::new();

    let mut items = Vec::new();
    for (item, label) in taxonomy.item_labels(cfg.level) {
        if cfg.exclude_attributes.contains(&item.attribute) {
            continue;
        }
        let mentions = rows.iter().filter(|(e, _)| e.item_sentiment(&item).is_some()).count();
        if (mentions as f64) < cfg.mention_floor * n as f64 {
            notes.push(format!("`{label}` below the mention floor ({mentions} of {n} reviews)"));
            continue;
        }
        items.push(DesignItem { item, label });
    }

    let mut columns: Vec<(String, Vec<T>)> = vec![(INTERCEPT.to_string(), vec![T::one(); n])];
    for di in &items {
        let classes: Vec<Option<Sentiment3>> =
            rows.iter().map(|(e, _)| e.item_sentiment(&di.item).map(|s| s.to_3pt())).collect();
        for dummy in Dummy::ALL {
            let col = classes
                .iter()
                .map(|c| {
                    let on = match dummy {
                        Dummy::Neutral => *c == Some(Sentiment3::Neutral),
                        Dummy::Positive => *c == Some(Sentiment3::Positive),
                        Dummy::NotMentioned => c.is_none(),
                    };
                    if on { T::one() } else { T::zero() }
                })
                .collect();
            columns.push((column_name(&di.label, dummy), col));
        }
    }

    if cfg.controls {
        let stores: Vec<&str> = rows.iter().map(|(_, r)| r.store_id.as_str()).collect();
        let years: Vec<i32> = rows.iter().map(|(_, r)| r.date.year()).collect();
        let joins: Vec<i32> = rows.iter().map(|(_, r)| r.reviewer_join_year).collect();
        let blocks = fixed_effect_block("store", &stores)
            .into_iter()
            .chain(fixed_effect_block("year", &years))
            .chain(fixed_effect_block("join_year", &joins));
        for (name, on) in blocks {
            columns.push((name, on.into_iter().map(|b| if b { T::one() } else { T::zero() }).collect()));
        }
        columns.push((
            "elite_years".to_string(),
            rows.iter().map(|(_, r)| T::from_count(r.reviewer_elite_years as usize)).collect(),
        ));
    }

    let mut kept = Vec::with_capacity(columns.len());
    for (j, (name, col)) in columns.into_iter().enumerate() {
        if j > 0 && col.iter().all(|&v| v == col[0]) {
            notes.push(format!("dropped constant column `{name}`"));
            continue;
        }
        kept.push((name, col));
    }
    let (names, cols): (Vec<String>, Vec<Vec<T>>) = kept.into_iter().unzip();
    let x = Matrix::from_columns(&cols);
    if n > names.len() {
        let dependent = Qr::new(&x).dependent_columns(&x);
        if !dependent.is_empty() {
            return Err(AnalyticsError::RankDeficient {
                columns: dependent.into_iter().map(|j| names[j].clone()).collect(),
            });
        }
    } else {
        return Err(AnalyticsError::Shape(format!("{n} reviews cannot identify {} columns", names.len())));
    }

    let present: BTreeSet<&str> = names.iter().map(String::as_str).collect();
    items.retain(|di| Dummy::ALL.iter().any(|&d| present.contains(column_name(&di.label, d).as_str())));

    Ok(Design {
        x,
        y: rows.iter().map(|(_, r)| T::from_count(r.stars as usize)).collect(),
        columns: names,
        clusters: rows.iter().map(|(_, r)| r.store_id.clone()).collect(),
        review_ids: rows.iter().map(|(e, _)| e.review_id.clone()).collect(),
        items,
        notes,
    })
}
