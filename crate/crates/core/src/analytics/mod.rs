//! Descriptive tables, rating regressions, importance and the perceptual map.

mod descriptive;
mod design;
mod factor;
mod importance;
mod linalg;
mod ols;

pub use descriptive::{
    mention_stats, sentiment_shares, trend_series, ClassCounts, GroupBy, ItemStats, MentionStats,
    Shares, TrendPoint, TrendSeries, DEFAULT_MIN_SUPPORT, FEATURE_REPORT_FLOOR,
};
pub use design::{
    build_design, column_name, Design, DesignConfig, DesignItem, Dummy, DEFAULT_EXCLUDED_ATTRIBUTE,
    DEFAULT_MENTION_FLOOR, INTERCEPT,
};
pub use factor::{perceptual_map, store_sentiment_matrix, MapConfig, PerceptualMap, Quadrant, StoreScore};
pub use importance::{importance, Importance};
pub use linalg::{symmetric_eigen, Matrix, Qr, SymmetricEigen};
pub use ols::{fit_ols, Coefficient, FitStats, FittedModel};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("no extractions")]
    Empty,
    #[error("shape: {0}")]
    Shape(String),
    #[error("extraction for review `{0}` has no matching review record")]
    MissingReview(String),
    #[error("design is rank deficient; dependent columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("model has no coefficient `{0}`")]
    MissingCoefficient(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

#[cfg(test)]
pub(crate) mod testkit {
    use std::collections::{BTreeMap, BTreeSet};

    use chrono::NaiveDate;

    use crate::corpus::Review;
    use crate::extraction::{AttributeMention, FeatureMention, ReviewExtraction};
    use crate::sentiment::Sentiment5;

    pub type FeatureSpec<'a> = (&'a str, Sentiment5, &'a [(&'a str, Sentiment5)]);

    /// One sentence per mentioned attribute; features cite their attribute's sentence.
    pub fn extraction_with_features(id: &str, mentions: &[FeatureSpec<'_>]) -> ReviewExtraction {
        let mut attributes = BTreeMap::new();
        for (i, &(name, s, feats)) in mentions.iter().enumerate() {
            let sentences = BTreeSet::from([i]);
            let features = feats
                .iter()
                .map(|&(f, fs)| (f.to_string(), FeatureMention { sentiment: fs, sentence_indices: sentences.clone() }))
                .collect();
            attributes.insert(
                name.to_string(),
                AttributeMention {
                    sentiment: s,
                    sentence_indices: sentences,
                    features,
                    other_feature_sentences: BTreeSet::new(),
                },
            );
        }
        ReviewExtraction {
            review_id: id.to_string(),
            overall: Sentiment5::Neutral,
            n_sentences: mentions.len().max(1),
            other_attribute_sentences: if mentions.is_empty() { BTreeSet::from([0]) } else { BTreeSet::new() },
            attributes,
            reasoning: Default::default(),
        }
    }

    pub fn extraction(id: &str, mentions: &[(&str, Sentiment5)]) -> ReviewExtraction {
        let specs: Vec<FeatureSpec<'_>> = mentions.iter().map(|&(a, s)| (a, s, &[][..])).collect();
        extraction_with_features(id, &specs)
    }

    pub fn review(id: &str, store: &str, year: i32, stars: u8) -> Review {
        Review {
            review_id: id.to_string(),
            store_id: store.to_string(),
            reviewer_id: format!("u-{id}"),
            date: NaiveDate::from_ymd_opt(year, 6, 1).unwrap(),
            stars,
            text: "text".into(),
            state: "PA".into(),
            reviewer_join_year: 2010,
            reviewer_elite_years: 0,
        }
    }
}
