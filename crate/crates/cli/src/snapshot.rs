//! Immutable analytics bundle served by the HTTP service.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use voc_core::analytics::{
    build_design, importance, mention_stats, perceptual_map, store_sentiment_matrix, trend_series, AnalyticsError,
    ClassCounts, DesignConfig, FittedModel, Importance, MapConfig, MentionStats, PerceptualMap, Shares, TrendSeries,
    DEFAULT_EXCLUDED_ATTRIBUTE,
};
use voc_core::corpus::{split_sentences, Review, Store};
use voc_core::extraction::ReviewExtraction;
use voc_core::taxonomy::{Level, Taxonomy};
use voc_core::Sentiment5;

/// Version of every JSON payload the service and snapshot file carry.
pub const API_SCHEMA_VERSION: u32 = 1;

const SNIPPETS_PER_ATTRIBUTE: usize = 2;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("cannot read snapshot {path}: {message}")]
    Read { path: String, message: String },
    #[error("snapshot schema version {found}, this build serves version {API_SCHEMA_VERSION}")]
    Version { found: u32 },
    #[error("snapshot integrity check failed: stored hash {stored}, content hashes to {actual}")]
    Integrity { stored: String, actual: String },
    #[error("{step}: {source}")]
    Analytics {
        step: &'static str,
        #[source]
        source: AnalyticsError,
    },
}

/// Mention and sentiment figures for one item within a group of reviews.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSummary {
    pub label: String,
    pub attribute: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
    pub counts: ClassCounts,
    pub mention: f64,
    pub positive: f64,
    pub negative: f64,
    pub share_pos: Option<f64>,
    pub share_neg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    pub review_id: String,
    pub attribute: String,
    pub sentiment: Sentiment5,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreDetail {
    pub store: Store,
    pub n_reviews: usize,
    pub mean_stars: f64,
    pub attributes: Vec<ItemSummary>,
    pub features: Vec<ItemSummary>,
    /// Most negative and most positive sentence per attribute.
    pub snippets: Vec<Snippet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub level: Level,
    pub controls: bool,
    pub model: FittedModel<f64>,
    pub importance: Vec<Importance<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSection {
    pub map: Option<PerceptualMap<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unavailable: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotBody {
    pub schema_version: u32,
    pub built_at: String,
    pub taxonomy: Taxonomy,
    pub n_reviews: usize,
    pub stores: Vec<StoreDetail>,
    pub attribute_stats: MentionStats<f64>,
    pub feature_stats: MentionStats<f64>,
    pub trends: TrendSeries<f64>,
    pub perceptual_map: MapSection,
    pub attribute_model: Option<ModelSection>,
    pub feature_model: Option<ModelSection>,
    pub reviews: Vec<Review>,
    pub extractions: Vec<ReviewExtraction>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub content_hash: String,
    #[serde(flatten)]
    pub body: SnapshotBody,
}

#[derive(Debug, Clone)]
pub struct SnapshotConfig {
    pub controls: bool,
    pub mention_floor: f64,
    pub min_support: usize,
    pub built_at: String,
}

impl Default for SnapshotConfig {
    fn default() -> Self {
        Self {
            controls: true,
            mention_floor: voc_core::analytics::DEFAULT_MENTION_FLOOR,
            min_support: voc_core::analytics::DEFAULT_MIN_SUPPORT,
            built_at: String::new(),
        }
    }
}

fn hash_body(body: &SnapshotBody) -> String {
    let bytes = serde_json::to_vec(body).expect("snapshot serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn summaries(stats: &MentionStats<f64>) -> Vec<ItemSummary> {
    stats
        .items
        .iter()
        .map(|s| {
            let shares = Shares::<f64>::from_counts(s.counts);
            ItemSummary {
                label: s.label.clone(),
                attribute: s.item.attribute.clone(),
                feature: s.item.feature.clone(),
                counts: s.counts,
                mention: s.mention,
                positive: s.positive,
                negative: s.negative,
                share_pos: shares.share_pos,
                share_neg: shares.share_neg,
            }
        })
        .collect()
}

fn snippets(reviews: &[&Review], extractions: &BTreeMap<&str, &ReviewExtraction>, taxonomy: &Taxonomy) -> Vec<Snippet> {
    let mut out = Vec::new();
    for attribute in taxonomy.attribute_names() {
        let mut found: Vec<Snippet> = Vec::new();
        for r in reviews {
            let Some(m) = extractions.get(r.review_id.as_str()).and_then(|e| e.attributes.get(attribute)) else {
                continue;
            };
            let Some(&idx) = m.sentence_indices.iter().next() else { continue };
            let Some(sentence) = split_sentences(&r.text).ok().and_then(|s| s.into_iter().nth(idx)) else {
                continue;
            };
            found.push(Snippet {
                review_id: r.review_id.clone(),
                attribute: attribute.to_string(),
                sentiment: m.sentiment,
                text: sentence.text,
            });
        }
        found.sort_by(|a, b| a.sentiment.cmp(&b.sentiment).then_with(|| a.review_id.cmp(&b.review_id)));
        let mut picked: Vec<Snippet> = found.first().cloned().into_iter().collect();
        if found.len() > 1 {
            picked.push(found.last().cloned().unwrap());
        }
        out.extend(picked.into_iter().take(SNIPPETS_PER_ATTRIBUTE));
    }
    out
}

/// Item labels behind a fitted model, read off its `label:neutral` columns.
pub fn model_items(model: &FittedModel<f64>) -> Vec<String> {
    model
        .coefficients
        .iter()
        .filter_map(|c| c.name.strip_suffix(":neutral"))
        .map(str::to_string)
        .collect()
}

fn fit_section(
    extractions: &[ReviewExtraction],
    reviews: &[Review],
    taxonomy: &Taxonomy,
    level: Level,
    cfg: &SnapshotConfig,
) -> Result<ModelSection, AnalyticsError> {
    let mut dc = DesignConfig::new(level, cfg.controls);
    dc.mention_floor = cfg.mention_floor;
    let model = build_design::<f64>(extractions, reviews, taxonomy, &dc)?.fit()?;
    let items = model_items(&model);
    let importance = importance(&model, &items)?;
    Ok(ModelSection { level, controls: cfg.controls, model, importance })
}

/// Attribute and feature models fit the same way `build` does.
pub fn fit_models(
    extractions: &[ReviewExtraction],
    reviews: &[Review],
    taxonomy: &Taxonomy,
    cfg: &SnapshotConfig,
) -> [Result<ModelSection, AnalyticsError>; 2] {
    [Level::Attribute, Level::Feature].map(|level| fit_section(extractions, reviews, taxonomy, level, cfg))
}

impl Snapshot {
    /// Builds every precomputed table from one extraction set. Models that
    /// cannot be fit are passed in as errors and recorded as notes.
    pub fn build(
        taxonomy: Taxonomy,
        stores: &[Store],
        reviews: Vec<Review>,
        extractions: Vec<ReviewExtraction>,
        models: [Result<ModelSection, AnalyticsError>; 2],
        cfg: &SnapshotConfig,
    ) -> Result<Self, SnapshotError> {
        let analytics = |step| move |source| SnapshotError::Analytics { step, source };
        let mut notes = Vec::new();
        let attribute_stats = mention_stats::<f64>(&extractions, &taxonomy, Level::Attribute, cfg.mention_floor)
            .map_err(analytics("attribute mention stats"))?;
        let feature_stats = mention_stats::<f64>(
            &extractions,
            &taxonomy,
            Level::Feature,
            voc_core::analytics::FEATURE_REPORT_FLOOR,
        )
        .map_err(analytics("feature mention stats"))?;
        let trends = trend_series::<f64>(&extractions, &reviews, &taxonomy, cfg.min_support)
            .map_err(analytics("trend series"))?;

        let by_id: BTreeMap<&str, &ReviewExtraction> = extractions.iter().map(|e| (e.review_id.as_str(), e)).collect();
        let mut details = Vec::new();
        for store in stores {
            let rs: Vec<&Review> = reviews.iter().filter(|r| r.store_id == store.store_id).collect();
            let ex: Vec<ReviewExtraction> =
                rs.iter().filter_map(|r| by_id.get(r.review_id.as_str()).map(|e| (*e).clone())).collect();
            if ex.is_empty() {
                continue;
            }
            let stars: f64 = rs.iter().map(|r| f64::from(r.stars)).sum::<f64>() / rs.len() as f64;
            let a = mention_stats::<f64>(&ex, &taxonomy, Level::Attribute, 0.0).map_err(analytics("store stats"))?;
            let f = mention_stats::<f64>(&ex, &taxonomy, Level::Feature, 0.0).map_err(analytics("store stats"))?;
            details.push(StoreDetail {
                store: store.clone(),
                n_reviews: ex.len(),
                mean_stars: stars,
                attributes: summaries(&a),
                features: summaries(&f),
                snippets: snippets(&rs, &by_id, &taxonomy),
            });
        }

        let map_attributes: Vec<String> = attribute_stats
            .items
            .iter()
            .filter(|s| s.mention >= cfg.mention_floor && s.label != DEFAULT_EXCLUDED_ATTRIBUTE)
            .map(|s| s.label.clone())
            .collect();
        let perceptual_map = match store_sentiment_matrix::<f64>(&extractions, &reviews, &map_attributes)
            .and_then(|(ids, m)| perceptual_map(&m, &ids, &map_attributes, &MapConfig::default()))
        {
            Ok(map) => MapSection { map: Some(map), unavailable: None },
            Err(e) => {
                notes.push(format!("perceptual map unavailable: {e}"));
                MapSection { map: None, unavailable: Some(e.to_string()) }
            }
        };

        let [attribute_model, feature_model] = models.map(|m| m.map_err(|e| e.to_string()));
        let attribute_model = attribute_model
            .map_err(|e| notes.push(format!("attribute-level model unavailable: {e}")))
            .ok();
        let feature_model =
            feature_model.map_err(|e| notes.push(format!("feature-level model unavailable: {e}"))).ok();

        let body = SnapshotBody {
            schema_version: API_SCHEMA_VERSION,
            built_at: cfg.built_at.clone(),
            taxonomy,
            n_reviews: extractions.len(),
            stores: details,
            attribute_stats,
            feature_stats,
            trends,
            perceptual_map,
            attribute_model,
            feature_model,
            reviews,
            extractions,
            notes,
        };
        Ok(Self { content_hash: hash_body(&body), body })
    }

    /// Recomputes the content hash and compares it with the stored one.
    pub fn verify(&self) -> Result<(), SnapshotError> {
        if self.body.schema_version != API_SCHEMA_VERSION {
            return Err(SnapshotError::Version { found: self.body.schema_version });
        }
        let actual = hash_body(&self.body);
        if actual != self.content_hash {
            return Err(SnapshotError::Integrity { stored: self.content_hash.clone(), actual });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn load(path: &Path) -> Result<Self, SnapshotError> {
        let read = |message: String| SnapshotError::Read { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| read(e.to_string()))?;
        let snap: Self = serde_json::from_str(&text).map_err(|e| read(e.to_string()))?;
        snap.verify()?;
        Ok(snap)
    }

    pub fn store(&self, id: &str) -> Option<&StoreDetail> {
        self.body.stores.iter().find(|s| s.store.store_id == id)
    }
}
