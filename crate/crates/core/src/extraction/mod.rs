//! Per-review structured sentiment extraction.

mod pipeline;

pub use pipeline::{
    attribute_catalog_message, derive_seed, format_sentences, ExtractionConfig, ExtractionRun,
    Extractor,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Artifact;
use crate::sentiment::Sentiment5;
use crate::taxonomy::{Item, Taxonomy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMention {
    pub sentiment: Sentiment5,
    pub sentence_indices: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeMention {
    pub sentiment: Sentiment5,
    pub sentence_indices: BTreeSet<usize>,
    #[serde(default)]
    pub features: BTreeMap<String, FeatureMention>,
    #[serde(default)]
    pub other_feature_sentences: BTreeSet<usize>,
}

/// Model reasoning kept for audit; never read back into decisions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reasoning {
    pub overall: String,
    #[serde(default)]
    pub sentence_attributes: BTreeMap<usize, String>,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    /// Keyed by attribute, then sentence index.
    #[serde(default)]
    pub sentence_features: BTreeMap<String, BTreeMap<usize, String>>,
    /// Keyed by attribute, then feature.
    #[serde(default)]
    pub features: BTreeMap<String, BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewExtraction {
    pub review_id: String,
    pub overall: Sentiment5,
    pub n_sentences: usize,
    pub attributes: BTreeMap<String, AttributeMention>,
    pub other_attribute_sentences: BTreeSet<usize>,
    #[serde(default)]
    pub reasoning: Reasoning,
}

impl Artifact for ReviewExtraction {
    const KIND: &'static str = "review_extraction";
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvariantError {
    #[error("sentence {0} has no attribute")]
    Uncovered(usize),
    #[error("sentence index {0} out of range")]
    OutOfRange(usize),
    #[error("`{0}` is not in the taxonomy")]
    UnknownAttribute(String),
    #[error("`{feature}` is not a feature of `{attribute}`")]
    UnknownFeature { attribute: String, feature: String },
    #[error("`{attribute}` / `{feature}` cites sentences outside its attribute")]
    NotContained { attribute: String, feature: String },
}

impl ReviewExtraction {
    pub fn mentions(&self, attribute: &str) -> bool {
        self.attributes.contains_key(attribute)
    }

    pub fn feature(&self, attribute: &str, feature: &str) -> Option<&FeatureMention> {
        self.attributes.get(attribute)?.features.get(feature)
    }

    pub fn item_sentiment(&self, item: &Item) -> Option<Sentiment5> {
        let a = self.attributes.get(&item.attribute)?;
        match &item.feature {
            None => Some(a.sentiment),
            Some(f) => a.features.get(f).map(|m| m.sentiment),
        }
    }

    /// Coverage, containment and naming checks.
    pub fn check(&self, taxonomy: &Taxonomy) -> Result<(), InvariantError> {
        let mut covered = self.other_attribute_sentences.clone();
        for (name, a) in &self.attributes {
            let feats = taxonomy
                .features_of(name)
                .ok_or_else(|| InvariantError::UnknownAttribute(name.clone()))?;
            covered.extend(a.sentence_indices.iter().copied());
            for (f, m) in &a.features {
                if !feats.contains(f) {
                    return Err(InvariantError::UnknownFeature { attribute: name.clone(), feature: f.clone() });
                }
                if !m.sentence_indices.is_subset(&a.sentence_indices) {
                    return Err(InvariantError::NotContained { attribute: name.clone(), feature: f.clone() });
                }
            }
            if !a.other_feature_sentences.is_subset(&a.sentence_indices) {
                return Err(InvariantError::NotContained {
                    attribute: name.clone(),
                    feature: crate::taxonomy::OTHER_FEATURES.into(),
                });
            }
        }
        if let Some(&i) = covered.iter().find(|&&i| i >= self.n_sentences) {
            return Err(InvariantError::OutOfRange(i));
        }
        match (0..self.n_sentences).find(|i| !covered.contains(i)) {
            Some(i) => Err(InvariantError::Uncovered(i)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Split,
    Overall,
    AttributeAssignment,
    AttributeSentiment,
    FeatureAssignment,
    FeatureSentiment,
}

impl Step {
    pub fn name(self) -> &'static str {
        match self {
            Self::Split => "split",
            Self::Overall => "overall",
            Self::AttributeAssignment => "attribute_assignment",
            Self::AttributeSentiment => "attribute_sentiment",
            Self::FeatureAssignment => "feature_assignment",
            Self::FeatureSentiment => "feature_sentiment",
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A review whose extraction stopped at `step`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("review {review_id}: {step} failed: {message}")]
pub struct ExtractionFailure {
    pub review_id: String,
    pub step: Step,
    pub message: String,
}

impl Artifact for ExtractionFailure {
    const KIND: &'static str = "extraction_failure";
}
