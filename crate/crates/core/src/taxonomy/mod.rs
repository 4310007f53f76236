//! Attribute/feature catalog: discovery over review batches, consolidation
//! through a human-edited merge map, and the prevalence filter.

mod consolidate;
mod discover;
mod filter;

pub use consolidate::{
    consolidate, normalize_key, CandidateSet, Consolidated, Consolidation, ConsolidateError,
    Discarded, MergeGroup, MergeMap, Resolution, TraceEntry, Worksheet, WorksheetRow,
};
pub use discover::{
    discover_all, discover_candidates, render_discovery_prompt, sample_batches, CandidateKind,
    DiscoveryError, DiscoveryRun,
};
pub use filter::{prevalence_filter, FilterError, FilterOutcome, Removal, DEFAULT_PREVALENCE};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Artifact;

pub const OTHER_ATTRIBUTES: &str = "Other Attributes";
pub const OTHER_FEATURES: &str = "Other Features";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub features: Vec<String>,
}

impl AttributeEntry {
    pub fn new<S: Into<String>>(name: impl Into<String>, features: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            description: None,
            features: features.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("attribute `{0}` listed twice")]
    DuplicateAttribute(String),
    #[error("feature `{feature}` listed twice under `{attribute}`")]
    DuplicateFeature { attribute: String, feature: String },
    #[error("attribute `{0}` has no features")]
    NoFeatures(String),
    #[error("`{0}` is a reserved sink name")]
    Reserved(String),
    #[error("empty attribute or feature name")]
    EmptyName,
}

#[derive(Deserialize)]
struct RawTaxonomy {
    attributes: Vec<AttributeEntry>,
}

/// Ordered attribute catalog. Names are unique, every attribute has at least
/// one feature, and the reserved sinks are implicit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTaxonomy")]
pub struct Taxonomy {
    attributes: Vec<AttributeEntry>,
}

impl TryFrom<RawTaxonomy> for Taxonomy {
    type Error = TaxonomyError;

    fn try_from(raw: RawTaxonomy) -> Result<Self, Self::Error> {
        Self::new(raw.attributes)
    }
}

fn is_reserved(name: &str) -> bool {
    let n = name.trim();
    n.eq_ignore_ascii_case(OTHER_ATTRIBUTES) || n.eq_ignore_ascii_case(OTHER_FEATURES)
}

impl Taxonomy {
    pub fn new(attributes: Vec<AttributeEntry>) -> Result<Self, TaxonomyError> {
        let mut seen = HashSet::new();
        for a in &attributes {
            if a.name.trim().is_empty() {
                return Err(TaxonomyError::EmptyName);
            }
            if is_reserved(&a.name) {
                return Err(TaxonomyError::Reserved(a.name.clone()));
            }
            if !seen.insert(a.name.as_str()) {
                return Err(TaxonomyError::DuplicateAttribute(a.name.clone()));
            }
            if a.features.is_empty() {
                return Err(TaxonomyError::NoFeatures(a.name.clone()));
            }
            let mut fseen = HashSet::new();
            for f in &a.features {
                if f.trim().is_empty() {
                    return Err(TaxonomyError::EmptyName);
                }
                if is_reserved(f) {
                    return Err(TaxonomyError::Reserved(f.clone()));
                }
                if !fseen.insert(f.as_str()) {
                    return Err(TaxonomyError::DuplicateFeature {
                        attribute: a.name.clone(),
                        feature: f.clone(),
                    });
                }
            }
        }
        Ok(Self { attributes })
    }

    /// The ten-attribute coffee-shop catalog.
    pub fn coffee_shop() -> Self {
        serde_json::from_str(include_str!("../../data/coffee_shop_taxonomy.json"))
            .expect("bundled taxonomy is valid")
    }

    pub fn attributes(&self) -> &[AttributeEntry] {
        &self.attributes
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeEntry> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn features_of(&self, attribute: &str) -> Option<&[String]> {
        self.attribute(attribute).map(|a| a.features.as_slice())
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    /// Canonical attribute name for a model-produced label, matched
    /// case-insensitively with whitespace collapsed. The sink is included.
    pub fn resolve_attribute(&self, label: &str) -> Option<&str> {
        let key = loose(label);
        if key == loose(OTHER_ATTRIBUTES) {
            return Some(OTHER_ATTRIBUTES);
        }
        self.attribute_names().find(|n| loose(n) == key)
    }

    pub fn resolve_feature(&self, attribute: &str, label: &str) -> Option<&str> {
        let key = loose(label);
        if key == loose(OTHER_FEATURES) {
            return Some(OTHER_FEATURES);
        }
        self.features_of(attribute)?
            .iter()
            .map(String::as_str)
            .find(|f| loose(f) == key)
    }

    pub(crate) fn retain_attributes(&self, keep: impl Fn(&AttributeEntry) -> bool) -> Self {
        Self {
            attributes: self.attributes.iter().filter(|a| keep(a)).cloned().collect(),
        }
    }
}

fn loose(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '“' || c == '”')
        .to_lowercase()
}

/// Granularity of an analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Attribute,
    Feature,
}

/// An attribute, or one feature of an attribute.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Item {
    pub attribute: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
}

impl Item {
    pub fn attribute(name: impl Into<String>) -> Self {
        Self { attribute: name.into(), feature: None }
    }

    pub fn feature(attribute: impl Into<String>, feature: impl Into<String>) -> Self {
        Self { attribute: attribute.into(), feature: Some(feature.into()) }
    }
}

impl Taxonomy {
    /// Items in catalog order.
    pub fn items(&self, level: Level) -> Vec<Item> {
        match level {
            Level::Attribute => self.attribute_names().map(Item::attribute).collect(),
            Level::Feature => self
                .attributes
                .iter()
                .flat_map(|a| a.features.iter().map(|f| Item::feature(a.name.clone(), f.clone())))
                .collect(),
        }
    }

    /// Display names: the attribute, or the bare feature name unless that
    /// name occurs under more than one attribute, in which case it becomes
    /// "Attribute / Feature".
    pub fn item_labels(&self, level: Level) -> Vec<(Item, String)> {
        let items = self.items(level);
        let count = |f: &str| items.iter().filter(|i| i.feature.as_deref() == Some(f)).count();
        items
            .iter()
            .map(|i| {
                let label = match &i.feature {
                    None => i.attribute.clone(),
                    Some(f) if count(f) > 1 => format!("{} / {}", i.attribute, f),
                    Some(f) => f.clone(),
                };
                (i.clone(), label)
            })
            .collect()
    }
}

impl Artifact for Taxonomy {
    const KIND: &'static str = "taxonomy";
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coffee_shop_shape() {
        let t = Taxonomy::coffee_shop();
        assert_eq!(t.len(), 10);
        let counts: Vec<usize> = t.attributes().iter().map(|a| a.features.len()).collect();
        assert_eq!(counts, [4, 5, 3, 5, 6, 6, 4, 3, 3, 3]);
        assert_eq!(t.attributes()[4].name, "Customer Service");
    }

    #[test]
    fn invariants_enforced() {
        let dup = Taxonomy::new(vec![AttributeEntry::new("A", ["x"]), AttributeEntry::new("A", ["y"])]);
        assert_eq!(dup.unwrap_err(), TaxonomyError::DuplicateAttribute("A".into()));
        let empty = Taxonomy::new(vec![AttributeEntry::new("A", Vec::<String>::new())]);
        assert_eq!(empty.unwrap_err(), TaxonomyError::NoFeatures("A".into()));
        let sink = Taxonomy::new(vec![AttributeEntry::new("A", ["Other Features"])]);
        assert!(matches!(sink, Err(TaxonomyError::Reserved(_))));
        let fdup = Taxonomy::new(vec![AttributeEntry::new("A", ["x", "x"])]);
        assert!(matches!(fdup, Err(TaxonomyError::DuplicateFeature { .. })));
    }

    #[test]
    fn deserialization_validates() {
        let bad = r#"{"attributes":[{"name":"Other Attributes","features":["x"]}]}"#;
        assert!(serde_json::from_str::<Taxonomy>(bad).is_err());
    }

    #[test]
    fn item_labels_qualify_duplicates() {
        let t = Taxonomy::new(vec![
            AttributeEntry::new("A", ["x", "y"]),
            AttributeEntry::new("B", ["x"]),
        ])
        .unwrap();
        let labels: Vec<String> = t.item_labels(Level::Feature).into_iter().map(|(_, l)| l).collect();
        assert_eq!(labels, ["A / x", "y", "B / x"]);
        assert_eq!(Taxonomy::coffee_shop().items(Level::Feature).len(), 42);
    }

    #[test]
    fn loose_resolution() {
        let t = Taxonomy::coffee_shop();
        assert_eq!(t.resolve_attribute(" customer  service "), Some("Customer Service"));
        assert_eq!(t.resolve_attribute("other attributes"), Some(OTHER_ATTRIBUTES));
        assert_eq!(t.resolve_attribute("Ambience"), None);
        assert_eq!(
            t.resolve_feature("Digital Services & Technology", "wifi connectivity & power outlets"),
            Some("Wifi Connectivity & Power Outlets")
        );
        assert_eq!(t.resolve_feature("Customer Service", "Wifi Connectivity & Power Outlets"), None);
    }
}
