use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Taxonomy;
use crate::extraction::ReviewExtraction;

pub const DEFAULT_PREVALENCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("no extractions to measure prevalence on")]
    InsufficientEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub attribute: String,
    pub mentions: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub taxonomy: Taxonomy,
    pub n_reviews: usize,
    pub removed: Vec<Removal>,
}

/// Drops attributes mentioned in strictly fewer than `threshold` of the
/// reviews. An attribute exactly at the threshold stays.
pub fn prevalence_filter(
    taxonomy: &Taxonomy,
    extractions: &[ReviewExtraction],
    threshold: f64,
) -> Result<FilterOutcome, FilterError> {
    if extractions.is_empty() {
        return Err(FilterError::InsufficientEvidence);
    }
    let n = extractions.len();
    let mut removed = Vec::new();
    for a in taxonomy.attributes() {
        let mentions = extractions.iter().filter(|x| x.mentions(&a.name)).count();
        let fraction = mentions as f64 / n as f64;
        if fraction < threshold {
            removed.push(Removal { attribute: a.name.clone(), mentions, fraction });
        }
    }
    let kept = taxonomy.retain_attributes(|a| !removed.iter().any(|r| r.attribute == a.name));
    Ok(FilterOutcome { taxonomy: kept, n_reviews: n, removed })
}
