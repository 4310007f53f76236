use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Review;
use crate::llm::{prompts, Conversation, FieldKind, FieldSpec, LlmClient, StepFailure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateKind {
    Attribute,
    Feature,
}

impl CandidateKind {
    fn key(self) -> &'static str {
        match self {
            Self::Attribute => "attributes",
            Self::Feature => "features",
        }
    }
}

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("{batches} batches of {size} need {} reviews, corpus has {corpus}", batches * size)]
    Sizing { batches: usize, size: usize, corpus: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("discovery call failed: {0}")]
    Call(#[from] StepFailure),
}

/// `n_batches` disjoint batches of `batch_size` reviews, drawn without
/// replacement.
pub fn sample_batches(
    reviews: &[Review],
    n_batches: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Vec<Review>>, DiscoveryError> {
    let total = n_batches * batch_size;
    if total > reviews.len() || batch_size == 0 {
        return Err(DiscoveryError::Sizing { batches: n_batches, size: batch_size, corpus: reviews.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, reviews.len(), total).into_vec();
    Ok(picks
        .chunks(batch_size)
        .map(|c| c.iter().map(|&i| reviews[i].clone()).collect())
        .collect())
}

pub fn render_discovery_prompt(batch: &[Review], kind: CandidateKind) -> String {
    let reviews = batch
        .iter()
        .enumerate()
        .map(|(i, r)| format!("Review {}: {}", i + 1, r.text.split_whitespace().collect::<Vec<_>>().join(" ")))
        .collect::<Vec<_>>()
        .join("\n");
    let template = match kind {
        CandidateKind::Attribute => prompts::attribute_discovery(),
        CandidateKind::Feature => prompts::feature_discovery(),
    };
    template.render_with(&[("reviews", &reviews)]).expect("discovery templates take `reviews`")
}

/// Candidate names from one batch: deduplicated case-insensitively (first
/// spelling kept) and sorted alphabetically.
pub fn discover_candidates(
    client: &LlmClient,
    model: &str,
    batch: &[Review],
    kind: CandidateKind,
) -> Result<Vec<String>, DiscoveryError> {
    if batch.is_empty() {
        return Err(DiscoveryError::EmptyBatch);
    }
    let prompt = render_discovery_prompt(batch, kind);
    let spec = [FieldSpec::new([kind.key()], FieldKind::StringList)];
    let mut conv = Conversation::new(client, model);
    let names = conv.ask(&prompt, &spec, |r| r.list(&spec[0].path).map_err(|e| e.to_string()))?;
    let mut out: Vec<String> = Vec::new();
    for n in names {
        let n = n.trim().to_string();
        if !n.is_empty() && !out.iter().any(|o| o.to_lowercase() == n.to_lowercase()) {
            out.push(n);
        }
    }
    out.sort_by_key(|s| (s.to_lowercase(), s.clone()));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryRun {
    pub kind: CandidateKind,
    /// Per batch, in batch order; `None` for a failed batch.
    pub batches: Vec<Option<Vec<String>>>,
    pub failures: Vec<(usize, String)>,
}

impl DiscoveryRun {
    pub fn all_candidates(&self) -> Vec<String> {
        self.batches.iter().flatten().flatten().cloned().collect()
    }
}

/// Runs discovery over every batch concurrently. A failed batch is recorded
/// and the rest continue.
pub fn discover_all(
    client: &LlmClient,
    model: &str,
    batches: &[Vec<Review>],
    kind: CandidateKind,
) -> DiscoveryRun {
    let results: Vec<Result<Vec<String>, DiscoveryError>> = batches
        .par_iter()
        .map(|b| discover_candidates(client, model, b, kind))
        .collect();
    let mut run = DiscoveryRun { kind, batches: Vec::new(), failures: Vec::new() };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => run.batches.push(Some(v)),
            Err(e) => {
                log::warn!("discovery batch {i} failed: {e}");
                run.failures.push((i, e.to_string()));
                run.batches.push(None);
            }
        }
    }
    run
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;
    use std::sync::Arc;

    use chrono::NaiveDate;

    use super::*;
    use crate::llm::mock::ScriptedBackend;
    use crate::llm::ResponseCache;

    fn corpus(n: usize) -> Vec<Review> {
        (0..n)
            .map(|i| Review {
                review_id: format!("r{i}"),
                store_id: "s".into(),
                reviewer_id: "u".into(),
                date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                stars: 4,
                text: format!("review number {i}"),
                state: "PA".into(),
                reviewer_join_year: 2015,
                reviewer_elite_years: 0,
            })
            .collect()
    }

    #[test]
    fn disjoint_deterministic_batches() {
        let c = corpus(100);
        let b = sample_batches(&c, 2, 10, 7).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b.iter().all(|x| x.len() == 10));
        let ids: HashSet<_> = b.iter().flatten().map(|r| r.review_id.clone()).collect();
        assert_eq!(ids.len(), 20);
        assert_eq!(b, sample_batches(&c, 2, 10, 7).unwrap());
    }

    #[test]
    fn oversized_request_rejected() {
        assert!(matches!(sample_batches(&corpus(100), 11, 10, 0), Err(DiscoveryError::Sizing { .. })));
        assert!(sample_batches(&corpus(20_000), 20, 1000, 1).is_ok());
    }

    fn client(reply: &str) -> (Arc<ScriptedBackend>, LlmClient) {
        let b = Arc::new(ScriptedBackend::new().fallback(reply));
        (b.clone(), LlmClient::new(b, ResponseCache::in_memory()))
    }

    #[test]
    fn sorted_and_deduplicated() {
        let (_, c) = client(r#"{"features": ["Wifi", "Coffee Taste", "wifi"]}"#);
        let got = discover_candidates(&c, "m", &corpus(3), CandidateKind::Feature).unwrap();
        assert_eq!(got, ["Coffee Taste", "Wifi"]);
    }

    #[test]
    fn attribute_kind_uses_attribute_template() {
        let (b, c) = client(r#"{"attributes": ["Service"]}"#);
        discover_candidates(&c, "m", &corpus(2), CandidateKind::Attribute).unwrap();
        let prompt = b.requests()[0].last_user().to_string();
        assert!(prompt.contains("extract key attributes"));
        assert!(prompt.contains("Review 2: review number 1"));
    }

    #[test]
    fn failed_batch_recorded() {
        let b = Arc::new(
            ScriptedBackend::new()
                .on_contains("review number 0", "not json")
                .fallback(r#"{"features": ["X"]}"#),
        );
        let c = LlmClient::new(b, ResponseCache::in_memory());
        let c_corpus = corpus(4);
        let batches = vec![c_corpus[..2].to_vec(), c_corpus[2..].to_vec()];
        let run = discover_all(&c, "m", &batches, CandidateKind::Feature);
        assert_eq!(run.failures.len(), 1);
        assert_eq!(run.failures[0].0, 0);
        assert_eq!(run.batches[1], Some(vec!["X".to_string()]));
    }
}
