use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{AttributeMention, ExtractionFailure, FeatureMention, Reasoning, ReviewExtraction, Step};
use crate::corpus::{Review, Sentence, SentenceSplitter};
use crate::llm::{prompts, Conversation, FieldKind, FieldSpec, LlmClient, ParsedRecord, StepFailure};
use crate::sentiment::Sentiment5;
use crate::taxonomy::{Taxonomy, OTHER_ATTRIBUTES, OTHER_FEATURES};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionConfig {
    pub model: String,
    pub seed: u64,
}

/// Seed for one randomized presentation, stable across runs.
pub fn derive_seed(seed: u64, review_id: &str, step: &str, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [review_id, step, name] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn shuffled(items: &[String], seed: u64) -> Vec<String> {
    let mut v = items.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}

/// Opening system message: the attribute catalog in a seeded random order.
pub fn attribute_catalog_message(taxonomy: &Taxonomy, seed: u64) -> String {
    let names: Vec<String> = taxonomy.attribute_names().map(str::to_string).collect();
    let mut out = String::from(
        "You are annotating a customer review of a coffee shop. The pre-defined attributes are:\n",
    );
    for n in shuffled(&names, seed) {
        out.push_str("-- ");
        out.push_str(&n);
        out.push('\n');
    }
    out.push_str("Use these names exactly as written, or \"Other Attributes\".");
    out
}

/// The sub-review shown in the sentiment prompts, one numbered sentence per line.
pub fn format_sentences(sentences: &[&Sentence]) -> String {
    sentences
        .iter()
        .map(|s| format!("Sentence {}: {}", s.index + 1, s.text))
        .collect::<Vec<_>>()
        .join("\n")
}

fn sub_record(r: &ParsedRecord, key: &str) -> Option<ParsedRecord> {
    if let Some(v) = r.get(&[key.to_string()]) {
        return Some(ParsedRecord { value: v.clone() });
    }
    match r.value.as_object() {
        Some(obj) if obj.len() == 1 => match obj.values().next() {
            Some(v @ Value::Object(_)) => Some(ParsedRecord { value: v.clone() }),
            _ => None,
        },
        _ => None,
    }
}

fn path(key: &str) -> Vec<String> {
    vec![key.to_string()]
}

fn text_or_empty(r: &ParsedRecord, key: &str) -> String {
    r.text(&path(key)).unwrap_or_default()
}

/// Labels from an assignment reply, mapped through `resolve`. Unknown labels
/// and empty lists reject the reply; a sink listed next to real labels is
/// dropped.
fn assigned_labels(
    r: &ParsedRecord,
    id: &str,
    list_key: &str,
    sink: &str,
    resolve: impl Fn(&str) -> Option<String>,
) -> Result<(Vec<String>, String), String> {
    let entry = sub_record(r, id).ok_or_else(|| format!("no `{id}` object in reply"))?;
    let raw = entry.list(&path(list_key)).map_err(|e| e.to_string())?;
    let mut labels: Vec<String> = Vec::new();
    for l in &raw {
        let name = resolve(l).ok_or_else(|| format!("label `{l}` is not in the allowed list"))?;
        if !labels.contains(&name) {
            labels.push(name);
        }
    }
    if labels.is_empty() {
        return Err(format!("`{id}` has an empty {list_key} list"));
    }
    if labels.len() > 1 {
        labels.retain(|l| l != sink);
    }
    Ok((labels, text_or_empty(&entry, "reasoning")))
}

fn scored(r: &ParsedRecord, key: &str) -> Result<(Sentiment5, String), String> {
    let entry = sub_record(r, key)
        .filter(|e| e.get(&path("sentiment")).is_some())
        .unwrap_or_else(|| r.clone());
    let s = entry.sentiment(&path("sentiment")).map_err(|e| e.to_string())?;
    let reasoning = entry
        .text(&path("reasoning_sentiment"))
        .or_else(|_| entry.text(&path("reasoning")))
        .unwrap_or_default();
    Ok((s, reasoning))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractionRun {
    pub extractions: Vec<ReviewExtraction>,
    pub failures: Vec<ExtractionFailure>,
}

/// Runs the five prompting steps for a review inside one conversation, so
/// every step sees the full review and the earlier answers.
pub struct Extractor<'a> {
    client: &'a LlmClient,
    taxonomy: &'a Taxonomy,
    splitter: SentenceSplitter,
    config: ExtractionConfig,
}

impl<'a> Extractor<'a> {
    pub fn new(client: &'a LlmClient, taxonomy: &'a Taxonomy, config: ExtractionConfig) -> Self {
        Self { client, taxonomy, splitter: SentenceSplitter::default(), config }
    }

    pub fn with_splitter(mut self, splitter: SentenceSplitter) -> Self {
        self.splitter = splitter;
        self
    }

    /// Reviews are processed concurrently; output keeps input order.
    pub fn extract_all(&self, reviews: &[Review]) -> ExtractionRun {
        let results: Vec<_> = reviews.par_iter().map(|r| self.extract_review(r)).collect();
        let mut run = ExtractionRun::default();
        for r in results {
            match r {
                Ok(x) => run.extractions.push(x),
                Err(f) => {
                    log::warn!("{f}");
                    run.failures.push(f)
                }
            }
        }
        run
    }

    pub fn extract_review(&self, review: &Review) -> Result<ReviewExtraction, ExtractionFailure> {
        let id = review.review_id.as_str();
        let fail = |step: Step| {
            move |e: StepFailure| ExtractionFailure {
                review_id: id.to_string(),
                step,
                message: e.to_string(),
            }
        };
        let sentences = self.splitter.split(&review.text).map_err(|e| ExtractionFailure {
            review_id: id.to_string(),
            step: Step::Split,
            message: e.to_string(),
        })?;
        let seed = self.config.seed;
        let mut conv = Conversation::new(self.client, &self.config.model)
            .with_system(attribute_catalog_message(self.taxonomy, derive_seed(seed, id, "attributes", "")));
        let mut reasoning = Reasoning::default();

        let a3 = prompts::review_sentiment()
            .render_with(&[("review", &review.text)])
            .expect("A3 binds `review`");
        let spec = [
            FieldSpec::new(["sentiment"], FieldKind::Sentiment),
            FieldSpec::new(["reasoning"], FieldKind::Text),
        ];
        let (overall, why) = conv
            .ask(&a3, &spec, |r| scored(r, "sentiment"))
            .map_err(fail(Step::Overall))?;
        reasoning.overall = why;

        let mut by_attribute: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        let mut other_attribute_sentences = BTreeSet::new();
        for s in &sentences {
            let number = (s.index + 1).to_string();
            let key = format!("Sentence {number}");
            let prompt = prompts::sentence_attribute_assignment()
                .render_with(&[("sentence", &s.text), ("sentence_index", &number)])
                .expect("A4 bindings");
            let (labels, why) = conv
                .ask(&prompt, &[], |r| {
                    assigned_labels(r, &key, "attributes", OTHER_ATTRIBUTES, |l| {
                        self.taxonomy.resolve_attribute(l).map(str::to_string)
                    })
                })
                .map_err(fail(Step::AttributeAssignment))?;
            reasoning.sentence_attributes.insert(s.index, why);
            for l in labels {
                if l == OTHER_ATTRIBUTES {
                    other_attribute_sentences.insert(s.index);
                } else {
                    by_attribute.entry(l).or_default().insert(s.index);
                }
            }
        }

        let assigned: Vec<&str> = self
            .taxonomy
            .attribute_names()
            .filter(|a| by_attribute.contains_key(*a))
            .collect();
        let subset = |idx: &BTreeSet<usize>| -> Vec<&Sentence> {
            idx.iter().map(|&i| &sentences[i]).collect()
        };

        let mut attributes: BTreeMap<String, AttributeMention> = BTreeMap::new();
        for &attr in &assigned {
            let idx = &by_attribute[attr];
            let prompt = prompts::attribute_sentiment()
                .render_with(&[("attribute", attr), ("sentences", &format_sentences(&subset(idx)))])
                .expect("A5 bindings");
            let (sentiment, why) = conv
                .ask(&prompt, &[], |r| scored(r, attr))
                .map_err(fail(Step::AttributeSentiment))?;
            reasoning.attributes.insert(attr.to_string(), why);
            attributes.insert(
                attr.to_string(),
                AttributeMention {
                    sentiment,
                    sentence_indices: idx.clone(),
                    features: BTreeMap::new(),
                    other_feature_sentences: BTreeSet::new(),
                },
            );
        }

        let mut by_feature: BTreeMap<&str, BTreeMap<String, BTreeSet<usize>>> = BTreeMap::new();
        for &attr in &assigned {
            let features = self.taxonomy.features_of(attr).expect("assigned attributes exist");
            let listed = shuffled(features, derive_seed(seed, id, "features", attr));
            let listed = serde_json::to_string(&listed).expect("json");
            for &i in &by_attribute[attr] {
                let s = &sentences[i];
                let number = (i + 1).to_string();
                let key = format!("Sentence {number}");
                let prompt = prompts::sentence_feature_assignment()
                    .render_with(&[
                        ("review", &review.text),
                        ("sentence", &s.text),
                        ("sentence_index", &number),
                        ("attribute", attr),
                        ("features", &listed),
                    ])
                    .expect("A6 bindings");
                let (labels, why) = conv
                    .ask(&prompt, &[], |r| {
                        assigned_labels(r, &key, "features", OTHER_FEATURES, |l| {
                            self.taxonomy.resolve_feature(attr, l).map(str::to_string)
                        })
                    })
                    .map_err(fail(Step::FeatureAssignment))?;
                reasoning
                    .sentence_features
                    .entry(attr.to_string())
                    .or_default()
                    .insert(i, why);
                let mention = attributes.get_mut(attr).expect("scored above");
                for l in labels {
                    if l == OTHER_FEATURES {
                        mention.other_feature_sentences.insert(i);
                    } else {
                        by_feature.entry(attr).or_default().entry(l).or_default().insert(i);
                    }
                }
            }
        }

        for &attr in &assigned {
            let Some(feats) = by_feature.get(attr) else { continue };
            let ordered = self
                .taxonomy
                .features_of(attr)
                .expect("exists")
                .iter()
                .filter(|f| feats.contains_key(f.as_str()));
            for feature in ordered {
                let idx = &feats[feature];
                let prompt = prompts::feature_sentiment()
                    .render_with(&[("feature", feature), ("sentences", &format_sentences(&subset(idx)))])
                    .expect("A7 bindings");
                let (sentiment, why) = conv
                    .ask(&prompt, &[], |r| scored(r, feature))
                    .map_err(fail(Step::FeatureSentiment))?;
                reasoning
                    .features
                    .entry(attr.to_string())
                    .or_default()
                    .insert(feature.clone(), why);
                attributes
                    .get_mut(attr)
                    .expect("scored above")
                    .features
                    .insert(feature.clone(), FeatureMention { sentiment, sentence_indices: idx.clone() });
            }
        }

        Ok(ReviewExtraction {
            review_id: id.to_string(),
            overall,
            n_sentences: sentences.len(),
            attributes,
            other_attribute_sentences,
            reasoning,
        })
    }
}
