//! Offline backends: a scripted responder for tests and a keyword lexicon
//! responder that answers all seven pipeline prompts deterministically.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{prompt_hash, Backend, BackendError, BackendReply, LlmRequest};
use crate::sentiment::Sentiment5;

enum Matcher {
    Hash(String),
    Contains(Vec<String>),
}

struct Rule {
    matcher: Matcher,
    reply: String,
}

/// Replies chosen by rules over the last user message, first match wins.
#[derive(Default)]
pub struct ScriptedBackend {
    rules: Vec<Rule>,
    fallback: Option<String>,
    fail_first: u32,
    failures: AtomicU32,
    calls: AtomicUsize,
    seen: Mutex<Vec<LlmRequest>>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on_hash(mut self, hash: impl Into<String>, reply: impl Into<String>) -> Self {
        self.rules.push(Rule { matcher: Matcher::Hash(hash.into()), reply: reply.into() });
        self
    }

    pub fn on_contains(self, needle: impl Into<String>, reply: impl Into<String>) -> Self {
        self.on_all([needle.into()], reply)
    }

    /// Matches when every needle occurs in the prompt.
    pub fn on_all<S: Into<String>>(
        mut self,
        needles: impl IntoIterator<Item = S>,
        reply: impl Into<String>,
    ) -> Self {
        let needles = needles.into_iter().map(Into::into).collect();
        self.rules.push(Rule { matcher: Matcher::Contains(needles), reply: reply.into() });
        self
    }

    pub fn fallback(mut self, reply: impl Into<String>) -> Self {
        self.fallback = Some(reply.into());
        self
    }

    /// The first `n` sends fail with a transport error.
    pub fn fail_first(mut self, n: u32) -> Self {
        self.fail_first = n;
        self
    }

    /// Number of sends that reached this backend.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<LlmRequest> {
        self.seen.lock().expect("mock log").clone()
    }
}

impl Backend for ScriptedBackend {
    fn send(&self, request: &LlmRequest) -> Result<BackendReply, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.seen.lock().expect("mock log").push(request.clone());
        if self.failures.fetch_add(1, Ordering::SeqCst) < self.fail_first {
            return Err(BackendError::Transport("scripted failure".into()));
        }
        let prompt = request.last_user();
        let hash = prompt_hash(prompt);
        self.rules
            .iter()
            .find(|r| match &r.matcher {
                Matcher::Hash(h) => *h == hash,
                Matcher::Contains(ns) => ns.iter().all(|n| prompt.contains(n.as_str())),
            })
            .map(|r| r.reply.clone())
            .or_else(|| self.fallback.clone())
            .map(BackendReply::text)
            .ok_or_else(|| BackendError::Fatal(format!("no scripted reply for prompt {hash}")))
    }
}

/// Keyword tables for [`LexiconBackend`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    pub negators: Vec<String>,
    pub intensifiers: Vec<String>,
    /// Attribute name to trigger phrases.
    pub attributes: BTreeMap<String, Vec<String>>,
    /// Attribute name to feature name to trigger phrases.
    pub features: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

impl Lexicon {
    pub fn coffee_shop() -> Self {
        serde_json::from_str(include_str!("../../data/coffee_lexicon.json"))
            .expect("bundled lexicon parses")
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn padded(text: &str) -> String {
    format!(" {} ", tokens(text).join(" "))
}

fn mentions(padded_text: &str, phrases: &[String]) -> bool {
    phrases.iter().any(|p| {
        let p = tokens(p).join(" ");
        padded_text.contains(&format!(" {p} ")) || padded_text.contains(&format!(" {p}s "))
    })
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    let len = text[from..].find(end)?;
    Some(&text[from..from + len])
}

const RULE: &str = "---------------------";

/// Answers pipeline prompts from keyword hits; stands in for a live model in
/// demos and determinism tests.
pub struct LexiconBackend {
    lexicon: Lexicon,
}

impl LexiconBackend {
    pub fn new(lexicon: Lexicon) -> Self {
        Self { lexicon }
    }

    pub fn score(&self, text: &str) -> Sentiment5 {
        let toks = tokens(text);
        let lx = &self.lexicon;
        let has = |list: &[String], t: &str| list.iter().any(|w| w == t);
        let mut net = 0i64;
        for (i, t) in toks.iter().enumerate() {
            let polarity = if has(&lx.positive, t) {
                1
            } else if has(&lx.negative, t) {
                -1
            } else {
                continue;
            };
            let window = &toks[i.saturating_sub(3)..i];
            let negated = window.iter().any(|w| has(&lx.negators, w) || w.ends_with("n't"));
            let weight = if i > 0 && has(&lx.intensifiers, &toks[i - 1]) { 2 } else { 1 };
            net += if negated { -polarity } else { polarity } * weight;
        }
        match net {
            n if n >= 2 => Sentiment5::StronglyPositive,
            1 => Sentiment5::Positive,
            0 => Sentiment5::Neutral,
            -1 => Sentiment5::Negative,
            _ => Sentiment5::StronglyNegative,
        }
    }

    fn attributes_of(&self, sentence: &str) -> Vec<String> {
        let p = padded(sentence);
        self.lexicon
            .attributes
            .iter()
            .filter(|(_, kws)| mentions(&p, kws))
            .map(|(a, _)| a.clone())
            .collect()
    }

    fn features_of(&self, attribute: &str, sentence: &str, allowed: &[String]) -> Vec<String> {
        let p = padded(sentence);
        self.lexicon
            .features
            .get(attribute)
            .into_iter()
            .flatten()
            .filter(|(f, kws)| allowed.contains(f) && mentions(&p, kws))
            .map(|(f, _)| f.clone())
            .collect()
    }

    fn sentiment_reply(&self, key: Option<&str>, text: &str) -> Value {
        let s = self.score(text);
        let body = json!({
            "reasoning_sentiment": format!("keyword balance suggests {}", s.label()),
            "sentiment": s.label(),
        });
        match key {
            Some(k) => json!({ k: body }),
            None => json!({
                "reasoning": format!("keyword balance suggests {}", s.label()),
                "sentiment": s.label(),
            }),
        }
    }

    fn respond(&self, prompt: &str) -> Option<Value> {
        if prompt.contains("Task: Review Sentiment Classification") {
            let review = between(prompt, &format!("Review\n{RULE}\n"), &format!("\n{RULE}\nInstructions"))?;
            return Some(self.sentiment_reply(None, review));
        }
        if prompt.contains("Task: Sentence Attribute Assignment") {
            let sentence = between(prompt, &format!("Review Sentence\n{RULE}\n"), &format!("\n{RULE}\nTask Details"))?;
            let id = sentence_id(prompt)?;
            let mut attrs = self.attributes_of(sentence);
            if attrs.is_empty() {
                attrs.push("Other Attributes".into());
            }
            return Some(json!({ id: {
                "sentence": sentence,
                "reasoning": "keyword match",
                "attributes": attrs,
            }}));
        }
        if prompt.contains("Task: Sentence Feature Assignment") {
            let sentence = between(prompt, &format!("\nReview Sentence\n{RULE}\n"), &format!("\n{RULE}\nTask Details"))?;
            let attribute = between(prompt, "features associated with the attribute ", ". Constrain")?;
            let list = between(prompt, "Constrain your selection only to these: ", "\n")?;
            let allowed: Vec<String> = serde_json::from_str(list).ok()?;
            let id = sentence_id(prompt)?;
            let mut feats = self.features_of(attribute, sentence, &allowed);
            if feats.is_empty() {
                feats.push("Other Features".into());
            }
            return Some(json!({ id: {
                "sentence": sentence,
                "reasoning": "keyword match",
                "features": feats,
            }}));
        }
        for (task, kind) in [
            ("Task: Sentence Attribute Sentiment Classification", "attribute"),
            ("Task: Sentence Feature Sentiment Classification", "feature"),
        ] {
            if prompt.contains(task) {
                let name = between(prompt, &format!("present the {kind} \""), "\"")?;
                let text = between(
                    prompt,
                    &format!("associated with the {kind} \"{name}\":\n\n"),
                    "\n\nHow would you rate",
                )?;
                return Some(self.sentiment_reply(Some(name), text));
            }
        }
        if prompt.starts_with("Reviews:\n") {
            let reviews = padded(between(prompt, "Reviews:\n", "\n\nInstruction:")?);
            let lx = &self.lexicon;
            if prompt.contains("identify the features") {
                let mut found: Vec<&String> = lx
                    .features
                    .values()
                    .flatten()
                    .filter(|(_, kws)| mentions(&reviews, kws))
                    .map(|(f, _)| f)
                    .collect();
                found.sort();
                found.dedup();
                return Some(json!({ "features": found }));
            }
            let found: Vec<&String> = lx
                .attributes
                .iter()
                .filter(|(_, kws)| mentions(&reviews, kws))
                .map(|(a, _)| a)
                .collect();
            return Some(json!({ "attributes": found }));
        }
        None
    }
}

fn sentence_id(prompt: &str) -> Option<String> {
    let at = prompt.rfind("\"Sentence ")?;
    let rest = &prompt[at + 1..];
    Some(rest[..rest.find('"')?].to_string())
}

impl Backend for LexiconBackend {
    fn send(&self, request: &LlmRequest) -> Result<BackendReply, BackendError> {
        let prompt = request.last_user();
        let reply = self
            .respond(prompt)
            .ok_or_else(|| BackendError::Fatal("lexicon backend: unrecognized prompt".into()))?;
        let text = serde_json::to_string_pretty(&reply).expect("json");
        Ok(BackendReply {
            prompt_tokens: request.messages.iter().map(|m| tokens(&m.content).len() as u64).sum(),
            completion_tokens: tokens(&text).len() as u64,
            text,
            truncated: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicon_scores() {
        let b = LexiconBackend::new(Lexicon::coffee_shop());
        assert_eq!(b.score("The coffee was great"), Sentiment5::Positive);
        assert_eq!(b.score("The coffee was not great"), Sentiment5::Negative);
        assert_eq!(b.score("Very rude and slow staff"), Sentiment5::StronglyNegative);
        assert_eq!(b.score("I ordered a latte"), Sentiment5::Neutral);
    }

    #[test]
    fn unknown_prompt_is_fatal() {
        let b = LexiconBackend::new(Lexicon::coffee_shop());
        assert!(b.send(&LlmRequest::prompt("m", "hello")).is_err());
    }

    #[test]
    fn unmatched_script_is_fatal() {
        let b = ScriptedBackend::new().on_contains("a", "b");
        assert!(matches!(b.send(&LlmRequest::prompt("m", "zzz")), Err(BackendError::Fatal(_))));
    }
}
