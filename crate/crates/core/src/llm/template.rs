//! Prompt templates with `{{name}}` placeholders.
//!
//! Single braces are literal, so JSON output skeletons in the prompt bodies
//! need no escaping.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("template `{template}`: placeholder `{name}` is not bound")]
    Missing { template: String, name: String },
    #[error("template `{template}`: binding `{name}` matches no placeholder")]
    Unknown { template: String, name: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    pub required_placeholders: BTreeSet<String>,
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn pieces(body: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) if is_ident(&after[..close]) => {
                out.push(Piece::Text(&rest[..open]));
                out.push(Piece::Slot(&after[..close]));
                rest = &after[close + 2..];
            }
            _ => {
                out.push(Piece::Text(&rest[..open + 2]));
                rest = after;
            }
        }
    }
    out.push(Piece::Text(rest));
    out
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Self {
        let body = body.into();
        let required_placeholders = pieces(&body)
            .into_iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s.to_string()),
                Piece::Text(_) => None,
            })
            .collect();
        Self {
            name: name.into(),
            body,
            required_placeholders,
        }
    }

    /// Substitutes every placeholder verbatim. Every placeholder must be bound
    /// and every binding must name a placeholder.
    pub fn render<K, V>(&self, bindings: &BTreeMap<K, V>) -> Result<String, RenderError>
    where
        K: AsRef<str> + Ord,
        V: AsRef<str>,
    {
        let lookup: BTreeMap<&str, &str> = bindings
            .iter()
            .map(|(k, v)| (k.as_ref(), v.as_ref()))
            .collect();
        if let Some(name) = lookup
            .keys()
            .find(|k| !self.required_placeholders.contains(**k))
        {
            return Err(RenderError::Unknown {
                template: self.name.clone(),
                name: name.to_string(),
            });
        }
        let mut out = String::with_capacity(self.body.len());
        for piece in pieces(&self.body) {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(s) => match lookup.get(s) {
                    Some(v) => out.push_str(v),
                    None => {
                        return Err(RenderError::Missing {
                            template: self.name.clone(),
                            name: s.to_string(),
                        })
                    }
                },
            }
        }
        Ok(out)
    }

    /// Convenience form taking `(name, value)` pairs.
    pub fn render_with(&self, bindings: &[(&str, &str)]) -> Result<String, RenderError> {
        let map: BTreeMap<&str, &str> = bindings.iter().copied().collect();
        self.render(&map)
    }
}

macro_rules! builtin {
    ($fn_name:ident, $label:literal, $file:literal) => {
        pub fn $fn_name() -> PromptTemplate {
            PromptTemplate::new($label, include_str!(concat!("../../prompts/", $file)))
        }
    };
}

/// The seven pipeline prompts.
pub mod prompts {
    use super::PromptTemplate;

    builtin!(feature_discovery, "A1 feature discovery", "a1_feature_discovery.txt");
    builtin!(attribute_discovery, "A2 attribute discovery", "a2_attribute_discovery.txt");
    builtin!(review_sentiment, "A3 review sentiment", "a3_review_sentiment.txt");
    builtin!(
        sentence_attribute_assignment,
        "A4 sentence attribute assignment",
        "a4_sentence_attribute_assignment.txt"
    );
    builtin!(attribute_sentiment, "A5 attribute sentiment", "a5_attribute_sentiment.txt");
    builtin!(
        sentence_feature_assignment,
        "A6 sentence feature assignment",
        "a6_sentence_feature_assignment.txt"
    );
    builtin!(feature_sentiment, "A7 feature sentiment", "a7_feature_sentiment.txt");

    pub fn all() -> Vec<PromptTemplate> {
        vec![
            feature_discovery(),
            attribute_discovery(),
            review_sentiment(),
            sentence_attribute_assignment(),
            attribute_sentiment(),
            sentence_feature_assignment(),
            feature_sentiment(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_verbatim() {
        let t = PromptTemplate::new("t", "Hello {{x}}");
        assert_eq!(t.render_with(&[("x", "a")]).unwrap(), "Hello a");
        let t = PromptTemplate::new("t", "{ \"k\": {{x}} } {{x}}");
        assert_eq!(t.render_with(&[("x", "{{y}}")]).unwrap(), "{ \"k\": {{y}} } {{y}}");
    }

    #[test]
    fn unknown_binding_is_named() {
        let t = PromptTemplate::new("t", "Hello {{x}}");
        let err = t.render_with(&[("x", "a"), ("y", "b")]).unwrap_err();
        assert_eq!(
            err,
            RenderError::Unknown {
                template: "t".into(),
                name: "y".into()
            }
        );
        assert!(err.to_string().contains("`y`"));
    }

    #[test]
    fn missing_binding_is_named() {
        let t = PromptTemplate::new("t", "{{a}} and {{b}}");
        match t.render_with(&[("a", "1")]) {
            Err(RenderError::Missing { name, .. }) => assert_eq!(name, "b"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_identifier_braces_are_literal() {
        let t = PromptTemplate::new("t", "{{ not a slot }} {{ok}}");
        assert_eq!(t.required_placeholders.len(), 1);
        assert_eq!(t.render_with(&[("ok", "!")]).unwrap(), "{{ not a slot }} !");
    }

    #[test]
    fn builtin_placeholders() {
        let names = |t: PromptTemplate| t.required_placeholders.into_iter().collect::<Vec<_>>();
        assert_eq!(names(prompts::review_sentiment()), vec!["review"]);
        assert_eq!(
            names(prompts::sentence_feature_assignment()),
            vec!["attribute", "features", "review", "sentence", "sentence_index"]
        );
        assert_eq!(names(prompts::feature_sentiment()), vec!["feature", "sentences"]);
    }

    #[test]
    fn review_sentiment_prompt_mentions_question() {
        let out = prompts::review_sentiment()
            .render_with(&[("review", "Great coffee. Slow line.")])
            .unwrap();
        assert!(out.contains("What is the overall sentiment the customer has"));
        assert!(out.contains("Great coffee. Slow line."));
    }
}
