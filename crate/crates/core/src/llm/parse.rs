//! Extraction of the JSON object embedded in a model reply.

use serde_json::Value;
use thiserror::Error;

use crate::sentiment::{Sentiment5, SentimentError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no JSON object found in response")]
    NoObject,
    #[error("field `{0}` missing from response")]
    MissingField(String),
    #[error("field `{field}` has the wrong type: expected {expected}")]
    WrongType { field: String, expected: &'static str },
    #[error("field `{field}`: {source}")]
    Label {
        field: String,
        #[source]
        source: SentimentError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Text,
    Sentiment,
    StringList,
}

/// A required field, addressed by a path of object keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    pub path: Vec<String>,
    pub kind: FieldKind,
}

impl FieldSpec {
    pub fn new<S: Into<String>>(path: impl IntoIterator<Item = S>, kind: FieldKind) -> Self {
        Self {
            path: path.into_iter().map(Into::into).collect(),
            kind,
        }
    }

    fn dotted(&self) -> String {
        self.path.join(".")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRecord {
    pub value: Value,
}

/// Key lookup: exact match first, then case-insensitive.
fn get_key<'a>(v: &'a Value, key: &str) -> Option<&'a Value> {
    let obj = v.as_object()?;
    obj.get(key).or_else(|| {
        obj.iter()
            .find(|(k, _)| k.trim().eq_ignore_ascii_case(key.trim()))
            .map(|(_, v)| v)
    })
}

impl ParsedRecord {
    pub fn get(&self, path: &[String]) -> Option<&Value> {
        path.iter().try_fold(&self.value, |v, k| get_key(v, k))
    }

    fn field(&self, path: &[String]) -> Result<&Value, ParseError> {
        self.get(path)
            .ok_or_else(|| ParseError::MissingField(path.join(".")))
    }

    pub fn text(&self, path: &[String]) -> Result<String, ParseError> {
        match self.field(path)? {
            Value::String(s) => Ok(s.clone()),
            _ => Err(ParseError::WrongType {
                field: path.join("."),
                expected: "string",
            }),
        }
    }

    pub fn sentiment(&self, path: &[String]) -> Result<Sentiment5, ParseError> {
        let raw = match self.field(path)? {
            Value::String(s) => s.clone(),
            _ => {
                return Err(ParseError::WrongType {
                    field: path.join("."),
                    expected: "sentiment label",
                })
            }
        };
        Sentiment5::from_label(&raw).map_err(|source| ParseError::Label {
            field: path.join("."),
            source,
        })
    }

    pub fn list(&self, path: &[String]) -> Result<Vec<String>, ParseError> {
        match self.field(path)? {
            Value::Array(items) => items
                .iter()
                .map(|i| match i {
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(ParseError::WrongType {
                        field: path.join("."),
                        expected: "list of strings",
                    }),
                })
                .collect(),
            Value::String(s) => Ok(vec![s.clone()]),
            _ => Err(ParseError::WrongType {
                field: path.join("."),
                expected: "list of strings",
            }),
        }
    }
}

/// Drops commas that directly precede a closing bracket, outside strings.
/// The prompt skeletons themselves end entries with such commas.
fn strip_trailing_commas(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut in_str = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_str {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        if c == '"' {
            in_str = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

fn first_object(text: &str) -> Option<Value> {
    for (start, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        if let Some(Ok(v @ Value::Object(_))) = stream.next() {
            return Some(v);
        }
    }
    None
}

/// Finds the first well-formed JSON object in `response_text` (prose and code
/// fences around it are ignored) and checks that `expected` fields exist with
/// the right shape. Sentiment fields must carry one of the five scale labels.
pub fn parse_structured(
    response_text: &str,
    expected: &[FieldSpec],
) -> Result<ParsedRecord, ParseError> {
    let value = first_object(response_text)
        .or_else(|| first_object(&strip_trailing_commas(response_text)))
        .ok_or(ParseError::NoObject)?;
    let record = ParsedRecord { value };
    for spec in expected {
        match spec.kind {
            FieldKind::Text => {
                record.text(&spec.path)?;
            }
            FieldKind::Sentiment => {
                record.sentiment(&spec.path)?;
            }
            FieldKind::StringList => {
                record.list(&spec.path)?;
            }
        }
        debug_assert!(!spec.dotted().is_empty());
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentiment_spec() -> Vec<FieldSpec> {
        vec![
            FieldSpec::new(["sentiment"], FieldKind::Sentiment),
            FieldSpec::new(["reasoning"], FieldKind::Text),
        ]
    }

    #[test]
    fn bare_object() {
        let r = parse_structured(
            r#"{"sentiment":"Positive","reasoning":"liked it"}"#,
            &sentiment_spec(),
        )
        .unwrap();
        assert_eq!(r.sentiment(&["sentiment".into()]).unwrap(), Sentiment5::Positive);
    }

    #[test]
    fn fenced_object_after_prose_parses_the_same() {
        let bare = r#"{"sentiment":"Positive","reasoning":"liked it"}"#;
        let fenced = format!("Sure! Here is my answer:\n```json\n{bare}\n```\nHope this helps.");
        assert_eq!(
            parse_structured(&fenced, &sentiment_spec()).unwrap(),
            parse_structured(bare, &sentiment_spec()).unwrap()
        );
    }

    #[test]
    fn label_outside_scale() {
        let err = parse_structured(
            r#"{"sentiment":"very good","reasoning":""}"#,
            &sentiment_spec(),
        )
        .unwrap_err();
        assert!(matches!(err, ParseError::Label { .. }));
    }

    #[test]
    fn missing_field_is_named() {
        let err = parse_structured(r#"{"sentiment":"Neutral"}"#, &sentiment_spec()).unwrap_err();
        assert_eq!(err, ParseError::MissingField("reasoning".into()));
    }

    #[test]
    fn no_object() {
        assert_eq!(
            parse_structured("I cannot answer that.", &[]).unwrap_err(),
            ParseError::NoObject
        );
        assert_eq!(
            parse_structured(r#"{"truncated": "resp"#, &[]).unwrap_err(),
            ParseError::NoObject
        );
    }

    #[test]
    fn skeleton_trailing_commas_are_tolerated() {
        let text = r#"{
    "Sentence 2": {
        "sentence": "Great coffee, slow line.",
        "reasoning": "mentions drinks and wait",
        "attributes": ["Coffee & Beverage", "Customer Service",],
    }
}"#;
        let spec = [FieldSpec::new(["Sentence 2", "attributes"], FieldKind::StringList)];
        let r = parse_structured(text, &spec).unwrap();
        assert_eq!(
            r.list(&spec[0].path).unwrap(),
            vec!["Coffee & Beverage", "Customer Service"]
        );
    }

    #[test]
    fn case_insensitive_keys_and_labels() {
        let r = parse_structured(
            r#"{"Sentiment": "strongly negative", "Reasoning": "x"}"#,
            &sentiment_spec(),
        )
        .unwrap();
        assert_eq!(
            r.sentiment(&["sentiment".into()]).unwrap(),
            Sentiment5::StronglyNegative
        );
    }

    #[test]
    fn skips_braces_in_prose() {
        let r = parse_structured(
            "Format {like this} then {\"sentiment\":\"Neutral\",\"reasoning\":\"meh\"}",
            &sentiment_spec(),
        )
        .unwrap();
        assert_eq!(r.sentiment(&["sentiment".into()]).unwrap(), Sentiment5::Neutral);
    }
}
