//! Rule-based sentence splitter.
//!
//! A run of terminators (`.`, `!`, `?`, `…`), plus any closing quotes or
//! brackets directly after it, ends a sentence when it is followed by the end
//! of the text, or by whitespace and then a character that is not a lowercase
//! letter. A lone `.` that closes a protected abbreviation never ends a
//! sentence. Decimal points are never followed by whitespace, so they never
//! qualify.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_ABBREVIATIONS: &str = include_str!("../../data/abbreviations.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SentenceError {
    #[error("cannot split empty or whitespace-only text")]
    EmptyInput,
}

#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::from_list(DEFAULT_ABBREVIATIONS)
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '”' | '’' | '»')
}

impl SentenceSplitter {
    /// Parses an abbreviation list: one token per line, `#` comments allowed.
    pub fn from_list(list: &str) -> Self {
        let abbreviations = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { abbreviations }
    }

    pub fn with_abbreviation(mut self, token: &str) -> Self {
        self.abbreviations.insert(token.trim().to_lowercase());
        self
    }

    fn protects(&self, chars: &[(usize, char)], dot: usize) -> bool {
        let mut start = dot;
        while start > 0 && !chars[start - 1].1.is_whitespace() {
            start -= 1;
        }
        let token: String = chars[start..=dot]
            .iter()
            .map(|&(_, c)| c)
            .collect::<String>()
            .trim_start_matches(['(', '"', '“'])
            .to_lowercase();
        self.abbreviations.contains(&token)
    }

    pub fn split(&self, text: &str) -> Result<Vec<Sentence>, SentenceError> {
        if text.trim().is_empty() {
            return Err(SentenceError::EmptyInput);
        }
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let n = chars.len();
        let byte_at = |k: usize| if k < n { chars[k].0 } else { text.len() };

        let mut pieces: Vec<&str> = Vec::new();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < n {
            if !is_terminator(chars[i].1) {
                i += 1;
                continue;
            }
            let mut j = i;
            while j < n && is_terminator(chars[j].1) {
                j += 1;
            }
            let mut k = j;
            while k < n && is_closer(chars[k].1) {
                k += 1;
            }
            let mut boundary = if k == n {
                true
            } else if chars[k].1.is_whitespace() {
                let mut m = k;
                while m < n && chars[m].1.is_whitespace() {
                    m += 1;
                }
                m == n || !chars[m].1.is_lowercase()
            } else {
                false
            };
            if boundary && j == i + 1 && chars[i].1 == '.' && self.protects(&chars, i) {
                boundary = false;
            }
            if boundary {
                pieces.push(&text[byte_at(start)..byte_at(k)]);
                start = k;
            }
            i = k.max(i + 1);
        }
        if start < n {
            pieces.push(&text[byte_at(start)..]);
        }
        Ok(pieces
            .into_iter()
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .enumerate()
            .map(|(index, t)| Sentence {
                index,
                text: t.to_string(),
            })
            .collect())
    }
}

/// Splits with the default abbreviation list.
pub fn split_sentences(text: &str) -> Result<Vec<Sentence>, SentenceError> {
    SentenceSplitter::default().split(text)
}
