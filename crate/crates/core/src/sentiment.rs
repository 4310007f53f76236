//! Five-point sentiment scale and its three-class collapse.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Ordinal sentiment, Strongly Negative (1) to Strongly Positive (5).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sentiment5 {
    StronglyNegative = 1,
    Negative = 2,
    Neutral = 3,
    Positive = 4,
    StronglyPositive = 5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment3 {
    Negative,
    Neutral,
    Positive,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SentimentError {
    #[error("sentiment label `{0}` is not one of Strongly Negative, Negative, Neutral, Positive, Strongly Positive")]
    Label(String),
    #[error("sentiment score {0} outside 1..=5")]
    Score(i64),
}

impl Sentiment5 {
    pub const ALL: [Sentiment5; 5] = [
        Sentiment5::StronglyNegative,
        Sentiment5::Negative,
        Sentiment5::Neutral,
        Sentiment5::Positive,
        Sentiment5::StronglyPositive,
    ];

    pub fn score(self) -> u8 {
        self as u8
    }

    pub fn from_score(score: i64) -> Result<Self, SentimentError> {
        match score {
            1 => Ok(Self::StronglyNegative),
            2 => Ok(Self::Negative),
            3 => Ok(Self::Neutral),
            4 => Ok(Self::Positive),
            5 => Ok(Self::StronglyPositive),
            other => Err(SentimentError::Score(other)),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::StronglyNegative => "Strongly Negative",
            Self::Negative => "Negative",
            Self::Neutral => "Neutral",
            Self::Positive => "Positive",
            Self::StronglyPositive => "Strongly Positive",
        }
    }

    /// Case-insensitive label lookup; inner whitespace runs are collapsed.
    pub fn from_label(label: &str) -> Result<Self, SentimentError> {
        let norm = label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        Self::ALL
            .into_iter()
            .find(|s| s.label().to_lowercase() == norm)
            .ok_or_else(|| SentimentError::Label(label.to_string()))
    }

    /// Collapse to three classes: 1–2 negative, 3 neutral, 4–5 positive.
    pub fn to_3pt(self) -> Sentiment3 {
        match self {
            Self::StronglyNegative | Self::Negative => Sentiment3::Negative,
            Self::Neutral => Sentiment3::Neutral,
            Self::Positive | Self::StronglyPositive => Sentiment3::Positive,
        }
    }
}

impl fmt::Display for Sentiment5 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Sentiment5 {
    type Err = SentimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_label(s)
    }
}

impl Serialize for Sentiment5 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.score())
    }
}

impl<'de> Deserialize<'de> for Sentiment5 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Self::from_score(v).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Sentiment3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Negative => "negative",
            Self::Neutral => "neutral",
            Self::Positive => "positive",
        })
    }
}

/// Free-function form of [`Sentiment5::to_3pt`].
pub fn to_3pt(s: Sentiment5) -> Sentiment3 {
    s.to_3pt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapse() {
        assert_eq!(to_3pt(Sentiment5::StronglyNegative), Sentiment3::Negative);
        assert_eq!(to_3pt(Sentiment5::Negative), Sentiment3::Negative);
        assert_eq!(to_3pt(Sentiment5::Neutral), Sentiment3::Neutral);
        assert_eq!(to_3pt(Sentiment5::Positive), Sentiment3::Positive);
        assert_eq!(to_3pt(Sentiment5::StronglyPositive), Sentiment3::Positive);
    }

    #[test]
    fn labels_are_bijective_and_ordered() {
        for (i, s) in Sentiment5::ALL.iter().enumerate() {
            assert_eq!(s.score() as usize, i + 1);
            assert_eq!(Sentiment5::from_label(s.label()).unwrap(), *s);
            assert_eq!(Sentiment5::from_score(s.score() as i64).unwrap(), *s);
        }
        assert!(Sentiment5::ALL.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(Sentiment5::from_label("  strongly   POSITIVE ").unwrap(), Sentiment5::StronglyPositive);
        assert!(Sentiment5::from_label("very good").is_err());
        assert!(Sentiment5::from_score(0).is_err());
    }

    #[test]
    fn serde_uses_scores() {
        assert_eq!(serde_json::to_string(&Sentiment5::Positive).unwrap(), "4");
        assert_eq!(serde_json::from_str::<Sentiment5>("2").unwrap(), Sentiment5::Negative);
        assert!(serde_json::from_str::<Sentiment5>("6").is_err());
    }
}
