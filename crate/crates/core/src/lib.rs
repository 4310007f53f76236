//! Voice-of-customer review mining: taxonomy discovery, sentence-level
//! aspect sentiment extraction with an LLM, agreement statistics, rating
//! regressions, importance, perceptual maps and uplift simulation.

pub mod agreement;
pub mod analytics;
pub mod corpus;
pub mod extraction;
pub mod llm;
pub mod scalar;
pub mod sentiment;
pub mod taxonomy;
pub mod whatif;

pub use scalar::{Exact, Field, Real};
pub use sentiment::{to_3pt, Sentiment3, Sentiment5};

pub type FittedModelF64 = analytics::FittedModel<f64>;
pub type MentionStatsF64 = analytics::MentionStats<f64>;
pub type TrendSeriesF64 = analytics::TrendSeries<f64>;
pub type PerceptualMapF64 = analytics::PerceptualMap<f64>;
pub type ImpactReportF64 = whatif::ImpactReport<f64>;
pub type AgreementReportF64 = agreement::AgreementReport<f64>;
