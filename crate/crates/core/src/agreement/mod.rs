//! Reliability statistics for comparing annotation sources.

mod alpha;
mod bootstrap;
mod compare;
mod correlation;
mod ks;

pub use alpha::{krippendorff_alpha, raw_agreement, AlphaResult, ReliabilityData};
pub use bootstrap::{bootstrap_ci, BootstrapConfig, Estimate, Interval, DEFAULT_RESAMPLES};
pub use compare::{agreement_report, compare_variants, AgreementReport, ComparisonTable, Scale, VariantReport};
pub use correlation::{average_ranks, correlations, pearson, spearman, Correlations};
pub use ks::{kolmogorov_q, ks_test, KsResult};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("shape: {0}")]
    Shape(String),
    #[error("no unit carries two or more labels")]
    NoPairableUnits,
    #[error("correlation undefined for a constant vector")]
    ZeroVariance,
    #[error("variant `{variant}` does not cover the gold reviews (missing {missing:?}, unexpected {unexpected:?})")]
    Coverage {
        variant: String,
        missing: Vec<String>,
        unexpected: Vec<String>,
    },
}
