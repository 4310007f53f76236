use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{
    krippendorff_alpha, ks_test, raw_agreement, AgreementError, BootstrapConfig, Estimate, KsResult,
    ReliabilityData,
};
use crate::extraction::ReviewExtraction;
use crate::scalar::Real;
use crate::sentiment::Sentiment5;
use crate::taxonomy::{Item, Level, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "5")]
    Five,
}

impl Scale {
    fn code(self, s: Sentiment5) -> u8 {
        match self {
            Self::Five => s.score(),
            Self::Three => s.to_3pt() as u8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport<T> {
    pub raw_agreement: Estimate<T>,
    pub alpha: Estimate<T>,
    pub alpha_degenerate: bool,
    pub n_units: usize,
    pub n_comparable: usize,
}

/// Raw agreement and alpha between two complete label vectors over the same
/// units.
pub fn agreement_report<T: Real, L: Ord + Clone + Sync>(
    a: &[L],
    b: &[L],
    config: &BootstrapConfig,
) -> Result<AgreementReport<T>, AgreementError> {
    let raw = raw_agreement(a, b, config)?;
    let alpha = krippendorff_alpha(&ReliabilityData::from_pair(a, b)?, config)?;
    Ok(AgreementReport {
        raw_agreement: raw,
        alpha: alpha.estimate,
        alpha_degenerate: alpha.degenerate,
        n_units: a.len(),
        n_comparable: alpha.n_pairable,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport<T> {
    pub variant: String,
    /// Binary mention labels over every review × item cell.
    pub mention: AgreementReport<T>,
    /// Sentiment labels over cells both sources mention; absent when there
    /// are none.
    pub sentiment: Option<AgreementReport<T>>,
    /// Per-review mention counts, gold against variant.
    pub mention_counts: KsResult<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable<T> {
    pub level: Level,
    pub scale: Scale,
    pub n_reviews: usize,
    pub rows: Vec<VariantReport<T>>,
}

impl<T: Real> ComparisonTable<T> {
    /// Variant names by descending mention alpha; ties keep name order.
    pub fn ranked_by_alpha(&self) -> Vec<&str> {
        let mut rows: Vec<&VariantReport<T>> = self.rows.iter().collect();
        rows.sort_by(|a, b| b.mention.alpha.value.partial_cmp(&a.mention.alpha.value).expect("no NaN"));
        rows.into_iter().map(|r| r.variant.as_str()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<24} {:>22} {:>22} {:>22} {:>22} {:>8}",
            "variant", "mention raw [95% CI]", "mention alpha", "sentiment raw", "sentiment alpha", "KS p"
        );
        let cell = |e: &Estimate<T>| {
            format!("{:.3} [{:.3}, {:.3}]", e.value.as_f64(), e.ci.lower.as_f64(), e.ci.upper.as_f64())
        };
        for r in &self.rows {
            let (sr, sa) = match &r.sentiment {
                Some(s) => (cell(&s.raw_agreement), cell(&s.alpha)),
                None => ("n/a".into(), "n/a".into()),
            };
            let _ = writeln!(
                out,
                "{:<24} {:>22} {:>22} {:>22} {:>22} {:>8.3}",
                r.variant,
                cell(&r.mention.raw_agreement),
                cell(&r.mention.alpha),
                sr,
                sa,
                r.mention_counts.p_value.as_f64()
            );
        }
        out
    }
}

fn by_id(xs: &[ReviewExtraction]) -> BTreeMap<&str, &ReviewExtraction> {
    xs.iter().map(|x| (x.review_id.as_str(), x)).collect()
}

/// Scores each variant run against the gold annotations, cell by cell.
pub fn compare_variants<T: Real>(
    runs: &BTreeMap<String, Vec<ReviewExtraction>>,
    gold: &[ReviewExtraction],
    taxonomy: &Taxonomy,
    level: Level,
    scale: Scale,
    config: &BootstrapConfig,
) -> Result<ComparisonTable<T>, AgreementError> {
    let gold_ix = by_id(gold);
    let ids: BTreeSet<&str> = gold_ix.keys().copied().collect();
    let items: Vec<Item> = taxonomy.items(level);
    let mut rows = Vec::new();
    for (variant, run) in runs {
        let run_ix = by_id(run);
        let got: BTreeSet<&str> = run_ix.keys().copied().collect();
        if got != ids {
            return Err(AgreementError::Coverage {
                variant: variant.clone(),
                missing: ids.difference(&got).map(|s| s.to_string()).collect(),
                unexpected: got.difference(&ids).map(|s| s.to_string()).collect(),
            });
        }
        let (mut gm, mut vm) = (Vec::new(), Vec::new());
        let (mut gs, mut vs) = (Vec::new(), Vec::new());
        let (mut gcount, mut vcount) = (Vec::new(), Vec::new());
        for id in &ids {
            let (g, v) = (gold_ix[id], run_ix[id]);
            let (mut gc, mut vc) = (0u32, 0u32);
            for item in &items {
                let (a, b) = (g.item_sentiment(item), v.item_sentiment(item));
                gm.push(a.is_some());
                vm.push(b.is_some());
                gc += a.is_some() as u32;
                vc += b.is_some() as u32;
                if let (Some(a), Some(b)) = (a, b) {
                    gs.push(scale.code(a));
                    vs.push(scale.code(b));
                }
            }
            gcount.push(gc);
            vcount.push(vc);
        }
        let sentiment = if gs.is_empty() { None } else { Some(agreement_report(&gs, &vs, config)?) };
        rows.push(VariantReport {
            variant: variant.clone(),
            mention: agreement_report(&gm, &vm, config)?,
            sentiment,
            mention_counts: ks_test(&gcount, &vcount)?,
        });
    }
    Ok(ComparisonTable { level, scale, n_reviews: ids.len(), rows })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::extraction::{AttributeMention, Reasoning};

    fn x(id: &str, attrs: &[(&str, u8)]) -> ReviewExtraction {
        ReviewExtraction {
            review_id: id.into(),
            overall: Sentiment5::Neutral,
            n_sentences: 1,
            attributes: attrs
                .iter()
                .map(|(a, s)| {
                    (
                        a.to_string(),
                        AttributeMention {
                            sentiment: Sentiment5::from_score(*s as i64).unwrap(),
                            sentence_indices: BTreeSet::from([0]),
                            features: Default::default(),
                            other_feature_sentences: Default::default(),
                        },
                    )
                })
                .collect(),
            other_attribute_sentences: BTreeSet::new(),
            reasoning: Reasoning::default(),
        }
    }

    fn gold() -> Vec<ReviewExtraction> {
        vec![
            x("r1", &[("Customer Service", 1), ("Coffee & Beverage", 5)]),
            x("r2", &[("Coffee & Beverage", 4)]),
            x("r3", &[("Food & Pastry", 2)]),
        ]
    }

    fn cfg() -> BootstrapConfig {
        BootstrapConfig { resamples: 100, ..Default::default() }
    }

    #[test]
    fn identical_variant_agrees_fully() {
        let runs = BTreeMap::from([("same".to_string(), gold())]);
        let t = compare_variants::<f64>(&runs, &gold(), &Taxonomy::coffee_shop(), Level::Attribute, Scale::Five, &cfg()).unwrap();
        let r = &t.rows[0];
        assert_eq!(r.mention.raw_agreement.value, 1.0);
        assert_eq!(r.mention.alpha.value, 1.0);
        assert_eq!(r.sentiment.unwrap().alpha.value, 1.0);
        assert_eq!(r.mention.n_units, 30);
    }

    #[test]
    fn flipped_mentions_disagree_everywhere() {
        let t = Taxonomy::coffee_shop();
        let names: Vec<&str> = t.attribute_names().collect();
        let flipped: Vec<ReviewExtraction> = gold()
            .iter()
            .map(|g| {
                let attrs: Vec<(&str, u8)> = names.iter().filter(|n| !g.mentions(n)).map(|n| (*n, 3)).collect();
                x(&g.review_id, &attrs)
            })
            .collect();
        let runs = BTreeMap::from([("flip".to_string(), flipped)]);
        let table = compare_variants::<f64>(&runs, &gold(), &t, Level::Attribute, Scale::Three, &cfg()).unwrap();
        assert_eq!(table.rows[0].mention.raw_agreement.value, 0.0);
        assert!(table.rows[0].sentiment.is_none());
    }

    #[test]
    fn coverage_mismatch_lists_ids() {
        let runs = BTreeMap::from([("short".to_string(), gold()[..2].to_vec())]);
        match compare_variants::<f64>(&runs, &gold(), &Taxonomy::coffee_shop(), Level::Attribute, Scale::Five, &cfg()) {
            Err(AgreementError::Coverage { missing, .. }) => assert_eq!(missing, ["r3"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn three_point_scale_forgives_intensity() {
        let near = vec![
            x("r1", &[("Customer Service", 2), ("Coffee & Beverage", 4)]),
            x("r2", &[("Coffee & Beverage", 5)]),
            x("r3", &[("Food & Pastry", 1)]),
        ];
        let runs = BTreeMap::from([("near".to_string(), near)]);
        let t = Taxonomy::coffee_shop();
        let three = compare_variants::<f64>(&runs, &gold(), &t, Level::Attribute, Scale::Three, &cfg()).unwrap();
        let five = compare_variants::<f64>(&runs, &gold(), &t, Level::Attribute, Scale::Five, &cfg()).unwrap();
        assert_eq!(three.rows[0].sentiment.unwrap().raw_agreement.value, 1.0);
        assert_eq!(five.rows[0].sentiment.unwrap().raw_agreement.value, 0.0);
    }
}
