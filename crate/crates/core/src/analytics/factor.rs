//! Two-factor perceptual map of stores from their mean attribute sentiment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::descriptive::joined;
use super::linalg::{symmetric_eigen, Matrix};
use super::AnalyticsError;
use crate::corpus::Review;
use crate::extraction::ReviewExtraction;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrant {
    /// Above both thresholds.
    Green,
    /// Below both.
    Red,
    /// Above on factor 1 only.
    Yellow,
    /// Above on factor 2 only.
    Blue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreScore<T> {
    pub store_id: String,
    pub scores: [T; 2],
    pub quadrant: Quadrant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptualMap<T> {
    /// Attributes that survived the constant-column drop, in input order.
    pub attributes: Vec<String>,
    /// One `[factor1, factor2]` pair per attribute.
    pub loadings: Vec<[T; 2]>,
    /// Share of total standardized variance per factor.
    pub variance_explained: [T; 2],
    pub stores: Vec<StoreScore<T>>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapConfig<T> {
    pub thresholds: [T; 2],
}

impl<T: Real> Default for MapConfig<T> {
    fn default() -> Self {
        Self { thresholds: [T::zero(); 2] }
    }
}

/// Stores × attributes matrix of mean 1–5 sentiment over mentioning reviews.
/// A store that never mentions an attribute gets the attribute's pooled mean.
/// Rows follow sorted store id.
pub fn store_sentiment_matrix<T: Real>(
    extractions: &[ReviewExtraction],
    reviews: &[Review],
    attributes: &[String],
) -> Result<(Vec<String>, Matrix<T>), AnalyticsError> {
    let rows = joined(extractions, reviews)?;
    let k = attributes.len();
    let mut sums: BTreeMap<&str, Vec<(f64, usize)>> = BTreeMap::new();
    let mut pooled = vec![(0.0, 0usize); k];
    for (e, r) in rows {
        let cell = sums.entry(r.store_id.as_str()).or_insert_with(|| vec![(0.0, 0); k]);
        for (j, a) in attributes.iter().enumerate() {
            if let Some(m) = e.attributes.get(a) {
                let s = f64::from(m.sentiment.score());
                cell[j].0 += s;
                cell[j].1 += 1;
                pooled[j].0 += s;
                pooled[j].1 += 1;
            }
        }
    }
    let fill: Vec<f64> = pooled.iter().map(|&(s, c)| if c > 0 { s / c as f64 } else { 3.0 }).collect();
    let ids: Vec<String> = sums.keys().map(|s| s.to_string()).collect();
    let data: Vec<Vec<T>> = sums
        .values()
        .map(|cells| {
            cells
                .iter()
                .zip(&fill)
                .map(|(&(s, c), &f)| T::lit(if c > 0 { s / c as f64 } else { f }))
                .collect()
        })
        .collect();
    Ok((ids, Matrix::from_rows(&data)))
}

/// Principal components of the column correlation matrix, two retained.
/// Loadings are eigenvectors scaled by the root eigenvalue; each factor is
/// signed so that its largest-magnitude loading is positive. Scores use the
/// regression method.
pub fn perceptual_map<T: Real>(
    data: &Matrix<T>,
    store_ids: &[String],
    attributes: &[String],
    cfg: &MapConfig<T>,
) -> Result<PerceptualMap<T>, AnalyticsError> {
    let (n, k0) = (data.rows(), data.cols());
    if store_ids.len() != n || attributes.len() != k0 {
        return Err(AnalyticsError::Shape(format!(
            "{n}x{k0} matrix with {} store ids and {} attributes",
            store_ids.len(),
            attributes.len()
        )));
    }
    if n < 3 {
        return Err(AnalyticsError::Degenerate(format!("{n} stores, need at least 3")));
    }
    let nf = T::from_count(n);
    let mut notes = Vec::new();
    let mut keep = Vec::new();
    let mut z_cols = Vec::new();
    for (j, name) in attributes.iter().enumerate().take(k0) {
        let col = data.column(j);
        let mean = col.iter().fold(T::zero(), |s, &v| s + v) / nf;
        let var = col.iter().fold(T::zero(), |s, &v| s + (v - mean) * (v - mean)) / (nf - T::one());
        if var <= T::epsilon() * (T::one() + mean.abs()) {
            notes.push(format!("dropped constant attribute `{name}`"));
            continue;
        }
        let sd = var.sqrt();
        keep.push(j);
        z_cols.push(col.into_iter().map(|v| (v - mean) / sd).collect::<Vec<T>>());
    }
    let k = keep.len();
    if k < 3 {
        return Err(AnalyticsError::Degenerate(format!("{k} non-constant attributes, need at least 3")));
    }
    let z = Matrix::from_columns(&z_cols);
    let mut corr = z.transpose().matmul(&z);
    for i in 0..k {
        for j in 0..k {
            corr[(i, j)] = corr[(i, j)] / (nf - T::one());
        }
    }
    let eig = symmetric_eigen(&corr);
    let tol = T::epsilon().sqrt();
    if eig.values.iter().filter(|&&l| l > tol).count() < 2 {
        return Err(AnalyticsError::Degenerate("fewer than two positive eigenvalues".into()));
    }

    let kf = T::from_count(k);
    let mut loadings = vec![[T::zero(); 2]; k];
    let mut variance_explained = [T::zero(); 2];
    for f in 0..2 {
        let lambda = eig.values[f];
        let root = lambda.sqrt();
        let v = eig.vectors.column(f);
        let lead = v.iter().copied().fold(T::zero(), |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if lead < T::zero() { -T::one() } else { T::one() };
        for (i, &vi) in v.iter().enumerate() {
            loadings[i][f] = sign * vi * root;
        }
        variance_explained[f] = lambda / kf;
    }

    // Regression scores: Z R⁻¹ L, which reduces to Z L Λ⁻¹ for components.
    let stores = (0..n)
        .map(|s| {
            let row = z.row(s);
            let mut scores = [T::zero(); 2];
            for (f, score) in scores.iter_mut().enumerate() {
                let dot = row.iter().zip(&loadings).fold(T::zero(), |acc, (&zi, l)| acc + zi * l[f]);
                *score = dot / eig.values[f];
            }
            let hi = [scores[0] > cfg.thresholds[0], scores[1] > cfg.thresholds[1]];
            let quadrant = match hi {
                [true, true] => Quadrant::Green,
                [false, false] => Quadrant::Red,
                [true, false] => Quadrant::Yellow,
                [false, true] => Quadrant::Blue,
            };
            StoreScore { store_id: store_ids[s].clone(), scores, quadrant }
        })
        .collect();

    Ok(PerceptualMap {
        attributes: keep.iter().map(|&j| attributes[j].clone()).collect(),
        loadings,
        variance_explained,
        stores,
        notes,
    })
}
