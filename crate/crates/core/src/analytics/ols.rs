//! Least squares with plain and store-clustered standard errors.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::linalg::{Matrix, Qr};
use super::AnalyticsError;
use crate::corpus::Artifact;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient<T> {
    pub name: String,
    pub estimate: T,
    pub se: Option<T>,
    pub cluster_se: Option<T>,
    /// Two-sided normal p-value, from the clustered SE when available.
    pub p_value: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStats<T> {
    pub n: usize,
    pub k: usize,
    pub r_squared: T,
    pub adj_r_squared: T,
    /// Residual standard error.
    pub sigma: T,
    pub n_clusters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel<T> {
    pub coefficients: Vec<Coefficient<T>>,
    pub stats: Option<FitStats<T>>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl<T: Copy> FittedModel<T> {
    /// A model known only by its point estimates, e.g. copied from a report.
    pub fn from_estimates<S: Into<String>>(pairs: impl IntoIterator<Item = (S, T)>) -> Self {
        Self {
            coefficients: pairs
                .into_iter()
                .map(|(name, estimate)| Coefficient {
                    name: name.into(),
                    estimate,
                    se: None,
                    cluster_se: None,
                    p_value: None,
                })
                .collect(),
            stats: None,
            notes: Vec::new(),
        }
    }

    pub fn coefficient(&self, name: &str) -> Option<&Coefficient<T>> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn estimate(&self, name: &str) -> Option<T> {
        self.coefficient(name).map(|c| c.estimate)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.coefficients.iter().map(|c| c.name.as_str())
    }
}

impl<T: Serialize + DeserializeOwned> Artifact for FittedModel<T> {
    const KIND: &'static str = "fitted_model";
}

/// Fits `y = X b + e`. `clusters`, when given, assigns each row to a
/// cluster for the one-way sandwich estimator with the usual
/// `G/(G-1) * (n-1)/(n-k)` correction.
pub fn fit_ols<T: Real, C: Ord>(
    x: &Matrix<T>,
    y: &[T],
    clusters: Option<&[C]>,
    names: &[String],
) -> Result<FittedModel<T>, AnalyticsError> {
    let (n, k) = (x.rows(), x.cols());
    if y.len() != n || names.len() != k || clusters.is_some_and(|c| c.len() != n) {
        return Err(AnalyticsError::Shape(format!(
            "X is {n}x{k}, y has {}, {} names, {} cluster ids",
            y.len(),
            names.len(),
            clusters.map_or(n, <[C]>::len)
        )));
    }
    if n <= k {
        return Err(AnalyticsError::Shape(format!("{n} rows cannot identify {k} coefficients")));
    }
    let qr = Qr::new(x);
    let dependent = qr.dependent_columns(x);
    if !dependent.is_empty() {
        return Err(AnalyticsError::RankDeficient {
            columns: dependent.into_iter().map(|j| names[j].clone()).collect(),
        });
    }
    let beta = qr.solve(y);
    let fitted = x.mul_vec(&beta);
    let resid: Vec<T> = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let ssr = resid.iter().fold(T::zero(), |s, &e| s + e * e);
    let nf = T::from_count(n);
    let kf = T::from_count(k);
    let mean = y.iter().fold(T::zero(), |s, &v| s + v) / nf;
    let sst = y.iter().fold(T::zero(), |s, &v| s + (v - mean) * (v - mean));
    let r_squared = if sst > T::zero() { T::one() - ssr / sst } else { T::one() };
    let adj_r_squared = T::one() - (T::one() - r_squared) * (nf - T::one()) / (nf - kf);
    let sigma2 = ssr / (nf - kf);
    let bread = qr.gram_inverse();
    let se: Vec<T> = (0..k).map(|j| (sigma2 * bread[(j, j)]).sqrt()).collect();

    let mut notes = Vec::new();
    let mut n_clusters = None;
    let cluster_se: Option<Vec<T>> = match clusters {
        None => None,
        Some(ids) => {
            let mut groups: BTreeMap<&C, Vec<T>> = BTreeMap::new();
            for (i, id) in ids.iter().enumerate() {
                let s = groups.entry(id).or_insert_with(|| vec![T::zero(); k]);
                for (sj, &xij) in s.iter_mut().zip(x.row(i)) {
                    *sj = *sj + xij * resid[i];
                }
            }
            let g = groups.len();
            n_clusters = Some(g);
            if g < 2 {
                notes.push("clustered standard errors need at least two clusters".to_string());
                None
            } else {
                let mut meat = Matrix::zeros(k, k);
                for s in groups.values() {
                    for a in 0..k {
                        for b in 0..k {
                            meat[(a, b)] = meat[(a, b)] + s[a] * s[b];
                        }
                    }
                }
                let gf = T::from_count(g);
                let c = gf / (gf - T::one()) * (nf - T::one()) / (nf - kf);
                let v = bread.matmul(&meat).matmul(&bread);
                Some((0..k).map(|j| (c * v[(j, j)]).max(T::zero()).sqrt()).collect())
            }
        }
    };

    let normal = Normal::standard();
    let coefficients = (0..k)
        .map(|j| {
            let sj = cluster_se.as_ref().map_or(se[j], |c| c[j]);
            let p_value = (sj > T::zero()).then(|| {
                let z = (beta[j] / sj).abs().as_f64();
                T::lit(2.0 * normal.sf(z))
            });
            Coefficient {
                name: names[j].clone(),
                estimate: beta[j],
                se: Some(se[j]),
                cluster_se: cluster_se.as_ref().map(|c| c[j]),
                p_value,
            }
        })
        .collect();
    Ok(FittedModel {
        coefficients,
        stats: Some(FitStats { n, k, r_squared, adj_r_squared, sigma: sigma2.sqrt(), n_clusters }),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn exact_line() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]]);
        let m = fit_ols::<f64, u8>(&x, &[1.0, 2.0, 3.0], None, &names(2)).unwrap();
        assert_relative_eq!(m.coefficients[0].estimate, 0.0, epsilon = 1e-12);
        assert_relative_eq!(m.coefficients[1].estimate, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.stats.unwrap().r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn singleton_clusters_equal_hc1() {
        let xs = [0.5, 1.7, 2.1, 3.3, 4.0, 5.2, 6.9];
        let ys = [1.0, 2.9, 2.2, 4.8, 4.1, 7.7, 6.0];
        let x = Matrix::from_rows(&xs.iter().map(|&v| vec![1.0, v]).collect::<Vec<_>>());
        let ids: Vec<usize> = (0..xs.len()).collect();
        let m = fit_ols(&x, &ys, Some(&ids), &names(2)).unwrap();
        // HC1 by the scalar formula for simple regression
        let n = xs.len() as f64;
        let xbar = xs.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|v| (v - xbar).powi(2)).sum();
        let b = m.coefficients[1].estimate;
        let a = m.coefficients[0].estimate;
        let meat: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(&xi, &yi)| ((xi - xbar) * (yi - a - b * xi)).powi(2))
            .sum();
        let hc1 = (n / (n - 2.0) * meat / (sxx * sxx)).sqrt();
        assert_relative_eq!(m.coefficients[1].cluster_se.unwrap(), hc1, epsilon = 1e-12);
    }

    #[test]
    fn one_cluster_is_flagged() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 3.0]]);
        let m = fit_ols(&x, &[1.0, 0.0, 2.0], Some(&["s", "s", "s"]), &names(2)).unwrap();
        assert!(m.coefficients[0].cluster_se.is_none());
        assert_eq!(m.notes.len(), 1);
        assert!(m.coefficients[0].p_value.is_some());
    }

    #[test]
    fn collinear_column_named() {
        let x = Matrix::from_rows(&[
            vec![1.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
        ]);
        let err = fit_ols::<f64, u8>(&x, &[1.0, 2.0, 3.0, 4.0], None, &names(3)).unwrap_err();
        assert_eq!(err, AnalyticsError::RankDeficient { columns: vec!["x2".into()] });
    }
}
