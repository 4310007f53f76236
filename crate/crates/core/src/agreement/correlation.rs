use serde::{Deserialize, Serialize};

use super::AgreementError;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlations<T> {
    pub pearson: T,
    pub spearman: T,
}

pub fn pearson<T: Real>(x: &[T], y: &[T]) -> Result<T, AgreementError> {
    if x.len() != y.len() {
        return Err(AgreementError::Shape(format!("lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(AgreementError::Shape("correlation needs at least 3 pairs".into()));
    }
    let n = T::from_count(x.len());
    let mx = x.iter().fold(T::zero(), |a, &b| a + b) / n;
    let my = y.iter().fold(T::zero(), |a, &b| a + b) / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(AgreementError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).max(-T::one()).min(T::one()))
}

/// 1-based ranks, ties sharing their average rank.
pub fn average_ranks<T: Real>(x: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("no NaN"));
    let mut ranks = vec![T::zero(); x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = T::from_count(i + j + 2) / T::lit(2.0);
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman<T: Real>(x: &[T], y: &[T]) -> Result<T, AgreementError> {
    if x.len() != y.len() {
        return Err(AgreementError::Shape(format!("lengths {} and {}", x.len(), y.len())));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn correlations<T: Real>(x: &[T], y: &[T]) -> Result<Correlations<T>, AgreementError> {
    Ok(Correlations { pearson: pearson(x, y)?, spearman: spearman(x, y)? })
}
