//! Relative importance from the spread of valence coefficients.

use serde::{Deserialize, Serialize};

use super::design::{column_name, Dummy};
use super::ols::FittedModel;
use super::AnalyticsError;
use crate::scalar::Field;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance<T> {
    pub item: String,
    pub range: T,
    pub weight: T,
}

fn max3<T: Field>(a: T, b: T, c: T) -> T {
    let m = if b > a { b } else { a };
    if c > m { c } else { m }
}

fn min3<T: Field>(a: T, b: T, c: T) -> T {
    let m = if b < a { b } else { a };
    if c < m { c } else { m }
}

/// Range of {0 (negative reference), neutral, positive} per item, normalised
/// to sum to one. Not-mentioned coefficients do not enter.
pub fn importance<T: Field>(
    model: &FittedModel<T>,
    items: &[String],
) -> Result<Vec<Importance<T>>, AnalyticsError> {
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let coef = |d| {
            let name = column_name(item, d);
            model.estimate(&name).ok_or(AnalyticsError::MissingCoefficient(name))
        };
        let (neu, pos) = (coef(Dummy::Neutral)?, coef(Dummy::Positive)?);
        let zero = T::zero();
        out.push(Importance { item: item.clone(), range: max3(zero, neu, pos) - min3(zero, neu, pos), weight: zero });
    }
    let total = out.iter().fold(T::zero(), |s, i| s + i.range);
    if total == T::zero() {
        return Err(AnalyticsError::Undefined("every importance range is zero".into()));
    }
    for i in &mut out {
        i.weight = i.range / total;
    }
    Ok(out)
}
