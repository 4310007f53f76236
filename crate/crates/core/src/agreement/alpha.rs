use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{bootstrap_ci, AgreementError, BootstrapConfig, Estimate};
use crate::scalar::Real;

/// Units × coders matrix of nominal labels; `None` is a missing label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReliabilityData<L> {
    pub units: Vec<String>,
    pub coders: Vec<String>,
    pub labels: Vec<Vec<Option<L>>>,
}

impl<L: Ord + Clone> ReliabilityData<L> {
    pub fn new(units: Vec<String>, coders: Vec<String>, labels: Vec<Vec<Option<L>>>) -> Result<Self, AgreementError> {
        if coders.len() < 2 {
            return Err(AgreementError::Shape(format!("need at least 2 coders, got {}", coders.len())));
        }
        if labels.len() != units.len() {
            return Err(AgreementError::Shape(format!("{} units but {} label rows", units.len(), labels.len())));
        }
        if let Some(row) = labels.iter().find(|r| r.len() != coders.len()) {
            return Err(AgreementError::Shape(format!("row of {} labels for {} coders", row.len(), coders.len())));
        }
        let data = Self { units, coders, labels };
        if data.pairable_units() == 0 {
            return Err(AgreementError::NoPairableUnits);
        }
        Ok(data)
    }

    /// Two complete label vectors as a two-coder matrix.
    pub fn from_pair(a: &[L], b: &[L]) -> Result<Self, AgreementError> {
        if a.len() != b.len() {
            return Err(AgreementError::Shape(format!("lengths {} and {}", a.len(), b.len())));
        }
        Self::new(
            (0..a.len()).map(|i| i.to_string()).collect(),
            vec!["a".into(), "b".into()],
            a.iter().zip(b).map(|(x, y)| vec![Some(x.clone()), Some(y.clone())]).collect(),
        )
    }

    pub fn pairable_units(&self) -> usize {
        self.labels.iter().filter(|r| r.iter().flatten().count() >= 2).count()
    }

    /// Per-unit label counts over a shared label index; units with fewer than
    /// two labels are dropped.
    fn unit_counts(&self) -> (usize, Vec<Vec<usize>>) {
        let mut index = BTreeMap::new();
        for l in self.labels.iter().flatten().flatten() {
            let next = index.len();
            index.entry(l.clone()).or_insert(next);
        }
        let k = index.len();
        let counts = self
            .labels
            .iter()
            .filter(|r| r.iter().flatten().count() >= 2)
            .map(|r| {
                let mut c = vec![0usize; k];
                for l in r.iter().flatten() {
                    c[index[l]] += 1;
                }
                c
            })
            .collect();
        (k, counts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult<T> {
    pub estimate: Estimate<T>,
    /// Only one label value occurs, so expected disagreement is zero and
    /// alpha is set to 1.
    pub degenerate: bool,
    pub n_units: usize,
    pub n_pairable: usize,
    pub n_values: usize,
}

/// Nominal alpha from the coincidence matrix of the given units.
fn alpha_of<T: Real>(k: usize, units: &[&Vec<usize>]) -> Option<(T, bool)> {
    let mut o_diag = vec![T::zero(); k];
    let mut n_c = vec![T::zero(); k];
    let mut n = T::zero();
    for counts in units {
        let m: usize = counts.iter().sum();
        if m < 2 {
            continue;
        }
        let m1 = T::from_count(m - 1);
        for (c, &nc) in counts.iter().enumerate() {
            if nc == 0 {
                continue;
            }
            let nc_t = T::from_count(nc);
            o_diag[c] = o_diag[c] + nc_t * T::from_count(nc - 1) / m1;
            n_c[c] = n_c[c] + nc_t;
        }
        n = n + T::from_count(m);
    }
    if n == T::zero() {
        return None;
    }
    let observed = n - o_diag.iter().fold(T::zero(), |a, &b| a + b);
    let expected = n * n - n_c.iter().fold(T::zero(), |a, &b| a + b * b);
    if expected == T::zero() {
        return Some((T::one(), true));
    }
    Some((T::one() - (n - T::one()) * observed / expected, false))
}

pub fn krippendorff_alpha<T: Real, L: Ord + Clone>(
    data: &ReliabilityData<L>,
    config: &BootstrapConfig,
) -> Result<AlphaResult<T>, AgreementError> {
    let (k, counts) = data.unit_counts();
    let all: Vec<&Vec<usize>> = counts.iter().collect();
    let (alpha, degenerate) = alpha_of::<T>(k, &all).ok_or(AgreementError::NoPairableUnits)?;
    let ci = bootstrap_ci(counts.len(), alpha, config, |idx| {
        let pick: Vec<&Vec<usize>> = idx.iter().map(|&i| &counts[i]).collect();
        alpha_of::<T>(k, &pick).map(|(a, _)| a)
    });
    Ok(AlphaResult {
        estimate: Estimate { value: alpha, ci },
        degenerate,
        n_units: data.units.len(),
        n_pairable: counts.len(),
        n_values: counts.iter().flatten().sum(),
    })
}

/// Fraction of positions where `a` and `b` agree, with a bootstrap interval.
pub fn raw_agreement<T: Real, L: PartialEq + Sync>(
    a: &[L],
    b: &[L],
    config: &BootstrapConfig,
) -> Result<Estimate<T>, AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::Shape(format!("lengths {} and {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(AgreementError::Shape("empty label vectors".into()));
    }
    let same: Vec<bool> = a.iter().zip(b).map(|(x, y)| x == y).collect();
    let frac = |idx: &[usize]| {
        let hits = idx.iter().filter(|&&i| same[i]).count();
        T::from_count(hits) / T::from_count(idx.len())
    };
    let all: Vec<usize> = (0..same.len()).collect();
    let value = frac(&all);
    let ci = bootstrap_ci(same.len(), value, config, |idx| Some(frac(idx)));
    Ok(Estimate { value, ci })
}
