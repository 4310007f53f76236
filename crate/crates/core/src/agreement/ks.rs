use serde::{Deserialize, Serialize};

use super::AgreementError;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult<T> {
    pub statistic: T,
    pub p_value: T,
    pub n_a: usize,
    pub n_b: usize,
}

/// Asymptotic Kolmogorov distribution tail, P(K > lambda).
pub fn kolmogorov_q<T: Real>(lambda: T) -> T {
    let zero = T::zero();
    let one = T::one();
    if lambda <= zero {
        return one;
    }
    let eps = T::lit(1e-16);
    if lambda < T::lit(1.18) {
        // Theta-function form, fast for small lambda.
        let pi = T::lit(std::f64::consts::PI);
        let c = -(pi * pi) / (T::lit(8.0) * lambda * lambda);
        let mut sum = zero;
        for j in 1..=50 {
            let k = T::from_count(2 * j - 1);
            let term = (c * k * k).exp();
            sum = sum + term;
            if term < eps * sum {
                break;
            }
        }
        let p = one - (T::lit(2.0) * pi).sqrt() / lambda * sum;
        return p.max(zero).min(one);
    }
    let mut sum = zero;
    let mut sign = one;
    for j in 1..=100 {
        let jt = T::from_count(j);
        let term = (T::lit(-2.0) * jt * jt * lambda * lambda).exp();
        sum = sum + sign * term;
        if term < eps * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (T::lit(2.0) * sum).max(zero).min(one)
}

/// Two-sample Kolmogorov–Smirnov test. D is the largest gap between the two
/// empirical CDFs; p uses the asymptotic distribution at
/// (sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) * D with ne = n m / (n + m).
pub fn ks_test<T: Real, V: PartialOrd + Copy>(a: &[V], b: &[V]) -> Result<KsResult<T>, AgreementError> {
    if a.is_empty() || b.is_empty() {
        return Err(AgreementError::Shape("KS test needs two non-empty samples".into()));
    }
    let cmp = |x: &V, y: &V| x.partial_cmp(y).expect("comparable sample values");
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(cmp);
    ys.sort_by(cmp);
    let (n, m) = (xs.len(), ys.len());
    let (nt, mt) = (T::from_count(n), T::from_count(m));
    let (mut i, mut j) = (0, 0);
    let mut d = T::zero();
    while i < n && j < m {
        let v = if cmp(&xs[i], &ys[j]).is_le() { xs[i] } else { ys[j] };
        while i < n && cmp(&xs[i], &v).is_le() {
            i += 1;
        }
        while j < m && cmp(&ys[j], &v).is_le() {
            j += 1;
        }
        let gap = (T::from_count(i) / nt - T::from_count(j) / mt).abs();
        d = d.max(gap);
    }
    let ne = (nt * mt / (nt + mt)).sqrt();
    let lambda = (ne + T::lit(0.12) + T::lit(0.11) / ne) * d;
    Ok(KsResult { statistic: d, p_value: kolmogorov_q(lambda), n_a: n, n_b: m })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_disjoint() {
        let r = ks_test::<f64, i64>(&[1, 2, 2, 3], &[3, 2, 1, 2]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let r = ks_test::<f64, i64>(&[1, 2, 3], &[4, 5, 6]).unwrap();
        assert_eq!(r.statistic, 1.0);
    }

    #[test]
    fn symmetric() {
        let a = [1, 3, 3, 7, 8];
        let b = [2, 3, 5, 9];
        let ab = ks_test::<f64, i32>(&a, &b).unwrap();
        let ba = ks_test::<f64, i32>(&b, &a).unwrap();
        assert_eq!(ab.statistic, ba.statistic);
        assert_eq!(ab.p_value, ba.p_value);
    }

    #[test]
    fn series_forms_agree_at_switch() {
        let below: f64 = kolmogorov_q(1.18 - 1e-12);
        let above: f64 = kolmogorov_q(1.18);
        assert!((below - above).abs() < 1e-9);
        assert!((kolmogorov_q::<f64>(1.36) - 0.0494).abs() < 1e-3);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(ks_test::<f64, i32>(&[], &[1]).is_err());
    }
}
