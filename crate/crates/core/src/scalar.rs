//! Scalar abstractions shared by the numeric modules.
//!
//! Statistical routines that need square roots or transcendental functions are
//! generic over [`Real`] (`f32` or `f64`). Purely linear quantities such as
//! importance weights, uplift deltas and revenue ranges only need field
//! arithmetic, so they are generic over [`Field`] and also accept the exact
//! rational type [`Exact`].

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, NumCast, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumCast + Debug + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for constants.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits the scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Ordered field scalar. Covers the float types and [`Exact`].
pub trait Field: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug {
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits the scalar type")
    }
}

impl<T> Field for T where T: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug {}

/// Exact rational scalar for hand-checkable arithmetic.
pub type Exact = Ratio<i64>;

/// Builds an [`Exact`] from a decimal string such as `"0.19"` or `"-1.5"`.
pub fn exact_decimal(s: &str) -> Option<Exact> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let digits = format!("{int}{frac}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let numer: i64 = digits.parse().ok()?;
    let denom = 10i64.checked_pow(frac.len() as u32)?;
    let r = Ratio::new(numer, denom);
    Some(if neg { -r } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing() {
        assert_eq!(exact_decimal("0.19"), Some(Ratio::new(19, 100)));
        assert_eq!(exact_decimal(".05"), Some(Ratio::new(1, 20)));
        assert_eq!(exact_decimal("-1.5"), Some(Ratio::new(-3, 2)));
        assert_eq!(exact_decimal("2"), Some(Ratio::from_integer(2)));
        assert_eq!(exact_decimal("abc"), None);
        assert_eq!(exact_decimal("."), None);
    }
}
