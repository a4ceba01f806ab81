//! Log-exact norm values.
//!
//! A norm value is `theta^alpha` for one fixed weight `theta` in (0,1), stored
//! as the exponent `alpha`. Larger `alpha` means smaller norm; the zero element
//! has `alpha = +inf`.

use num_rational::Rational64;
use serde::{Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;

/// `None` encodes `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NormExponent(pub Option<Rational64>);

impl NormExponent {
    pub const INFINITY: NormExponent = NormExponent(None);

    pub fn finite(a: Rational64) -> Self {
        NormExponent(Some(a))
    }

    pub fn int(a: i64) -> Self {
        NormExponent(Some(Rational64::from_integer(a)))
    }

    pub fn is_infinite(&self) -> bool {
        self.0.is_none()
    }

    pub fn value(&self) -> Option<Rational64> {
        self.0
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// Exponent of a product of norms.
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Self) -> Self {
        match (self.0, other.0) {
            (Some(a), Some(b)) => NormExponent(Some(a + b)),
            _ => NormExponent::INFINITY,
        }
    }

    pub fn scale(self, k: Rational64) -> Self {
        NormExponent(self.0.map(|a| a * k))
    }

    pub fn shift(self, k: Rational64) -> Self {
        NormExponent(self.0.map(|a| a + k))
    }
}

impl PartialOrd for NormExponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Orders exponents, so `a < b` means `|a| > |b|`.
impl Ord for NormExponent {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.0, other.0) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Greater,
            (Some(_), None) => Ordering::Less,
            (Some(a), Some(b)) => a.cmp(&b),
        }
    }
}

impl fmt::Display for NormExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            None => write!(f, "inf"),
            Some(a) => write!(f, "{}/{}", a.numer(), a.denom()),
        }
    }
}

impl Serialize for NormExponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Formats a rational as `num/den`.
pub fn rat_string(a: Rational64) -> String {
    format!("{}/{}", a.numer(), a.denom())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_and_display() {
        let half = NormExponent::finite(Rational64::new(1, 2));
        assert!(half < NormExponent::int(1));
        assert!(NormExponent::int(7) < NormExponent::INFINITY);
        assert_eq!(half.min(NormExponent::INFINITY), half);
        assert_eq!(half.to_string(), "1/2");
        assert_eq!(NormExponent::int(3).to_string(), "3/1");
        assert_eq!(NormExponent::INFINITY.to_string(), "inf");
        assert_eq!(half.add(NormExponent::INFINITY), NormExponent::INFINITY);
    }
}
