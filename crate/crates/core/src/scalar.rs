//! Ordered scalars shared by the floating-point and exact code paths.
//!
//! Every driving map is written once against [`Scalar`] plus a [`Comparator`].
//! Comparisons are routed through the comparator so that the exact-orbit
//! module can intercept each branch (`max`, `min`, positive part, the
//! empty-server test, sorting) and enumerate the piecewise-affine structure
//! of a map without a second implementation of it.

use std::fmt::Debug;
use std::ops::{Add, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub trait Scalar: Clone + Debug + PartialEq + Add<Output = Self> + Sub<Output = Self> {
    fn zero() -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Scalar for Rational {
    fn zero() -> Self {
        <Rational as Zero>::zero()
    }
}

/// Decides the order relations a map needs.
pub trait Comparator<S> {
    fn le(&mut self, a: &S, b: &S) -> bool;

    /// Empty-server test on a nonnegative workload. Exact equality.
    fn is_zero(&mut self, a: &S) -> bool;
}

/// Plain comparison for totally ordered scalars.
#[derive(Debug, Default, Clone, Copy)]
pub struct Exact;

impl<S: Scalar + PartialOrd> Comparator<S> for Exact {
    fn le(&mut self, a: &S, b: &S) -> bool {
        a <= b
    }

    fn is_zero(&mut self, a: &S) -> bool {
        *a == S::zero()
    }
}

pub fn max<S: Scalar, C: Comparator<S>>(c: &mut C, a: &S, b: &S) -> S {
    if c.le(b, a) {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn min<S: Scalar, C: Comparator<S>>(c: &mut C, a: &S, b: &S) -> S {
    if c.le(a, b) {
        a.clone()
    } else {
        b.clone()
    }
}

/// `[x]^+`
pub fn pos<S: Scalar, C: Comparator<S>>(c: &mut C, x: S) -> S {
    let z = S::zero();
    if c.le(&x, &z) {
        z
    } else {
        x
    }
}

/// Stable ascending insertion sort driven by the comparator.
pub fn sort<S: Scalar, C: Comparator<S>>(c: &mut C, v: &mut [S]) {
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && !c.le(&v[j - 1], &v[j]) {
            v.swap(j - 1, j);
            j -= 1;
        }
    }
}

/// Exact rational value of a finite float (no rounding).
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    Rational::from_f64(x).ok_or_else(|| Error::InvalidArgument(format!("{x} is not finite")))
}

pub fn rational_to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// `"num/den"` rendering used in every JSON report.
pub fn format_rational(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let parse_int = |t: &str| {
        t.trim()
            .parse::<BigInt>()
            .map_err(|e| Error::Parse(format!("bad rational '{s}': {e}")))
    };
    match s.split_once('/') {
        Some((n, d)) => {
            let d = parse_int(d)?;
            if d.is_zero() {
                return Err(Error::Parse(format!("zero denominator in '{s}'")));
            }
            Ok(Rational::new(parse_int(n)?, d))
        }
        None => Ok(Rational::from_integer(parse_int(s)?)),
    }
}

pub fn abs_diff(a: &Rational, b: &Rational) -> Rational {
    (a - b).abs()
}

/// Serde adapter writing a rational as a `"num/den"` string.
pub mod serde_rational {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for nested vectors of rationals.
pub mod serde_rational_vec {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(format_rational).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

pub mod serde_rational_mat {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<Rational>], s: S) -> Result<S::Ok, S::Error> {
        m.iter()
            .map(|row| row.iter().map(format_rational).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Rational>>, D::Error> {
        Vec::<Vec<String>>::deserialize(d)?
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insertion_sort_is_ascending() {
        let mut v = vec![3.0, 1.0, 2.0, 1.0];
        sort(&mut Exact, &mut v);
        assert_eq!(v, vec![1.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn rational_text_round_trip() {
        let q = parse_rational("23/12").unwrap();
        assert_eq!(format_rational(&q), "23/12");
        assert_eq!(parse_rational("4/2").unwrap(), Rational::from_integer(2.into()));
        assert_eq!(format_rational(&parse_rational("3").unwrap()), "3/1");
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn float_conversion_is_exact() {
        let q = rational_from_f64(2.25).unwrap();
        assert_eq!(q, Rational::new(9.into(), 4.into()));
        assert!(rational_from_f64(f64::NAN).is_err());
    }
}
