//! Affine expressions over the input profile and linear constraints on it.

use std::fmt;
use std::ops::{Add, Sub};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::scalar::{self, format_rational, serde_rational, serde_rational_vec, Rational};

/// `coeffs · x + constant`. An empty coefficient vector stands for all zeros
/// so that constants need not know the dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    pub coeffs: Vec<Rational>,
    pub constant: Rational,
}

impl AffineExpr {
    pub fn constant(c: Rational) -> Self {
        AffineExpr { coeffs: Vec::new(), constant: c }
    }

    /// The coordinate `x_i` of a `dim`-dimensional input.
    pub fn variable(i: usize, dim: usize) -> Self {
        let mut coeffs = vec![Rational::zero(); dim];
        coeffs[i] = Rational::from_integer(1.into());
        AffineExpr { coeffs, constant: Rational::zero() }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn coeff(&self, i: usize) -> Rational {
        self.coeffs.get(i).cloned().unwrap_or_else(Rational::zero)
    }

    /// Coefficients padded to `dim`.
    pub fn dense(&self, dim: usize) -> Vec<Rational> {
        (0..dim).map(|i| self.coeff(i)).collect()
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        self.coeffs
            .iter()
            .zip(x)
            .fold(self.constant.clone(), |acc, (c, v)| acc + c * v)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&Rational, &Rational) -> Rational) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|i| f(&self.coeff(i), &other.coeff(i))).collect();
        AffineExpr { coeffs, constant: f(&self.constant, &other.constant) }
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;

    fn add(self, rhs: Self) -> Self {
        self.zip_with(&rhs, |a, b| a + b)
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;

    fn sub(self, rhs: Self) -> Self {
        self.zip_with(&rhs, |a, b| a - b)
    }
}

impl scalar::Scalar for AffineExpr {
    fn zero() -> Self {
        AffineExpr::constant(<Rational as Zero>::zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "=")]
    Eq,
}

impl Relation {
    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Lt => lhs < rhs,
            Relation::Eq => lhs == rhs,
        }
    }
}

/// `coeffs · x  rel  bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinearConstraint {
    #[serde(with = "serde_rational_vec")]
    pub coeffs: Vec<Rational>,
    pub rel: Relation,
    #[serde(with = "serde_rational")]
    pub bound: Rational,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<Rational>, rel: Relation, bound: Rational) -> Self {
        LinearConstraint { coeffs, rel, bound }
    }

    /// `e ≤ 0`, `e < 0` or `e = 0` for an affine `e`.
    pub fn from_expr(e: &AffineExpr, rel: Relation, dim: usize) -> Self {
        LinearConstraint { coeffs: e.dense(dim), rel, bound: -e.constant.clone() }
    }

    pub fn holds(&self, x: &[Rational]) -> bool {
        let lhs = self
            .coeffs
            .iter()
            .zip(x)
            .fold(Rational::zero(), |acc, (c, v)| acc + c * v);
        self.rel.holds(&lhs, &self.bound)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }
}

impl fmt::Display for LinearConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { "-" } else if first { "" } else { "+" };
            let mag = c.abs();
            let coef = if mag == Rational::from_integer(1.into()) { String::new() } else { format_rational(&mag) + "*" };
            write!(f, "{}{sign}{coef}u{}", if first { "" } else { " " }, i + 1)?;
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        let rel = match self.rel {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Eq => "=",
        };
        write!(f, " {rel} {}", format_rational(&self.bound))
    }
}
