//! Fully ordered nonnegative workload vectors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ascending, nonnegative, finite workload vector of dimension >= 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OrderedProfile(Vec<f64>);

impl TryFrom<Vec<f64>> for OrderedProfile {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        OrderedProfile::new(v)
    }
}

impl From<OrderedProfile> for Vec<f64> {
    fn from(p: OrderedProfile) -> Self {
        p.0
    }
}

impl OrderedProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidProfile("dimension must be >= 1".into()));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidProfile(format!("entry {x} is not a finite nonnegative number")));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidProfile(format!("{values:?} is not ascending")));
        }
        Ok(OrderedProfile(values))
    }

    /// Sorts first.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(f64::total_cmp);
        OrderedProfile::new(values)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1);
        OrderedProfile(vec![0.0; dim])
    }

    /// Caller guarantees the invariant (map outputs).
    pub(crate) fn from_map_output(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        debug_assert!(values.iter().all(|x| *x >= 0.0), "{values:?}");
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1]), "{values:?}");
        OrderedProfile(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// One-based coordinate access, matching the usual `u(i)` notation.
    pub fn at(&self, i: usize) -> f64 {
        self.0[i - 1]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Coordinatewise order `self ≺ other`. Dimensions must agree.
    pub fn precedes(&self, other: &OrderedProfile) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn max_norm_distance(&self, other: &OrderedProfile) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Coordinatewise maximum; stays ordered.
    pub fn join(&self, other: &OrderedProfile) -> OrderedProfile {
        OrderedProfile(self.0.iter().zip(&other.0).map(|(a, b)| a.max(*b)).collect())
    }
}

impl fmt::Display for OrderedProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// First `p` coordinates.
pub fn restrict(u: &OrderedProfile, p: usize) -> Result<OrderedProfile> {
    if p == 0 || p > u.dim() {
        return Err(Error::OutOfRange(format!("restriction to {p} coordinates of a {}-vector", u.dim())));
    }
    Ok(OrderedProfile(u.0[..p].to_vec()))
}
