//! Supremum statistics
//! `Z_ℓ = [sup_{k ≥ ℓ} (σ∘θ^{-k} − Σ_{i=1..k} τ∘θ^{-i})]⁺`.
//!
//! The supremum is truncated at a finite lag `K`. Terms beyond `K` are bounded
//! by `sup σ − Σ_{i=1..K} τ∘θ^{-i}`, where `sup σ` is the largest service time
//! observed on the path; the truncation is reported valid when that bound
//! cannot change the result.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::OrderedProfile;
use crate::space::MarkedPath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZValue {
    pub value: f64,
    pub tail_bound_ok: bool,
}

/// `(Z_p, Z_{p-1}, …, Z_1)`, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZVector {
    pub values: OrderedProfile,
    pub truncation_k: usize,
    pub tail_bound_ok: bool,
}

impl ZVector {
    /// `Z_ℓ` for `1 <= ℓ <= p`.
    pub fn z(&self, ell: usize) -> f64 {
        let p = self.values.dim();
        self.values.at(p + 1 - ell)
    }
}

/// Evaluates `Z` statistics at arbitrary times of one stored path.
#[derive(Debug, Clone)]
pub struct ZScanner<'a> {
    path: &'a MarkedPath,
    sigma_sup: f64,
}

impl<'a> ZScanner<'a> {
    pub fn new(path: &'a MarkedPath) -> Self {
        ZScanner { path, sigma_sup: path.max_sigma() }
    }

    /// Number of marks strictly before `present`.
    pub fn history(&self, present: i64) -> usize {
        (present - self.path.origin_index).clamp(0, self.path.len() as i64) as usize
    }

    /// `Z^p` at time `present`, truncated at lag `k`.
    pub fn zvector_at(&self, present: i64, p: usize, k: usize) -> Result<ZVector> {
        if p == 0 {
            return Err(Error::OutOfRange("p must be >= 1".into()));
        }
        if k < p {
            return Err(Error::InvalidArgument(format!("truncation {k} is below the lag {p}")));
        }
        if present - self.path.origin_index > self.path.len() as i64 {
            return Err(Error::PathTooShort(present - 1));
        }
        // terms[k-1] = σ(present−k) − Σ_{i=1..k} τ(present−i)
        let mut terms = Vec::with_capacity(k);
        let mut cum_tau = 0.0;
        for lag in 1..=k as i64 {
            let m = self.path.mark_at(present - lag).ok_or(Error::PathTooShort(present - lag))?;
            cum_tau += m.tau;
            terms.push(m.sigma - cum_tau);
        }
        // suffix maxima give every Z_ℓ in one pass
        let mut values = vec![0.0; p];
        let mut running = 0.0_f64;
        for lag in (1..=k).rev() {
            running = running.max(terms[lag - 1]);
            if lag <= p {
                values[p - lag] = running;
            }
        }
        let tail = self.sigma_sup - cum_tau;
        let tail_bound_ok = tail <= values[0];
        Ok(ZVector { values: OrderedProfile::from_map_output(values), truncation_k: k, tail_bound_ok })
    }

    /// Doubles the truncation from `initial_k` until the tail bound holds,
    /// the history runs out, or `cap` is reached.
    pub fn zvector_auto(&self, present: i64, p: usize, initial_k: usize, cap: usize) -> Result<ZVector> {
        let available = self.history(present);
        let limit = cap.min(available);
        if limit < p {
            return Err(Error::PathTooShort(present - p as i64));
        }
        let mut k = initial_k.max(p).min(limit);
        loop {
            let z = self.zvector_at(present, p, k)?;
            if z.tail_bound_ok || k >= limit {
                return Ok(z);
            }
            k = (2 * k).min(limit);
        }
    }
}

/// `Z_ℓ` at time 0 of a path covering times `-1..-truncation_k`.
pub fn compute_z(backward_path: &MarkedPath, ell: usize, truncation_k: usize) -> Result<ZValue> {
    if ell == 0 {
        return Err(Error::OutOfRange("ell must be >= 1".into()));
    }
    if truncation_k < ell {
        return Err(Error::InvalidArgument(format!("truncation {truncation_k} < ell {ell}")));
    }
    let z = ZScanner::new(backward_path).zvector_at(0, ell, truncation_k)?;
    Ok(ZValue { value: z.values.at(1), tail_bound_ok: z.tail_bound_ok })
}

/// `(Z_p, …, Z_1)` at time 0 of a path covering times `-1..-truncation_k`.
pub fn compute_zvector(backward_path: &MarkedPath, p: usize, truncation_k: usize) -> Result<ZVector> {
    ZScanner::new(backward_path).zvector_at(0, p, truncation_k)
}
